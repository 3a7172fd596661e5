#include "straw3d/sim/scene.hpp"

#include <json.hpp>

#include <fstream>
#include <random>
#include <stdexcept>

namespace straw3d::sim {

namespace {

using Eigen::AngleAxisd;
using Eigen::Matrix3d;
using Eigen::Vector3d;

// Berries hang in a band below the table edge; leaves sit just in front.
constexpr double kBerryBandLo = 0.80;
constexpr double kBerryBandHi = 0.95;
constexpr double kTableThickness = 0.04;
constexpr double kWallY = 1.9;

uint8_t jitter_channel(std::mt19937_64& rng, int base, int spread) {
  std::uniform_int_distribution<int> d(-spread, spread);
  return static_cast<uint8_t>(std::clamp(base + d(rng), 0, 255));
}

std::array<uint8_t, 3> jitter_color(std::mt19937_64& rng, std::array<int, 3> base,
                                    int spread) {
  return {jitter_channel(rng, base[0], spread), jitter_channel(rng, base[1], spread),
          jitter_channel(rng, base[2], spread)};
}

}  // namespace

Scene build_scene(const SceneConfig& config, uint64_t seed) {
  if (config.berry_scale_min <= 0 || config.berry_scale_max < config.berry_scale_min)
    throw std::invalid_argument("scene config: berry scale range must be positive");
  if (config.row_length <= 0)
    throw std::invalid_argument("scene config: row length must be positive");
  if (config.occluder_density < 0)
    throw std::invalid_argument("scene config: occluder density must be >= 0");
  if (config.camera_standoff <= 0)
    throw std::invalid_argument("scene config: camera standoff must be positive");

  const double row = config.row_length;
  // auto berry count: fixed density over the span clusters can occupy, so
  // the fruit-pixel share of a rendered set is row-length invariant
  const double usable = std::max(0.5, row - 2 * kRowMargin);
  const int berries =
      config.berry_count > 0 ? config.berry_count : std::max(1, int(usable * 8));

  Scene scene;
  scene.seed = seed;
  scene.row_length = row;
  std::mt19937_64 rng(seed);

  auto add = [&](ScenePrimitive p) { scene.primitives.push_back(std::move(p)); };

  // static background: ground, back wall, tabletop slab
  {
    ScenePrimitive ground;
    ground.kind = PrimKind::kPlane;
    ground.pos = Vector3d(row / 2, 0, 0);
    ground.albedo = {70, 62, 55};
    add(ground);

    ScenePrimitive wall;
    wall.kind = PrimKind::kPlane;
    wall.rot = AngleAxisd(-M_PI / 2, Vector3d::UnitX()).toRotationMatrix();
    wall.pos = Vector3d(row / 2, kWallY, 0);
    wall.albedo = {96, 96, 92};
    add(wall);

    ScenePrimitive table;
    table.kind = PrimKind::kBox;
    table.pos = Vector3d(row / 2, kBerryFrontY + 0.25, kTableTopZ - kTableThickness / 2);
    table.size = Vector3d(row / 2 + 0.3, 0.25, kTableThickness / 2);
    table.albedo = {126, 118, 108};
    add(table);
  }

  // growing bags on the tabletop
  for (double x = 0.4; x + 0.25 < row; x += 0.55) {
    ScenePrimitive bag;
    bag.kind = PrimKind::kBox;
    std::uniform_real_distribution<double> h(0.05, 0.07);
    const double half_h = h(rng);
    bag.pos = Vector3d(x, kBerryFrontY + 0.22, kTableTopZ + half_h);
    bag.size = Vector3d(0.22, 0.15, half_h);
    bag.albedo = jitter_color(rng, {225, 222, 214}, 12);
    add(bag);
  }

  // berry clusters with stems and leaf occluders
  std::uniform_real_distribution<double> cluster_x(kRowMargin, row - kRowMargin);
  std::uniform_real_distribution<double> off_x(-0.05, 0.05);
  std::uniform_real_distribution<double> off_y(-0.02, 0.02);
  std::uniform_real_distribution<double> scale(config.berry_scale_min,
                                               config.berry_scale_max);
  std::normal_distribution<double> radius_jitter(0.0, 0.06);
  std::uniform_real_distribution<double> tilt(0.0, 0.35);
  std::uniform_real_distribution<double> angle(0.0, 2 * M_PI);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const int cluster_size = 3;
  int emitted = 0;
  while (emitted < berries) {
    const double cx = cluster_x(rng);
    const double cz =
        kBerryBandLo + 0.3 * (kBerryBandHi - kBerryBandLo) +
        unit(rng) * 0.4 * (kBerryBandHi - kBerryBandLo);
    const int in_cluster = std::min(cluster_size, berries - emitted);

    for (int b = 0; b < in_cluster; ++b) {
      ScenePrimitive berry;
      berry.kind = PrimKind::kEllipsoid;
      berry.label = 1;
      const double s = scale(rng);
      for (int a = 0; a < 3; ++a)
        berry.size[a] = s * kBerryProportions[a] * std::exp(radius_jitter(rng));
      const double yaw = angle(rng), lean = tilt(rng), lean_dir = angle(rng);
      berry.rot = (AngleAxisd(yaw, Vector3d::UnitZ()) *
                   AngleAxisd(lean, Vector3d(std::cos(lean_dir), std::sin(lean_dir), 0)))
                      .toRotationMatrix();
      berry.pos = Vector3d(cx + off_x(rng), kBerryFrontY + off_y(rng),
                           std::clamp(cz + off_x(rng), kBerryBandLo, kBerryBandHi));
      berry.albedo = jitter_color(rng, {198, 32, 38}, 18);
      add(berry);

      ScenePrimitive stem;
      stem.kind = PrimKind::kCylinder;
      const double berry_top = berry.pos.z() + berry.size[2];
      const double table_bottom = kTableTopZ - kTableThickness;
      stem.size = Vector3d(0.0018, std::max(0.005, (table_bottom - berry_top) / 2), 0);
      stem.pos = Vector3d(berry.pos.x(), berry.pos.y(), (berry_top + table_bottom) / 2);
      stem.albedo = jitter_color(rng, {72, 118, 46}, 10);
      add(stem);
      ++emitted;
    }

    const int leaves = int(config.occluder_density * in_cluster / double(cluster_size) +
                           unit(rng));
    for (int l = 0; l < leaves; ++l) {
      ScenePrimitive leaf;
      leaf.kind = PrimKind::kBox;
      leaf.size = Vector3d(0.02 + 0.012 * unit(rng), 0.0012, 0.015 + 0.01 * unit(rng));
      leaf.rot = (AngleAxisd(angle(rng), Vector3d::UnitZ()) *
                  AngleAxisd(0.6 * (unit(rng) - 0.5), Vector3d::UnitX()))
                     .toRotationMatrix();
      leaf.pos = Vector3d(cx + 2.5 * off_x(rng), kBerryFrontY - 0.035 + off_y(rng),
                          cz + 0.05 * (unit(rng) - 0.2));
      leaf.albedo = jitter_color(rng, {52, 136, 58}, 16);
      add(leaf);
    }
  }

  for (const auto& p : scene.primitives) {
    if (p.kind == PrimKind::kPlane) continue;
    const double r = p.size.cwiseAbs().maxCoeff();
    scene.bounds.extend(p.pos + Vector3d::Constant(r));
    scene.bounds.extend(p.pos - Vector3d::Constant(r));
  }
  return scene;
}

SceneConfig load_scene_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open scene config: " + path.string());
  nlohmann::json j;
  is >> j;
  SceneConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "berry_count")
      cfg.berry_count = value.get<int>();
    else if (key == "berry_scale_min")
      cfg.berry_scale_min = value.get<double>();
    else if (key == "berry_scale_max")
      cfg.berry_scale_max = value.get<double>();
    else if (key == "row_length")
      cfg.row_length = value.get<double>();
    else if (key == "occluder_density")
      cfg.occluder_density = value.get<double>();
    else if (key == "camera_standoff")
      cfg.camera_standoff = value.get<double>();
    else
      throw std::runtime_error("unknown scene config key: " + key);
  }
  return cfg;
}

}  // namespace straw3d::sim
