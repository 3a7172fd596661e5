#include "straw3d/sim/dataset.hpp"

#include "straw3d/normals.hpp"

#include <cstdio>
#include <stdexcept>

namespace straw3d::sim {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

io::DatasetManifest generate_dataset(const SceneConfig& config,
                                     const geom::CameraIntrinsics& k,
                                     const DatasetParams& params,
                                     const std::filesystem::path& out_dir) {
  if (params.frames < 1)
    throw std::invalid_argument("generate_dataset: frame count must be >= 1");

  // the path stops every 20 cm with clear margins at both row ends
  const double needed_row = 0.2 * (params.frames - 1) + 2 * kRowMargin;
  SceneConfig cfg = config;
  if (cfg.row_length <= 0)
    cfg.row_length = needed_row;
  else if (cfg.row_length + 1e-9 < needed_row)
    throw std::invalid_argument("generate_dataset: row_length " +
                                std::to_string(cfg.row_length) + " m cannot fit " +
                                std::to_string(params.frames) + " poses; need >= " +
                                std::to_string(needed_row) + " m");

  const Scene scene = build_scene(cfg, params.seed);
  std::filesystem::create_directories(out_dir);

  io::DatasetManifest manifest;
  manifest.camera = k;
  manifest.seed = params.seed;

  io::CorruptionSettings corruption;
  corruption.reflectance = params.reflectance;
  corruption.noise_sigma = params.noise_sigma;
  corruption.reflectance_scale = params.reflectance_params.scale_c;
  corruption.reflectance_delta_v = params.reflectance_params.delta_v;

  uint64_t fruit_px = 0, valid_px = 0;
  for (int f = 0; f < params.frames; ++f) {
    const CameraPose pose = row_pose(scene, cfg, f);
    const RenderResult render = raycast(scene, k, pose);

    geom::DepthImage depth = render.depth;
    if (params.reflectance)
      depth = apply_reflectance(depth, render.normals, k, params.reflectance_params);
    if (params.noise_sigma > 0)
      depth = apply_noise(depth, {params.noise_sigma,
                                  splitmix64(params.seed ^ (0xf00d + uint64_t(f)))});

    const geom::OrganizedCloud cloud = geom::deproject(depth, k);
    const geom::NormalMap normals = geom::estimate_normals(cloud, 5);

    char id[24];
    std::snprintf(id, sizeof id, "frame_%04d", f);
    io::FrameRecord rec;
    rec.id = id;
    rec.depth_file = std::string(id) + ".depth.odpc";
    rec.label_file = std::string(id) + ".labels.olbl";
    rec.color_file = std::string(id) + ".color.ppm";
    rec.normals_file = std::string(id) + ".normals.onrm";
    rec.camera_position = pose.pos;
    rec.camera_rotation = pose.rot;
    rec.corruption = corruption;

    io::write_depth(out_dir / rec.depth_file, depth);
    io::write_labels(out_dir / rec.label_file, render.labels);
    io::write_ppm(out_dir / rec.color_file, render.color);
    io::write_normals(out_dir / rec.normals_file, normals);
    manifest.frames.push_back(std::move(rec));

    for (size_t i = 0; i < render.labels.labels.size(); ++i) {
      if (render.labels.labels[i] == LabelImage::kInvalid) continue;
      ++valid_px;
      fruit_px += render.labels.labels[i] == 1;
    }
  }

  manifest.fruit_fraction = valid_px ? double(fruit_px) / double(valid_px) : 0.0;
  io::save_manifest(out_dir, manifest);
  return manifest;
}

}  // namespace straw3d::sim
