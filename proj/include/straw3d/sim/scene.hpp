#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace straw3d::sim {

enum class PrimKind { kEllipsoid, kPlane, kBox, kCylinder };

// One scene element. `rot`/`pos` place the local frame in the world; `size`
// is per kind: ellipsoid radii, box half extents, cylinder (radius,
// half length, unused). Planes pass through `pos` with local +z as normal.
struct ScenePrimitive {
  PrimKind kind = PrimKind::kEllipsoid;
  Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
  Eigen::Vector3d pos = Eigen::Vector3d::Zero();
  Eigen::Vector3d size = Eigen::Vector3d::Ones();
  uint8_t label = 0;  // 0 background, 1 fruit (ellipsoids only)
  std::array<uint8_t, 3> albedo{128, 128, 128};
};

// Tabletop strawberry row. World frame: z up, the row runs along x, the
// camera path faces +y. Berries hang as ellipsoid clusters below the front
// table edge, partially occluded by leaf-proxy boxes; growing bags sit on
// the table and a back wall bounds the sensing range.
struct Scene {
  std::vector<ScenePrimitive> primitives;
  Eigen::AlignedBox3d bounds;
  uint64_t seed = 0;
  double row_length = 0.0;  // meters along x
};

// Layout anchors shared by scene generation and the camera path.
inline constexpr double kTableTopZ = 1.0;       // tabletop surface height
inline constexpr double kBerryFrontY = 0.90;    // berry curtain plane
inline constexpr double kCameraHeightZ = 0.875; // camera center height
inline constexpr double kRowMargin = 0.8;       // clear row ends, meters

struct SceneConfig {
  int berry_count = 0;              // 0 = auto (10 per meter of row)
  double berry_scale_min = 0.035;   // overall berry scale draw, meters
  double berry_scale_max = 0.055;
  double row_length = 0.0;          // meters; 0 = derived from frame count
  double occluder_density = 1.0;    // leaf boxes per berry cluster
  double camera_standoff = 0.45;    // camera distance to the berry curtain
};

// Mean berry radii proportions; the triple has unit Euclidean norm so
// fitted-ellipsoid statistics compare directly against it.
inline constexpr std::array<double, 3> kBerryProportions{0.42, 0.55, 0.72};

// Deterministic scene synthesis. Berry radii are the configured scale times
// kBerryProportions with per-axis jitter; berries cluster along the row in
// groups of ~3 with stems up to the table and leaf boxes in front.
// Throws std::invalid_argument on non-positive sizes or row length.
Scene build_scene(const SceneConfig& config, uint64_t seed);

// Reads a JSON scene configuration; absent keys keep defaults. Unknown keys
// are rejected.
SceneConfig load_scene_config(const std::filesystem::path& path);

}  // namespace straw3d::sim
