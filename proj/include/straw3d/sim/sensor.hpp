#pragma once

#include "straw3d/camera.hpp"
#include "straw3d/image.hpp"
#include "straw3d/sim/scene.hpp"

#include <cstdint>
#include <vector>

namespace straw3d::sim {

// Camera-to-world pose: world = rot * cam + pos. Camera frame follows the
// projection convention (+z forward, +x right, +y down).
struct CameraPose {
  Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
  Eigen::Vector3d pos = Eigen::Vector3d::Zero();
};

// A pose on the acquisition path: stops every 20 cm along the row at fixed
// standoff from the berry curtain, facing it.
CameraPose row_pose(const Scene& scene, const SceneConfig& config, int frame_index);

struct RenderResult {
  geom::DepthImage depth;    // meters along the optical axis; 0 = no return
  LabelImage labels;         // 0 background, 1 fruit, 255 invalid
  geom::NormalMap normals;   // analytic surface normals, camera frame,
                             // oriented toward the camera
  ColorImage color;          // shaded albedo; black where invalid
  std::vector<int32_t> instance;  // hit primitive index, -1 where invalid
};

// Nearest-intersection ray casting through every pixel. Depth is the
// z-coordinate of the hit in the camera frame; hits outside
// [depth_min, depth_max] are dropped (no return). Rays pass through the
// integer pixel grid so deprojecting the depth image reproduces the hit
// points exactly.
RenderResult raycast(const Scene& scene, const geom::CameraIntrinsics& k,
                     const CameraPose& pose);

// Infra-red saturation distortion on shiny surfaces. Valid params:
// delta_v >= 0, scale_c > 0, d_min < d_max.
struct ReflectanceParams {
  double delta_v = 0.2;   // dimensionless brightness step
  double scale_c = 0.07;  // meters; calibrates delta_v to displacement
  double d_min = 0.3;     // falloff endpoints, meters
  double d_max = 2.0;
};

// Displacement magnitude (meters) for a surface point: theta in [0, pi/2]
// is the angle between the camera-oriented normal and the direction from
// the point to the camera center, d the point's range. The angular factor
// (1 - (theta + pi/2)/pi) peaks at 0.5 on camera-facing surfaces and
// vanishes at grazing; the distance factor falls linearly to zero at d_max.
double reflectance_displacement(double theta, double d, const ReflectanceParams& p);

// Moves every valid pixel's point along its viewing ray toward the camera
// by the displacement; depth clamped to >= depth_min. Labels and the
// normal map are not touched by corruption. Throws std::invalid_argument
// on misaligned inputs or invalid params.
geom::DepthImage apply_reflectance(const geom::DepthImage& depth,
                                   const geom::NormalMap& normals,
                                   const geom::CameraIntrinsics& k,
                                   const ReflectanceParams& p);

struct NoiseParams {
  double sigma = 0.005;  // meters
  uint64_t seed = 0;
};

// Adds an independent N(0, sigma^2) draw to every valid pixel, kept
// positive so no pixel changes validity. sigma = 0 returns the input
// bit-identically; a fixed seed gives identical output.
geom::DepthImage apply_noise(const geom::DepthImage& depth, const NoiseParams& p);

}  // namespace straw3d::sim
