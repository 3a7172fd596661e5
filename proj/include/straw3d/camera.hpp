#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace straw3d::geom {

struct CameraIntrinsics {
  double fx = 0, fy = 0;   // focal lengths, pixels
  double cx = 0, cy = 0;   // principal point, pixels
  int width = 0, height = 0;
  double depth_min = 0, depth_max = 0;  // valid sensing range, meters

  bool valid() const {
    return fx > 0 && fy > 0 && cx >= 0 && cx < width && cy >= 0 && cy < height &&
           depth_min > 0 && depth_min < depth_max;
  }
};

// Symmetric pinhole camera with a given horizontal field of view.
CameraIntrinsics make_intrinsics(int width, int height, double hfov_deg, double depth_min,
                                 double depth_max);

struct DepthImage {
  int width = 0, height = 0;
  std::vector<float> values;  // meters, row-major; 0 = no return

  DepthImage() = default;
  DepthImage(int w, int h) : width(w), height(h), values(static_cast<size_t>(w) * h, 0.f) {}
  float& at(int u, int v) { return values[static_cast<size_t>(v) * width + u]; }
  float at(int u, int v) const { return values[static_cast<size_t>(v) * width + u]; }
};

// Per-pixel 3D points on the sensor grid. Camera frame: +z forward,
// +x right, +y down. Invalid pixels store (0,0,0).
struct OrganizedCloud {
  int width = 0, height = 0;
  std::vector<Eigen::Vector3f> points;
  std::vector<uint8_t> valid;

  OrganizedCloud() = default;
  OrganizedCloud(int w, int h)
      : width(w), height(h), points(static_cast<size_t>(w) * h, Eigen::Vector3f::Zero()),
        valid(static_cast<size_t>(w) * h, 0) {}
  size_t idx(int u, int v) const { return static_cast<size_t>(v) * width + u; }
};

struct NormalMap {
  int width = 0, height = 0;
  std::vector<Eigen::Vector3d> normals;  // unit, oriented toward the camera
  std::vector<uint8_t> valid;

  NormalMap() = default;
  NormalMap(int w, int h)
      : width(w), height(h), normals(static_cast<size_t>(w) * h, Eigen::Vector3d::Zero()),
        valid(static_cast<size_t>(w) * h, 0) {}
};

struct ScalarField {
  int width = 0, height = 0;
  std::vector<double> values;
  std::vector<uint8_t> valid;

  ScalarField() = default;
  ScalarField(int w, int h)
      : width(w), height(h), values(static_cast<size_t>(w) * h, 0.0),
        valid(static_cast<size_t>(w) * h, 0) {}
};

// Pinhole de-projection: x=(u-cx)z/fx, y=(v-cy)z/fy. Zero depth -> invalid.
// Throws std::invalid_argument on dimension mismatch.
OrganizedCloud deproject(const DepthImage& depth, const CameraIntrinsics& k);

}  // namespace straw3d::geom
