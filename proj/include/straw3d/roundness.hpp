#pragma once

#include <Eigen/Core>

#include <vector>

namespace straw3d::shape {

enum class View { full, half };

struct RoundnessResult {
  double r = 1.0;                // 1 means a perfect ellipsoid
  std::vector<double> deltas;    // per evaluated point, meters, clamped
  std::size_t n = 0;             // number of points evaluated
};

// Rotation that maps the largest-variance principal axis to +z. Sign rule:
// the hemisphere holding more points gets +z; ties and the remaining axes
// are fixed by a largest-component-positive rule so the result is
// deterministic. det = +1. Throws std::invalid_argument on collinear input.
Eigen::Matrix3d align_longest_axis_rotation(const std::vector<Eigen::Vector3d>& points);

// Convenience: centroid-centered points rotated by align_longest_axis_rotation.
std::vector<Eigen::Vector3d> align_longest_axis(const std::vector<Eigen::Vector3d>& points);

// Shape deviation score: align, fit the enclosing ellipsoid, measure each
// point's distance along its center ray to the ellipsoid surface, zero out
// distances within `margin` (precision margin; filters sensor noise), and
// return R = 1 - sum(deltas) / (n * (abc)^(1/3)). view = half evaluates only
// the hemisphere z' <= 0 relative to the ellipsoid center in the aligned
// frame (single-view sensor data covers about half the fruit).
RoundnessResult roundness(const std::vector<Eigen::Vector3d>& points, View view = View::full,
                          double margin = 0.001);

}  // namespace straw3d::shape
