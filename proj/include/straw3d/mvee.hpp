#pragma once

#include <Eigen/Core>

#include <vector>

namespace straw3d::shape {

// p = center + rotation * diag(radii) * s with |s| = 1 sweeps the surface.
// radii sorted ascending; rotation orthonormal with det +1.
struct Ellipsoid {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d radii = Eigen::Vector3d::Zero();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();

  // (p-c)' A (p-c) <= 1 inside, in world coordinates.
  Eigen::Matrix3d shape_matrix() const;
  bool contains(const Eigen::Vector3d& p, double inflation = 1.0) const;
};

// Minimum-volume enclosing ellipsoid, Khachiyan dual updates with away
// steps. All points are inside the result (the final shape is rescaled to
// the farthest point). Throws std::invalid_argument on fewer than 4 points
// or rank-deficient (coplanar/collinear) input.
Ellipsoid mvee(const std::vector<Eigen::Vector3d>& points, double tolerance = 1e-6,
               int max_iterations = 10000);

// Radii sorted ascending, divided by their Euclidean norm.
Eigen::Vector3d normalized_radii(const Ellipsoid& e);

}  // namespace straw3d::shape
