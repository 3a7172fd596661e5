#pragma once

#include "straw3d/camera.hpp"

namespace straw3d::geom {

// Covariance statistics of the valid points inside a clipped window,
// queried in O(1) from summed-area tables.
class WindowCovariance {
 public:
  explicit WindowCovariance(const OrganizedCloud& cloud);

  // Accumulated count, mean and covariance of valid points in the
  // window x window box centered at (u,v), clipped at image borders.
  // Returns the number of valid points; mean/cov are untouched if < 1.
  int query(int u, int v, int window, Eigen::Vector3d& mean, Eigen::Matrix3d& cov) const;

  int width() const { return width_; }
  int height() const { return height_; }

 private:
  int width_ = 0, height_ = 0;
  Eigen::Vector3d shift_ = Eigen::Vector3d::Zero();
  // 10 channels: count, x, y, z, xx, xy, xz, yy, yz, zz.
  std::vector<double> sat_;  // (width+1) * (height+1) * 10
};

// Eigenvalues of a symmetric 3x3 matrix, ascending. Closed form (Cardano).
Eigen::Vector3d symmetric_eigenvalues(const Eigen::Matrix3d& m);

// Unit eigenvector for the given eigenvalue of a symmetric 3x3 matrix.
// Returns false if the matrix is too degenerate to pick a direction.
bool symmetric_eigenvector(const Eigen::Matrix3d& m, double eigenvalue, Eigen::Vector3d& out);

// Per-pixel surface normals from the smallest-eigenvalue direction of the
// local covariance, oriented toward the camera (n . p <= 0). Pixels with
// fewer than 3 valid neighbors or rank-deficient covariance are invalid.
// window must be odd and >= 3.
NormalMap estimate_normals(const OrganizedCloud& cloud, int window = 5);

// Normal change rate: N = min(e1,e2,e3) / (e1+e2+e3) of the local
// covariance eigenvalues, in [0, 1/3]; zero-variance neighborhoods give 0.
ScalarField normal_change_rate(const OrganizedCloud& cloud, int window = 5);

}  // namespace straw3d::geom
