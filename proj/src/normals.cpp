#include "straw3d/normals.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace straw3d::geom {

namespace {

constexpr int kChannels = 10;  // count, x, y, z, xx, xy, xz, yy, yz, zz

void check_window(const OrganizedCloud& cloud, int window) {
  if (window < 3 || window % 2 == 0)
    throw std::invalid_argument("normal estimation window must be odd and >= 3");
  if (cloud.width <= 0 || cloud.height <= 0)
    throw std::invalid_argument("empty cloud");
}

}  // namespace

WindowCovariance::WindowCovariance(const OrganizedCloud& cloud)
    : width_(cloud.width), height_(cloud.height) {
  const size_t stride = static_cast<size_t>(width_ + 1) * kChannels;
  sat_.assign(stride * (height_ + 1), 0.0);

  // Shift coordinates by the global mean before accumulating; the covariance
  // is shift invariant and the summed squares lose far less precision.
  Eigen::Vector3d g = Eigen::Vector3d::Zero();
  size_t n = 0;
  for (size_t i = 0; i < cloud.points.size(); ++i)
    if (cloud.valid[i]) {
      g += cloud.points[i].cast<double>();
      ++n;
    }
  if (n > 0) g /= static_cast<double>(n);
  shift_ = g;

  for (int v = 0; v < height_; ++v) {
    double* row = &sat_[(v + 1) * stride];
    const double* prev = &sat_[v * stride];
    for (int u = 0; u < width_; ++u) {
      double cell[kChannels] = {0};
      const size_t i = static_cast<size_t>(v) * width_ + u;
      if (cloud.valid[i]) {
        const Eigen::Vector3d p = cloud.points[i].cast<double>() - g;
        cell[0] = 1;
        cell[1] = p.x();
        cell[2] = p.y();
        cell[3] = p.z();
        cell[4] = p.x() * p.x();
        cell[5] = p.x() * p.y();
        cell[6] = p.x() * p.z();
        cell[7] = p.y() * p.y();
        cell[8] = p.y() * p.z();
        cell[9] = p.z() * p.z();
      }
      double* out = &row[(u + 1) * kChannels];
      const double* left = &row[u * kChannels];
      const double* up = &prev[(u + 1) * kChannels];
      const double* diag = &prev[u * kChannels];
      for (int c = 0; c < kChannels; ++c) out[c] = cell[c] + left[c] + up[c] - diag[c];
    }
  }
}

int WindowCovariance::query(int u, int v, int window, Eigen::Vector3d& mean,
                            Eigen::Matrix3d& cov) const {
  const int r = window / 2;
  const int u0 = std::max(0, u - r), u1 = std::min(width_ - 1, u + r);
  const int v0 = std::max(0, v - r), v1 = std::min(height_ - 1, v + r);
  const size_t stride = static_cast<size_t>(width_ + 1) * kChannels;
  const double* a = &sat_[(v1 + 1) * stride + (u1 + 1) * kChannels];
  const double* b = &sat_[v0 * stride + (u1 + 1) * kChannels];
  const double* c = &sat_[(v1 + 1) * stride + u0 * kChannels];
  const double* d = &sat_[v0 * stride + u0 * kChannels];

  double s[kChannels];
  for (int i = 0; i < kChannels; ++i) s[i] = a[i] - b[i] - c[i] + d[i];

  const int n = static_cast<int>(std::llround(s[0]));
  if (n < 1) return n;

  const double inv = 1.0 / n;
  const Eigen::Vector3d m(s[1] * inv, s[2] * inv, s[3] * inv);
  mean = m + shift_;
  cov(0, 0) = s[4] * inv - m.x() * m.x();
  cov(0, 1) = cov(1, 0) = s[5] * inv - m.x() * m.y();
  cov(0, 2) = cov(2, 0) = s[6] * inv - m.x() * m.z();
  cov(1, 1) = s[7] * inv - m.y() * m.y();
  cov(1, 2) = cov(2, 1) = s[8] * inv - m.y() * m.z();
  cov(2, 2) = s[9] * inv - m.z() * m.z();
  return n;
}

Eigen::Vector3d symmetric_eigenvalues(const Eigen::Matrix3d& m) {
  const double p1 = m(0, 1) * m(0, 1) + m(0, 2) * m(0, 2) + m(1, 2) * m(1, 2);
  if (p1 == 0.0) {
    Eigen::Vector3d e(m(0, 0), m(1, 1), m(2, 2));
    std::sort(e.data(), e.data() + 3);
    return e;
  }
  const double q = m.trace() / 3.0;
  const double p2 = (m(0, 0) - q) * (m(0, 0) - q) + (m(1, 1) - q) * (m(1, 1) - q) +
                    (m(2, 2) - q) * (m(2, 2) - q) + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  Eigen::Matrix3d b = (m - q * Eigen::Matrix3d::Identity()) / p;
  double r = b.determinant() / 2.0;
  r = std::clamp(r, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double e_max = q + 2.0 * p * std::cos(phi);
  const double e_min = q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0);
  return {e_min, 3.0 * q - e_max - e_min, e_max};
}

bool symmetric_eigenvector(const Eigen::Matrix3d& m, double eigenvalue, Eigen::Vector3d& out) {
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale <= 0.0) return false;
  const Eigen::Matrix3d a = m / scale - (eigenvalue / scale) * Eigen::Matrix3d::Identity();
  const Eigen::Vector3d c01 = a.row(0).cross(a.row(1));
  const Eigen::Vector3d c02 = a.row(0).cross(a.row(2));
  const Eigen::Vector3d c12 = a.row(1).cross(a.row(2));
  const double n01 = c01.squaredNorm(), n02 = c02.squaredNorm(), n12 = c12.squaredNorm();
  const Eigen::Vector3d* best = &c01;
  double best_n = n01;
  if (n02 > best_n) { best = &c02; best_n = n02; }
  if (n12 > best_n) { best = &c12; best_n = n12; }
  if (best_n < 1e-24) return false;
  out = *best / std::sqrt(best_n);
  return true;
}

namespace {

// Closed-form eigenvalues land within ~1e-8 of the truth; two rounds of
// Rayleigh-quotient refinement push the smallest eigenpair to solver
// precision (the quotient squares the eigenvector error).
bool smallest_eigenpair(const Eigen::Matrix3d& cov, double& lambda, Eigen::Vector3d& vec) {
  const Eigen::Vector3d e = symmetric_eigenvalues(cov);
  lambda = e[0];
  if (!symmetric_eigenvector(cov, lambda, vec)) return false;
  for (int it = 0; it < 2; ++it) {
    lambda = vec.dot(cov * vec);
    Eigen::Vector3d refined;
    if (!symmetric_eigenvector(cov, lambda, refined)) break;
    vec = refined;
  }
  return true;
}

}  // namespace

NormalMap estimate_normals(const OrganizedCloud& cloud, int window) {
  check_window(cloud, window);
  const WindowCovariance stats(cloud);
  NormalMap map(cloud.width, cloud.height);
  for (int v = 0; v < cloud.height; ++v) {
    for (int u = 0; u < cloud.width; ++u) {
      const size_t i = cloud.idx(u, v);
      if (!cloud.valid[i]) continue;
      Eigen::Vector3d mean;
      Eigen::Matrix3d cov;
      if (stats.query(u, v, window, mean, cov) < 3) continue;
      const Eigen::Vector3d e = symmetric_eigenvalues(cov);
      // rank < 2 (collinear neighborhood) leaves no stable normal direction
      if (e[1] <= 1e-12 * std::max(e[2], 0.0)) continue;
      double lambda;
      Eigen::Vector3d n;
      if (!smallest_eigenpair(cov, lambda, n)) continue;
      const Eigen::Vector3d p = cloud.points[i].cast<double>();
      if (n.dot(p) > 0) n = -n;
      map.normals[i] = n;
      map.valid[i] = 1;
    }
  }
  return map;
}

ScalarField normal_change_rate(const OrganizedCloud& cloud, int window) {
  check_window(cloud, window);
  const WindowCovariance stats(cloud);
  ScalarField field(cloud.width, cloud.height);
  for (int v = 0; v < cloud.height; ++v) {
    for (int u = 0; u < cloud.width; ++u) {
      const size_t i = cloud.idx(u, v);
      if (!cloud.valid[i]) continue;
      Eigen::Vector3d mean;
      Eigen::Matrix3d cov;
      if (stats.query(u, v, window, mean, cov) < 3) continue;
      const Eigen::Vector3d e = symmetric_eigenvalues(cov);
      const double trace = e.sum();
      const double n = trace > 0.0 ? std::clamp(e[0] / trace, 0.0, 1.0 / 3.0) : 0.0;
      field.values[i] = n;
      field.valid[i] = 1;
    }
  }
  return field;
}

}  // namespace straw3d::geom
