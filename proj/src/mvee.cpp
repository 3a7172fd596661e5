#include "straw3d/mvee.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace straw3d::shape {

Eigen::Matrix3d Ellipsoid::shape_matrix() const {
  Eigen::Vector3d inv2 = radii.cwiseProduct(radii).cwiseInverse();
  return rotation * inv2.asDiagonal() * rotation.transpose();
}

bool Ellipsoid::contains(const Eigen::Vector3d& p, double inflation) const {
  const Eigen::Vector3d q = rotation.transpose() * (p - center);
  const Eigen::Vector3d s = q.cwiseQuotient(radii * inflation);
  return s.squaredNorm() <= 1.0;
}

Ellipsoid mvee(const std::vector<Eigen::Vector3d>& points, double tolerance,
               int max_iterations) {
  const int n = static_cast<int>(points.size());
  if (n < 4) throw std::invalid_argument("mvee: need at least 4 points");
  if (tolerance <= 0) throw std::invalid_argument("mvee: tolerance must be positive");
  constexpr double d = 4.0;  // lifted dimension

  // Lifted points q = (p, 1); weights u on the probability simplex.
  Eigen::Matrix<double, 4, Eigen::Dynamic> q(4, n);
  for (int i = 0; i < n; ++i) q.col(i) << points[i], 1.0;

  Eigen::VectorXd u = Eigen::VectorXd::Constant(n, 1.0 / n);
  auto weighted_moment = [&] {
    Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
    for (int i = 0; i < n; ++i) m.noalias() += u[i] * q.col(i) * q.col(i).transpose();
    return m;
  };

  Eigen::Matrix4d m = weighted_moment();
  Eigen::FullPivLU<Eigen::Matrix4d> lu(m);
  if (!lu.isInvertible())
    throw std::invalid_argument("mvee: rank-deficient point set (coplanar or collinear)");
  Eigen::Matrix4d minv = lu.inverse();

  Eigen::VectorXd kappa(n);
  for (int iter = 0; iter < max_iterations; ++iter) {
    for (int i = 0; i < n; ++i) kappa[i] = q.col(i).dot(minv * q.col(i));

    int add = 0, away = -1;
    double k_max = -1, k_min = std::numeric_limits<double>::max();
    for (int i = 0; i < n; ++i) {
      if (kappa[i] > k_max) { k_max = kappa[i]; add = i; }
      if (u[i] > 1e-12 && kappa[i] < k_min) { k_min = kappa[i]; away = i; }
    }
    if (k_max <= d * (1 + tolerance) && k_min >= d * (1 - tolerance)) break;

    int j = add;
    double t = 0;
    bool do_add = k_max - d >= d - k_min || away < 0;
    if (!do_add) {
      // push weight away from an over-weighted support point
      const double t_opt = (d - k_min) / (d * (k_min - 1.0));
      if (t_opt > 0) {
        j = away;
        t = -std::min(t_opt, u[j] / std::max(1.0 - u[j], 1e-300));
      } else {
        do_add = true;  // no descent in the away direction
      }
    }
    if (do_add) {
      // pull weight toward the most-violating point
      t = (k_max - d) / (d * (k_max - 1.0));
    }
    if (!std::isfinite(t) || t == 0.0) break;

    // Sherman-Morrison update of minv for m' = (1-t) m + t qj qj'.
    const Eigen::Vector4d mq = minv * q.col(j);
    const double k_j = q.col(j).dot(mq);
    minv = (minv - (t / (1.0 - t + t * k_j)) * mq * mq.transpose()) / (1.0 - t);
    u *= (1.0 - t);
    u[j] += t;

    if ((iter + 1) % 64 == 0) minv = weighted_moment().inverse();  // drift control
  }

  const Eigen::Vector3d c = [&] {
    Eigen::Vector3d s = Eigen::Vector3d::Zero();
    for (int i = 0; i < n; ++i) s += u[i] * points[i];
    return s;
  }();
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (int i = 0; i < n; ++i)
    scatter.noalias() += u[i] * (points[i] - c) * (points[i] - c).transpose();

  Eigen::FullPivLU<Eigen::Matrix3d> slu(scatter);
  if (!slu.isInvertible())
    throw std::invalid_argument("mvee: rank-deficient point set (coplanar or collinear)");
  Eigen::Matrix3d a = slu.inverse() / 3.0;

  // Rescale so the farthest point sits exactly on the surface.
  double worst = 0;
  for (int i = 0; i < n; ++i)
    worst = std::max(worst, (points[i] - c).dot(a * (points[i] - c)));
  a /= worst;

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(a);
  if (es.eigenvalues()[0] <= 0)
    throw std::invalid_argument("mvee: degenerate shape matrix");

  Ellipsoid e;
  e.center = c;
  for (int k = 0; k < 3; ++k) {
    e.radii[k] = 1.0 / std::sqrt(es.eigenvalues()[2 - k]);  // ascending radii
    e.rotation.col(k) = es.eigenvectors().col(2 - k);
  }
  if (e.rotation.determinant() < 0) e.rotation.col(2) *= -1.0;
  return e;
}

Eigen::Vector3d normalized_radii(const Ellipsoid& e) {
  Eigen::Vector3d r = e.radii;
  std::sort(r.data(), r.data() + 3);
  return r / r.norm();
}

}  // namespace straw3d::shape
