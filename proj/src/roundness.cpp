#include "straw3d/roundness.hpp"

#include "straw3d/mvee.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace straw3d::shape {

namespace {

// Deterministic sign: largest-absolute component made positive.
void fix_sign(Eigen::Vector3d& v) {
  int k = 0;
  v.cwiseAbs().maxCoeff(&k);
  if (v[k] < 0.0) v = -v;
}

}  // namespace

Eigen::Matrix3d align_longest_axis_rotation(const std::vector<Eigen::Vector3d>& points) {
  if (points.size() < 3)
    throw std::invalid_argument("align_longest_axis: need at least 3 points");

  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector3d d = p - centroid;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(points.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  const Eigen::Vector3d ev = es.eigenvalues();  // ascending
  if (!(ev[2] > 0.0) || ev[1] <= 1e-12 * ev[2])
    throw std::invalid_argument("align_longest_axis: rank-deficient (collinear) input");

  Eigen::Vector3d w = es.eigenvectors().col(2);  // largest variance -> +z
  long above = 0, below = 0;
  for (const auto& p : points) {
    const double s = (p - centroid).dot(w);
    if (s > 0.0)
      ++above;
    else if (s < 0.0)
      ++below;
  }
  if (below > above)
    w = -w;
  else if (below == above)
    fix_sign(w);

  Eigen::Vector3d v = es.eigenvectors().col(1);
  v -= v.dot(w) * w;
  v.normalize();
  fix_sign(v);

  Eigen::Matrix3d rot;
  rot.row(0) = v.cross(w);  // right-handed completion, det = +1
  rot.row(1) = v;
  rot.row(2) = w;
  return rot;
}

std::vector<Eigen::Vector3d> align_longest_axis(const std::vector<Eigen::Vector3d>& points) {
  const Eigen::Matrix3d rot = align_longest_axis_rotation(points);
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  std::vector<Eigen::Vector3d> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(rot * (p - centroid));
  return out;
}

RoundnessResult roundness(const std::vector<Eigen::Vector3d>& points, View view, double margin) {
  if (margin < 0.0) throw std::invalid_argument("roundness: margin must be >= 0");

  const auto aligned = align_longest_axis(points);
  // tighter fit than the mvee default keeps on-surface samples at delta ~ 1e-9
  const Ellipsoid e = mvee(aligned, 1e-9, 20000);
  const double mean_radius = std::cbrt(e.radii[0] * e.radii[1] * e.radii[2]);

  RoundnessResult out;
  double sum = 0.0;
  for (const auto& p : aligned) {
    if (view == View::half && p.z() > e.center.z()) continue;
    const Eigen::Vector3d q = e.rotation.transpose() * (p - e.center);
    const double s = q.cwiseQuotient(e.radii).norm();
    // |q - q/s| collapses to |q|*|1 - 1/s|; q at the exact center has no ray
    // direction, so charge the nearest possible surface distance
    double delta = s > 0.0 ? q.norm() * std::abs(1.0 - 1.0 / s) : e.radii[0];
    if (delta <= margin) delta = 0.0;
    out.deltas.push_back(delta);
    sum += delta;
  }
  out.n = out.deltas.size();
  if (out.n == 0)
    throw std::invalid_argument("roundness: no points in the evaluated hemisphere");
  out.r = 1.0 - sum / (static_cast<double>(out.n) * mean_radius);
  return out;
}

}  // namespace straw3d::shape
