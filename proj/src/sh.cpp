#include "straw3d/sh.hpp"

#include <Eigen/QR>

#include <cmath>
#include <numbers>

namespace straw3d::shape {

namespace {

// Associated Legendre P_l^m(x) without the Condon-Shortley phase, m >= 0.
double assoc_legendre(int l, int m, double x) {
  double pmm = 1.0;
  if (m > 0) {
    const double s = std::sqrt(std::max(0.0, (1.0 - x) * (1.0 + x)));
    double fact = 1.0;
    for (int i = 0; i < m; ++i) {
      pmm *= fact * s;
      fact += 2.0;
    }
  }
  if (l == m) return pmm;
  double prev = pmm;
  double cur = x * (2.0 * m + 1.0) * pmm;
  for (int ll = m + 2; ll <= l; ++ll) {
    const double next = ((2.0 * ll - 1.0) * x * cur - (ll + m - 1.0) * prev) / (ll - m);
    prev = cur;
    cur = next;
  }
  return cur;
}

}  // namespace

double sh_basis(int l, int m, double theta, double phi) {
  const int am = std::abs(m);
  double ratio = 1.0;  // (l-|m|)! / (l+|m|)!
  for (int i = l - am + 1; i <= l + am; ++i) ratio /= static_cast<double>(i);
  const double k = std::sqrt((2.0 * l + 1.0) / (4.0 * std::numbers::pi) * ratio);
  const double p = k * assoc_legendre(l, am, std::cos(theta));
  if (m > 0) return std::numbers::sqrt2 * p * std::cos(am * phi);
  if (m < 0) return std::numbers::sqrt2 * p * std::sin(am * phi);
  return p;
}

ShSpectrum sh_spectrum(const std::vector<Eigen::Vector3d>& points, int max_degree,
                       int theta_bins, int phi_bins) {
  constexpr double pi = std::numbers::pi;
  if (max_degree < 0) throw std::invalid_argument("sh_spectrum: max_degree must be >= 0");
  if (theta_bins < 1 || phi_bins < 1)
    throw std::invalid_argument("sh_spectrum: grid must have at least one bin per axis");
  const int num_coeff = (max_degree + 1) * (max_degree + 1);
  const int num_bins = theta_bins * phi_bins;
  if (num_bins < num_coeff)
    throw std::invalid_argument("sh_spectrum: grid too coarse for the requested degree");
  if (points.empty()) throw std::invalid_argument("sh_spectrum: empty point set");

  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  std::vector<double> radius_sum(num_bins, 0.0);
  std::vector<long> count(num_bins, 0);
  for (const auto& p : points) {
    const Eigen::Vector3d d = p - centroid;
    const double r = d.norm();
    if (r <= 0.0) continue;  // no direction for a point at the centroid
    const double theta = std::acos(std::clamp(d.z() / r, -1.0, 1.0));
    double phi = std::atan2(d.y(), d.x());
    if (phi < 0.0) phi += 2.0 * pi;
    const int it = std::min(theta_bins - 1, static_cast<int>(theta / pi * theta_bins));
    const int ip = std::min(phi_bins - 1, static_cast<int>(phi / (2.0 * pi) * phi_bins));
    radius_sum[it * phi_bins + ip] += r;
    ++count[it * phi_bins + ip];
  }

  int filled = 0;
  for (long c : count)
    if (c > 0) ++filled;
  const double empty_fraction = 1.0 - static_cast<double>(filled) / num_bins;
  if (empty_fraction > 0.5)
    throw InsufficientCoverageError(
        "sh_spectrum: insufficient coverage (" +
            std::to_string(static_cast<int>(std::lround(empty_fraction * 100.0))) +
            "% of angular bins empty)",
        empty_fraction);

  Eigen::MatrixXd basis(filled, num_coeff);
  Eigen::VectorXd target(filled);
  int row = 0;
  for (int it = 0; it < theta_bins; ++it) {
    for (int ip = 0; ip < phi_bins; ++ip) {
      const int b = it * phi_bins + ip;
      if (count[b] == 0) continue;
      const double theta = (it + 0.5) * pi / theta_bins;
      const double phi = (ip + 0.5) * 2.0 * pi / phi_bins;
      for (int l = 0; l <= max_degree; ++l)
        for (int m = -l; m <= l; ++m) basis(row, l * (l + 1) + m) = sh_basis(l, m, theta, phi);
      target(row) = radius_sum[b] / static_cast<double>(count[b]);
      ++row;
    }
  }

  const Eigen::VectorXd c = basis.colPivHouseholderQr().solve(target);

  ShSpectrum out;
  out.max_degree = max_degree;
  out.coefficients.assign(c.data(), c.data() + num_coeff);
  out.degree_power.assign(max_degree + 1, 0.0);
  for (int l = 0; l <= max_degree; ++l)
    for (int m = -l; m <= l; ++m) out.degree_power[l] += c[l * (l + 1) + m] * c[l * (l + 1) + m];
  return out;
}

}  // namespace straw3d::shape
