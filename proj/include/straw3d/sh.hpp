#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <vector>

namespace straw3d::shape {

// Per-degree decomposition of a star-shaped surface's radial function about
// its centroid. coefficients holds real orthonormal harmonics indexed
// l*(l+1)+m; degree_power[l] = sum_m coefficients^2 (the rotation-invariant
// spectral profile used as a shape-noise signature).
struct ShSpectrum {
  int max_degree = 10;
  std::vector<double> coefficients;  // (L+1)^2 entries, meters
  std::vector<double> degree_power;  // L+1 entries, meters^2
};

// Thrown when too few angular bins receive points (e.g. single-view domes).
struct InsufficientCoverageError : std::runtime_error {
  InsufficientCoverageError(const std::string& what, double fraction)
      : std::runtime_error(what), empty_fraction(fraction) {}
  double empty_fraction;
};

// Real orthonormal spherical harmonic Y_lm (common real-form table signs,
// no Condon-Shortley phase). theta is the polar angle from +z, phi azimuth.
double sh_basis(int l, int m, double theta, double phi);

// Radial function r(theta, phi) about the centroid, sampled by
// nearest-direction binning (bin mean radius), then fit by least squares
// over the non-empty bins at their centers. More than 50% empty bins raises
// InsufficientCoverageError.
ShSpectrum sh_spectrum(const std::vector<Eigen::Vector3d>& points, int max_degree = 10,
                       int theta_bins = 32, int phi_bins = 64);

}  // namespace straw3d::shape
