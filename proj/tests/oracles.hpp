#pragma once

// Closed-form references used by the unit and acceptance tests. Nothing here
// calls into the library, so a bug cannot hide on both sides of a comparison.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

inline constexpr double bohr_mhz_per_tesla = 13996.2449;
inline constexpr double nuclear_mhz_per_tesla = 7.62259;
inline constexpr double planck = 6.62607015e-34;
inline constexpr double hbar = planck / (2.0 * std::numbers::pi);
inline constexpr double boltzmann = 1.380649e-23;

// S = 1/2, I = 7/2, isotropic hyperfine a: F = 3 (x7) at -9a/4 and F = 4 (x9) at +7a/4.
inline std::vector<double> isotropic_levels(double a) {
  std::vector<double> e(7, -2.25 * a);
  e.insert(e.end(), 9, 1.75 * a);
  std::sort(e.begin(), e.end());
  return e;
}

// Diagonal Zeeman ladder for isotropic g along z, no hyperfine.
inline std::vector<double> zeeman_levels(double g, double g_n, double bz, int nuclear_multiplicity = 8) {
  std::vector<double> e;
  const double i = 0.5 * (nuclear_multiplicity - 1);
  for (const double ms : {0.5, -0.5}) {
    for (int k = 0; k < nuclear_multiplicity; ++k) {
      const double mi = i - k;
      e.push_back(ms * g * bohr_mhz_per_tesla * bz - g_n * nuclear_mhz_per_tesla * bz * mi);
    }
  }
  std::sort(e.begin(), e.end());
  return e;
}

inline double kelvin_per_mhz() { return planck * 1e6 / boltzmann; }

// p_lower - p_upper for an isolated two-level system.
inline double two_level_difference(double f_mhz, double t_kelvin) {
  return std::tanh(0.5 * f_mhz * kelvin_per_mhz() / t_kelvin);
}

// Population difference between levels i < j of an arbitrary ladder.
inline double ladder_difference(const std::vector<double>& e_mhz, double t_kelvin, int i, int j) {
  const double e0 = *std::min_element(e_mhz.begin(), e_mhz.end());
  double z = 0.0;
  for (const double e : e_mhz) z += std::exp(-(e - e0) * kelvin_per_mhz() / t_kelvin);
  auto p = [&](int k) { return std::exp(-(e_mhz[static_cast<std::size_t>(k)] - e0) * kelvin_per_mhz() / t_kelvin) / z; };
  return p(i) - p(j);
}

// Photon number n = P Q / (hbar w^2).
inline double photons(double p_watts, double q, double f_mhz) {
  const double w = 2.0 * std::numbers::pi * f_mhz * 1e6;
  return p_watts * q / (hbar * w * w);
}

// Bare two-port resonator.
inline double lorentzian_s21(double f, double fc, double kappa, double kappa_ext) {
  const double x = 2.0 * (f - fc) / kappa;
  const double peak = 4.0 * kappa_ext * kappa_ext / (kappa * kappa);
  return peak / (1.0 + x * x);
}

inline double on_resonance_suppression(double coupling, double kappa, double gamma) {
  const double c = coupling * coupling / (kappa * gamma);
  return 1.0 / ((1.0 + c) * (1.0 + c));
}

// Olivero and Longbothum Voigt width from Lorentzian and Gaussian FWHMs.
inline double voigt_fwhm(double lorentz_fwhm, double gauss_fwhm) {
  return 0.5346 * lorentz_fwhm + std::sqrt(0.2166 * lorentz_fwhm * lorentz_fwhm + gauss_fwhm * gauss_fwhm);
}

inline double gaussian_fwhm(double sigma) { return 2.0 * std::sqrt(2.0 * std::log(2.0)) * sigma; }

// f = f0 + c B^2 / 2 with B ~ N(0, sigma^2): u = f - f0 has CDF erf(sqrt(u / (c sigma^2))).
struct QuadraticEdge {
  double f0;
  double scale;  // c sigma^2, MHz

  [[nodiscard]] double cdf(double f) const {
    const double u = f - f0;
    return u <= 0.0 ? 0.0 : std::erf(std::sqrt(u / scale));
  }
  [[nodiscard]] double density(double f) const {
    const double u = f - f0;
    return u <= 0.0 ? 0.0 : std::exp(-u / scale) / std::sqrt(std::numbers::pi * scale * u);
  }
  // Mean density over [lo, hi], comparable to a histogram bin.
  [[nodiscard]] double bin_average(double lo, double hi) const { return (cdf(hi) - cdf(lo)) / (hi - lo); }
};

// Root of a monotone function on [lo, hi] by bisection.
inline double bisect(const std::function<double(double)>& g, double lo, double hi, int iterations = 200) {
  double glo = g(lo);
  for (int k = 0; k < iterations; ++k) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if ((gm > 0.0) == (glo > 0.0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Avoided crossing f = sqrt(gap^2 + (mu B)^2): second derivative at B = 0.
inline double crossing_curvature(double gap, double mu) { return mu * mu / gap; }

// Knee of -1/(1 + n/n_sat) versus log n: maximum of the second derivative sits at n/n_sat = 2 - sqrt(3).
inline double saturation_knee_ratio() { return 2.0 - std::sqrt(3.0); }

}  // namespace oracle
