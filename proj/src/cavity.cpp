#include "zfepr/cavity.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include <fmt/format.h>

#include "zfepr/errors.hpp"

namespace zfepr {
namespace {

using complex = std::complex<double>;

double interpolate_clamped(const std::vector<double>& x, const std::vector<double>& y, double at) {
  if (at <= x.front()) return y.front();
  if (at >= x.back()) return y.back();
  const auto it = std::upper_bound(x.begin(), x.end(), at);
  const auto hi = static_cast<std::size_t>(it - x.begin());
  const std::size_t lo = hi - 1;
  const double t = (at - x[lo]) / (x[hi] - x[lo]);
  return y[lo] + t * (y[hi] - y[lo]);
}

}  // namespace

void EnsembleLine::validate() const {
  if (!(width_gamma_star > 0.0)) throw ValidationError("ensemble line width must be > 0");
  if (!(coupling >= 0.0)) throw ValidationError("ensemble line coupling must be >= 0");
  if (profile) profile->validate(1e-6);
}

void SweepResult::validate() const {
  if (frequencies.size() != s21_squared.size()) throw ValidationError("sweep: column lengths differ");
  for (std::size_t k = 0; k < frequencies.size(); ++k) {
    if (!(s21_squared[k] >= 0.0)) throw ValidationError(fmt::format("sweep: negative |S21|^2 at row {}", k));
    if (k > 0 && !(frequencies[k] > frequencies[k - 1])) {
      throw ValidationError(fmt::format("sweep: frequencies not ascending at row {}", k));
    }
  }
}

void TuningCalibration::validate() const {
  if (!std::isfinite(slope) || !(slope > 0.0)) throw ValidationError("tuning slope must be finite and > 0");
}

double cooperativity(double coupling, double kappa, double gamma_star) {
  return coupling * coupling / (kappa * gamma_star);
}

std::complex<double> ensemble_self_energy(double frequency, std::span<const EnsembleLine> lines) {
  complex w{0.0, 0.0};
  for (const auto& line : lines) {
    const double amplitude2 = 0.25 * line.coupling * line.coupling;
    if (amplitude2 == 0.0) continue;
    if (!line.profile) {
      w += amplitude2 / complex(0.5 * line.width_gamma_star, line.center - frequency);
      continue;
    }
    const auto& nu = line.profile->frequencies;
    const auto& rho = line.profile->density;
    const double half = 0.5 * line.homogeneous_width();
    complex integral{0.0, 0.0};
    complex previous = rho[0] / complex(half, nu[0] - frequency);
    for (std::size_t k = 1; k < nu.size(); ++k) {
      const complex current = rho[k] / complex(half, nu[k] - frequency);
      integral += 0.5 * (nu[k] - nu[k - 1]) * (previous + current);
      previous = current;
    }
    w += amplitude2 * integral;
  }
  return w;
}

SweepResult transmission(std::span<const double> grid, const CavityMode& mode, std::span<const EnsembleLine> lines) {
  mode.validate();
  for (const auto& line : lines) line.validate();
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (!(grid[k] > grid[k - 1])) throw ValidationError("transmission: grid must be strictly ascending");
  }

  SweepResult out;
  out.frequencies.assign(grid.begin(), grid.end());
  out.s21_squared.resize(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double f = grid[k];
    const complex denom = complex(0.5 * mode.linewidth_kappa, mode.frequency - f) + ensemble_self_energy(f, lines);
    out.s21_squared[k] = std::norm(mode.kappa_ext / denom);
  }
  out.metadata["cavity_frequency_mhz"] = fmt::format("{:.9g}", mode.frequency);
  out.metadata["kappa_mhz"] = fmt::format("{:.9g}", mode.linewidth_kappa);
  out.metadata["lines"] = fmt::format("{}", lines.size());
  return out;
}

PeakInfo extract_peak(const SweepResult& sweep) {
  sweep.validate();
  const auto& f = sweep.frequencies;
  const auto& y = sweep.s21_squared;
  if (f.size() < 3) throw NumericalError("extract_peak: sweep needs at least three points");
  const auto m = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
  if (m == 0 || m + 1 == y.size()) throw NumericalError("extract_peak: peak not bracketed by the sweep");

  // Parabola through (m-1, m, m+1) on a possibly non-uniform grid.
  const double x0 = f[m - 1] - f[m];
  const double x2 = f[m + 1] - f[m];
  const double d0 = (y[m - 1] - y[m]) / x0;
  const double d2 = (y[m + 1] - y[m]) / x2;
  const double curvature = (d2 - d0) / (x2 - x0);
  const double slope = d0 - curvature * x0;
  PeakInfo peak;
  if (curvature < 0.0) {
    const double shift = std::clamp(-slope / (2.0 * curvature), x0, x2);
    peak.frequency = f[m] + shift;
    peak.value = y[m] + slope * shift + curvature * shift * shift;
  } else {
    peak.frequency = f[m];
    peak.value = y[m];
  }

  const double half = 0.5 * peak.value;
  std::size_t k = m;
  while (k > 0 && y[k - 1] > half) --k;
  if (k == 0) throw NumericalError("extract_peak: no half-maximum crossing below the peak");
  const double lower = f[k - 1] + (half - y[k - 1]) / (y[k] - y[k - 1]) * (f[k] - f[k - 1]);
  k = m;
  while (k + 1 < y.size() && y[k + 1] > half) ++k;
  if (k + 1 == y.size()) throw NumericalError("extract_peak: no half-maximum crossing above the peak");
  const double upper = f[k] + (y[k] - half) / (y[k] - y[k + 1]) * (f[k + 1] - f[k]);

  peak.fwhm = upper - lower;
  peak.q = peak.frequency / peak.fwhm;
  return peak;
}

double cavity_pulling(const CavityMode& mode, std::span<const EnsembleLine> lines) {
  double shift = 0.0;
  for (const auto& line : lines) {
    const double g2 = line.coupling * line.coupling;
    if (g2 == 0.0) continue;
    if (!line.profile) {
      const double detuning = mode.frequency - line.center;
      const double half = 0.5 * line.width_gamma_star;
      shift += g2 * detuning / (detuning * detuning + half * half);
      continue;
    }
    const auto& nu = line.profile->frequencies;
    const auto& rho = line.profile->density;
    const double half = 0.5 * line.homogeneous_width();
    std::vector<double> kernel(nu.size());
    for (std::size_t k = 0; k < nu.size(); ++k) {
      const double detuning = mode.frequency - nu[k];
      kernel[k] = rho[k] * detuning / (detuning * detuning + half * half);
    }
    shift += g2 * trapezoid(nu, kernel);
  }
  return shift;
}

SweepResult vibration_average(const SweepResult& sweep, double sigma_f) {
  if (!(sigma_f >= 0.0)) throw ValidationError("vibration sigma must be >= 0");
  sweep.validate();
  if (sigma_f == 0.0 || sweep.frequencies.size() < 2) return sweep;

  double min_step = sweep.frequencies.back() - sweep.frequencies.front();
  for (std::size_t k = 1; k < sweep.frequencies.size(); ++k) {
    min_step = std::min(min_step, sweep.frequencies[k] - sweep.frequencies[k - 1]);
  }
  const double step = std::min(min_step, sigma_f / 10.0);
  const int half_count = static_cast<int>(std::ceil(5.0 * sigma_f / step));
  std::vector<double> offsets;
  std::vector<double> weights;
  double total = 0.0;
  for (int j = -half_count; j <= half_count; ++j) {
    const double d = j * step;
    const double w = std::exp(-0.5 * d * d / (sigma_f * sigma_f));
    offsets.push_back(d);
    weights.push_back(w);
    total += w;
  }
  for (double& w : weights) w /= total;

  SweepResult out = sweep;
  for (std::size_t i = 0; i < sweep.frequencies.size(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < offsets.size(); ++j) {
      acc += weights[j] * interpolate_clamped(sweep.frequencies, sweep.s21_squared, sweep.frequencies[i] - offsets[j]);
    }
    out.s21_squared[i] = acc;
  }
  out.metadata["jitter_sigma_mhz"] = fmt::format("{:.9g}", sigma_f);
  return out;
}

std::vector<double> cavity_grid(const CavityMode& mode, double half_span_kappa, double step_kappa) {
  mode.validate();
  const double half = half_span_kappa * mode.linewidth_kappa;
  const double step = step_kappa * mode.linewidth_kappa;
  return uniform_grid(mode.frequency - half, mode.frequency + half, step);
}

std::vector<SaturationPoint> saturation_sweep(std::span<const double> powers_dbm, const CavityMode& mode,
                                              const EnsembleLine& line, double n_sat,
                                              const SaturationOptions& options) {
  if (!(n_sat > 0.0)) throw ValidationError("saturation photon number must be > 0");
  const auto grid = cavity_grid(mode, options.half_span_kappa, options.step_kappa);
  std::vector<SaturationPoint> out;
  out.reserve(powers_dbm.size());
  for (const double p : powers_dbm) {
    SaturationPoint point;
    point.power_dbm = p;
    point.photons = photon_number(mode, dbm_to_watts(p), options.coupling_factor);
    EnsembleLine saturated = line;
    saturated.coupling = line.coupling / std::sqrt(1.0 + point.photons / n_sat);
    const PeakInfo peak = extract_peak(transmission(grid, mode, std::span<const EnsembleLine>(&saturated, 1)));
    point.peak_value = peak.value;
    point.q = peak.q;
    out.push_back(point);
  }
  return out;
}

double gap_to_frequency(const TuningCalibration& cal, double gap_mm) {
  cal.validate();
  return cal.reference_frequency + cal.slope * (gap_mm - cal.reference_gap);
}

}  // namespace zfepr
