#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "zfepr/lineshape.hpp"
#include "zfepr/thermal.hpp"

namespace zfepr {

/// Spin ensemble seen by the cavity as a damped oscillator.
///
/// `coupling` is the collective coupling sqrt(N) g / 2 pi. The amplitude coupling that
/// enters the input-output relation is half of it, which makes the on-resonance
/// cooperativity coupling^2 / (kappa * width) and the transmission suppression (1 + C)^-2.
/// When `profile` is set the line is the density-weighted superposition of homogeneous
/// Lorentzians of width `homogeneous_floor` (default width / 100); `center` is ignored.
struct EnsembleLine {
  double center = 0.0;            // MHz
  double width_gamma_star = 5.0;  // MHz, FWHM
  double coupling = 0.0;          // MHz
  std::shared_ptr<const LineProfile> profile;
  double homogeneous_floor = 0.0;  // MHz; 0 selects width / 100

  void validate() const;
  [[nodiscard]] double homogeneous_width() const {
    return homogeneous_floor > 0.0 ? homogeneous_floor : width_gamma_star / 100.0;
  }
};

struct SweepResult {
  std::vector<double> frequencies;  // MHz
  std::vector<double> s21_squared;  // linear power ratio
  std::map<std::string, std::string> metadata;

  void validate() const;
};

struct PeakInfo {
  double frequency = 0.0;  // MHz
  double value = 0.0;
  double fwhm = 0.0;  // MHz
  double q = 0.0;
};

/// Local linearization of resonance frequency versus gap size.
struct TuningCalibration {
  double slope = 0.0;                // MHz / mm
  double reference_gap = 0.0;        // mm
  double reference_frequency = 0.0;  // MHz

  void validate() const;
};

/// C = coupling^2 / (kappa * gamma_star), all as ordinary-frequency widths.
double cooperativity(double coupling, double kappa, double gamma_star);

/// Complex ensemble self-energy W(omega) summed over lines, MHz.
std::complex<double> ensemble_self_energy(double frequency, std::span<const EnsembleLine> lines);

/// |S21|^2 with S21 = kappa_ext / (i (omega_c - omega) + kappa / 2 + W(omega)).
SweepResult transmission(std::span<const double> grid, const CavityMode& mode, std::span<const EnsembleLine> lines);

/// Maximum by three-point parabolic interpolation, FWHM by linear interpolation at half maximum.
PeakInfo extract_peak(const SweepResult& sweep);

/// Dispersive shift of the cavity resonance, sum_k G_k^2 D_k / (D_k^2 + (width_k / 2)^2)
/// with D_k = omega_c - omega_k. Profile lines integrate the same kernel over their
/// density using the homogeneous floor as width.
double cavity_pulling(const CavityMode& mode, std::span<const EnsembleLine> lines);

/// Average over Gaussian jitter of the resonance position with standard deviation sigma_f.
SweepResult vibration_average(const SweepResult& sweep, double sigma_f);

/// Grid centred on a mode: +- half_span_kappa * kappa with step step_kappa * kappa.
std::vector<double> cavity_grid(const CavityMode& mode, double half_span_kappa = 10.0, double step_kappa = 0.05);

struct SaturationPoint {
  double power_dbm = 0.0;
  double photons = 0.0;
  double peak_value = 0.0;
  double q = 0.0;
};

struct SaturationOptions {
  double half_span_kappa = 10.0;
  double step_kappa = 0.05;
  double coupling_factor = 1.0;  // passed to photon_number
};

/// Power dependence of the cavity response with a saturable line: the line's
/// coupling^2 is scaled by 1 / (1 + n / n_sat).
std::vector<SaturationPoint> saturation_sweep(std::span<const double> powers_dbm, const CavityMode& mode,
                                              const EnsembleLine& line, double n_sat,
                                              const SaturationOptions& options = {});

double gap_to_frequency(const TuningCalibration& cal, double gap_mm);

}  // namespace zfepr
