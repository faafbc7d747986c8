#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "zfepr/spin_model.hpp"

namespace zfepr {

/// Frequency density on a uniform grid of bin centres. Unit trapezoidal area.
struct LineProfile {
  std::vector<double> frequencies;  // MHz
  std::vector<double> density;      // 1 / MHz

  [[nodiscard]] double area() const;
  [[nodiscard]] std::size_t size() const { return frequencies.size(); }
  /// Throws ValidationError unless sizes match, density >= 0 and area == 1 within tolerance.
  void validate(double tolerance = 1e-6) const;
};

/// Trapezoidal integral of y over x.
double trapezoid(const std::vector<double>& x, const std::vector<double>& y);

/// Random local fields: Gaussian with per-axis standard deviation sigma_b.
/// One-dimensional distributions act along `axis`; three-dimensional ones are isotropic.
struct FieldDistribution {
  double sigma_b = 0.0;  // tesla
  int dimensionality = 1;
  Vec3 axis = Vec3::UnitY();

  void validate() const;
};

/// Two-level avoided crossing f(B) = sqrt(gap^2 + (slope B)^2).
struct ToyCrossing {
  double gap_delta = 0.0;  // MHz
  double slope_mu = 0.0;   // MHz / T

  [[nodiscard]] double frequency(double field) const;
  [[nodiscard]] double curvature() const { return slope_mu * slope_mu / gap_delta; }
};

enum class ProfileMethod { exact, quadratic };

struct SamplingOptions {
  std::uint64_t samples = 100000;
  std::uint64_t seed = 1;
  int threads = 1;
};

/// Uniform grid from start to stop (inclusive, within half a step).
std::vector<double> uniform_grid(double start, double stop, double step);

/// Histogram of a sample-to-frequency mapping over field draws, normalized to unit area.
/// Draws are split in fixed blocks with per-block derived seeds, so the result does not
/// depend on the thread count. Throws ValidationError when more than 0.1% of the mass
/// falls outside the grid.
LineProfile sample_profile(const std::vector<double>& grid, const FieldDistribution& dist,
                           const SamplingOptions& options, const std::function<double(const Vec3&)>& mapping);

LineProfile synthesize_profile(const SpinSystem& sys, int lower, int upper, const FieldDistribution& dist,
                               const std::vector<double>& grid, ProfileMethod method,
                               const SamplingOptions& options);

LineProfile toy_profile(const ToyCrossing& toy, const FieldDistribution& dist, const std::vector<double>& grid,
                        const SamplingOptions& options);

/// Full width at half maximum. Where the density steps up from exactly zero the
/// crossing is taken at the support edge (the bin boundary) instead of interpolating.
double effective_linewidth(const LineProfile& profile);

/// Steepest neighbour slope below the mode over the steepest one above it.
double asymmetry_index(const LineProfile& profile);

LineProfile compose_doublet(const LineProfile& p1, const LineProfile& p2, double w1, double w2);

/// Reverses the frequency axis about the grid midpoint.
LineProfile mirrored(const LineProfile& profile);

/// Strict interior local maxima, skipping flat plateaus below `floor_fraction` of the peak.
int count_local_maxima(const LineProfile& profile, double floor_fraction = 0.01);

}  // namespace zfepr
