#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "zfepr/cavity.hpp"
#include "zfepr/spin_model.hpp"

namespace zfepr {

struct ObservedLine {
  double frequency = 0.0;     // MHz
  double uncertainty = 1.0;   // MHz
  std::optional<std::string> site_hint;
  std::optional<int> assignment;  // pair_index() into the hinted (or first) system

  void validate() const;
};

struct PredictedLine {
  double frequency = 0.0;  // MHz
  double strength = 0.0;   // MHz/T, population-weighted moment
  int system = 0;
  std::string site;
  int lower = 0;
  int upper = 0;
};

enum class Matching { assigned, nearest };

/// Independent A and Q entries, in the order used by free masks and parameter names.
inline constexpr int kParametersPerSystem = 12;
const std::array<std::string, kParametersPerSystem>& parameter_names();

/// Adds a perturbation to entry k (0..11) of a system, keeping A and Q symmetric.
void perturb_entry(SpinSystem& sys, int entry, double delta);

struct FitProblem {
  std::vector<SpinSystem> systems;
  std::vector<std::array<bool, kParametersPerSystem>> free_mask;  // one per system
  std::vector<std::pair<double, double>> bounds;  // one per free parameter, perturbation in MHz
  std::vector<ObservedLine> observed;
  Matching matching = Matching::nearest;
  FrequencyWindow window{3020.0, 3200.0};
  double strength_floor = 0.0;
  double temperature_kelvin = 5.1;
  Vec3 drive_direction = Vec3::UnitY();
  int restarts = 8;
  std::uint64_t seed = 1;
  int threads = 1;

  [[nodiscard]] int free_count() const;
  /// Throws ValidationError on structural problems; returns warnings (e.g. underdetermined).
  std::vector<std::string> validate() const;
  /// Base systems with the perturbation vector applied.
  [[nodiscard]] std::vector<SpinSystem> apply(const std::vector<double>& parameters) const;
  /// "site:A_xx" style labels for the free parameters.
  [[nodiscard]] std::vector<std::string> free_parameter_labels() const;
};

struct FitResult {
  std::vector<SpinSystem> systems;
  std::vector<double> parameters;
  std::vector<double> residuals;  // f_pred - f_obs per observation, MHz (NaN when unmatched)
  std::vector<std::optional<PredictedLine>> matched;
  double objective = 0.0;
  double baseline_objective = 0.0;
  bool converged = false;
  int iterations = 0;
  int restarts_used = 0;
  std::vector<std::string> warnings;
};

/// Zero-field lines of every system in the window with strength >= floor. Lines of
/// one system closer than 1e-6 MHz are merged with their strengths added in quadrature.
std::vector<PredictedLine> predict_lines(const std::vector<SpinSystem>& systems, const FrequencyWindow& window,
                                         double strength_floor, double temperature_kelvin = 5.1,
                                         const Vec3& drive_direction = Vec3::UnitY());

struct Evaluation {
  double objective = 0.0;
  std::vector<double> residuals;
  std::vector<std::optional<PredictedLine>> matched;
};

/// Weighted squared residuals for a perturbation vector. Out-of-bounds vectors throw.
Evaluation evaluate(const FitProblem& problem, const std::vector<double>& parameters);
double objective(const FitProblem& problem, const std::vector<double>& parameters);

/// Bounded Nelder-Mead with random restarts.
FitResult fit(const FitProblem& problem);

struct NelderMeadOptions {
  double tolerance = 1e-6;
  int max_iterations = 2000;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Box-constrained downhill simplex (reflection 1, expansion 2, contraction 0.5, shrink 0.5).
/// Trial points are projected onto the box. Initial simplex steps are 5% of each bound width.
NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> start,
                             const std::vector<std::pair<double, double>>& bounds, const NelderMeadOptions& options = {});

/// Peak frequency, value and Q of a measured sweep.
PeakInfo reduce_sweep(const SweepResult& raw);

}  // namespace zfepr
