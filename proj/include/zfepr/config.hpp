#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "zfepr/cavity.hpp"
#include "zfepr/fit.hpp"
#include "zfepr/lineshape.hpp"
#include "zfepr/spin_model.hpp"
#include "zfepr/thermal.hpp"

namespace zfepr {

using json = nlohmann::json;

/// Reads keys from a JSON object and rejects any key that was never consumed.
class ObjectReader {
 public:
  ObjectReader(const json& object, std::string context);

  [[nodiscard]] bool has(const std::string& key) const;
  [[nodiscard]] const json& at(const std::string& key);
  [[nodiscard]] double number(const std::string& key);
  [[nodiscard]] double number_or(const std::string& key, double fallback);
  [[nodiscard]] int integer(const std::string& key);
  [[nodiscard]] int integer_or(const std::string& key, int fallback);
  [[nodiscard]] std::string string(const std::string& key);
  [[nodiscard]] std::string string_or(const std::string& key, const std::string& fallback);
  [[nodiscard]] bool boolean_or(const std::string& key, bool fallback);
  [[nodiscard]] const std::string& context() const { return context_; }

  /// Throws ValidationError listing unconsumed keys.
  void finish() const;

 private:
  const json& object_;
  std::string context_;
  std::vector<std::string> seen_;
};

Mat3 matrix_from_json(const json& value, const std::string& context);
Vec3 vector_from_json(const json& value, const std::string& context);
json matrix_to_json(const Mat3& m);

SpinSystem spin_system_from_json(const json& value);
json spin_system_to_json(const SpinSystem& sys);
EnsembleSpec ensemble_from_json(const json& value);
CavityMode cavity_from_json(const json& value, std::optional<TuningCalibration>* tuning = nullptr);
FieldDistribution field_distribution_from_json(ObjectReader& reader);

/// {"value": -25, "unit": "dBm"} or {"value": 3e-6, "unit": "W"}; returns watts.
double power_from_json(const json& value, const std::string& context);

struct GridSpec {
  double start = 0.0;
  double stop = 0.0;
  double step = 0.0;
};

struct SweepSection {
  std::optional<GridSpec> cavity_frequencies;  // MHz
  std::optional<GridSpec> gaps;                // mm, mapped through the tuning calibration
  std::vector<EnsembleLine> lines;
  double jitter_sigma_mhz = 0.0;
  double half_span_kappa = 10.0;
  double step_kappa = 0.05;
};

struct LineshapeSection {
  std::optional<std::string> site;
  int lower = 0;
  int upper = 1;
  std::optional<ToyCrossing> toy;
  FieldDistribution distribution;
  ProfileMethod method = ProfileMethod::exact;
  std::uint64_t samples = 100000;
  GridSpec grid;
};

struct FitSection {
  FitProblem problem;  // systems filled from the run's spin systems
};

struct BudgetSection {
  double input_power_watts = 0.0;
  std::optional<std::string> site;
  std::optional<int> lower;
  std::optional<int> upper;
  std::optional<double> collective_coupling_mhz;
  double linewidth_mhz = 5.0;
  bool apply_coupling_correction = false;
};

struct RunConfig {
  std::filesystem::path base_dir;
  std::vector<SpinSystem> spin_systems;
  std::optional<EnsembleSpec> ensemble;
  std::optional<CavityMode> cavity;
  std::optional<TuningCalibration> tuning;
  double temperature_kelvin = 5.1;
  Vec3 drive_direction = Vec3::UnitY();
  std::optional<FrequencyWindow> window;
  std::optional<SweepSection> sweep;
  std::optional<LineshapeSection> lineshape;
  std::optional<FitSection> fit;
  std::optional<BudgetSection> budget;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string hash;

  /// Spin system by label, or the first one when no label is given.
  [[nodiscard]] const SpinSystem& system(const std::optional<std::string>& label) const;
};

/// Parses a run configuration; relative file references resolve against base_dir.
RunConfig run_config_from_json(const json& document, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Loads a JSON document, reporting parse errors as ValidationError.
json load_json_file(const std::filesystem::path& path);

/// 64-bit FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string content_hash(const std::string& text);
std::string config_hash(const json& document, std::uint64_t seed);

}  // namespace zfepr
