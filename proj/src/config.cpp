#include "zfepr/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "zfepr/csv.hpp"
#include "zfepr/errors.hpp"

namespace zfepr {
namespace {

json resolve_document(const json& value, const std::filesystem::path& base_dir, const std::string& context) {
  if (value.is_string()) return load_json_file(base_dir / value.get<std::string>());
  if (value.is_object()) return value;
  throw ValidationError(fmt::format("{}: expected an object or a file path", context));
}

GridSpec grid_from_json(const json& value, const std::string& context, const std::string& unit) {
  ObjectReader r(value, context);
  GridSpec g{r.number("start_" + unit), r.number("stop_" + unit), r.number("step_" + unit)};
  r.finish();
  if (!(g.stop > g.start) || !(g.step > 0.0)) throw ValidationError(fmt::format("{}: need stop > start and step > 0", context));
  return g;
}

FrequencyWindow window_from_json(const json& value, const std::string& context) {
  if (!value.is_array() || value.size() != 2 || !value[0].is_number() || !value[1].is_number()) {
    throw ValidationError(fmt::format("{}: expected [lo, hi] in MHz", context));
  }
  FrequencyWindow w{value[0].get<double>(), value[1].get<double>()};
  if (!(w.hi >= w.lo)) throw ValidationError(fmt::format("{}: hi must be >= lo", context));
  return w;
}

EnsembleLine line_from_json(const json& value, const std::filesystem::path& base_dir, const std::string& context) {
  ObjectReader r(value, context);
  EnsembleLine line;
  line.width_gamma_star = r.number_or("width_mhz", 5.0);
  line.coupling = r.number("coupling_mhz");
  line.homogeneous_floor = r.number_or("homogeneous_floor_mhz", 0.0);
  if (r.has("profile_csv")) {
    line.profile = std::make_shared<LineProfile>(profile_from_csv(read_csv_file(base_dir / r.string("profile_csv"))));
    line.center = r.number_or("center_mhz", 0.0);
  } else {
    line.center = r.number("center_mhz");
  }
  r.finish();
  line.validate();
  return line;
}

SweepSection sweep_from_json(const json& value, const std::filesystem::path& base_dir) {
  ObjectReader r(value, "sweep");
  SweepSection s;
  if (r.has("cavity_frequencies")) s.cavity_frequencies = grid_from_json(r.at("cavity_frequencies"), "sweep.cavity_frequencies", "mhz");
  if (r.has("gaps")) s.gaps = grid_from_json(r.at("gaps"), "sweep.gaps", "mm");
  if (s.cavity_frequencies.has_value() == s.gaps.has_value()) {
    throw ValidationError("sweep: exactly one of cavity_frequencies or gaps is required");
  }
  if (r.has("lines")) {
    const json& lines = r.at("lines");
    if (!lines.is_array()) throw ValidationError("sweep.lines: expected an array");
    for (std::size_t k = 0; k < lines.size(); ++k) {
      s.lines.push_back(line_from_json(lines[k], base_dir, fmt::format("sweep.lines[{}]", k)));
    }
  }
  s.jitter_sigma_mhz = r.number_or("jitter_sigma_mhz", 0.0);
  s.half_span_kappa = r.number_or("half_span_kappa", 10.0);
  s.step_kappa = r.number_or("step_kappa", 0.05);
  r.finish();
  if (!(s.jitter_sigma_mhz >= 0.0)) throw ValidationError("sweep.jitter_sigma_mhz must be >= 0");
  if (!(s.half_span_kappa > 0.0) || !(s.step_kappa > 0.0)) throw ValidationError("sweep: half_span_kappa and step_kappa must be > 0");
  return s;
}

LineshapeSection lineshape_from_json(const json& value) {
  ObjectReader r(value, "lineshape");
  LineshapeSection s;
  if (r.has("site")) s.site = r.string("site");
  s.lower = r.integer_or("lower", 0);
  s.upper = r.integer_or("upper", 1);
  if (r.has("toy")) {
    ObjectReader t(r.at("toy"), "lineshape.toy");
    s.toy = ToyCrossing{t.number("gap_mhz"), t.number("slope_mhz_per_tesla")};
    t.finish();
    if (!(s.toy->gap_delta > 0.0)) throw ValidationError("lineshape.toy.gap_mhz must be > 0");
  }
  s.distribution = field_distribution_from_json(r);
  const std::string method = r.string_or("method", "exact");
  if (method == "exact") {
    s.method = ProfileMethod::exact;
  } else if (method == "quadratic") {
    s.method = ProfileMethod::quadratic;
  } else {
    throw ValidationError(fmt::format("lineshape.method: unknown method '{}'", method));
  }
  const double samples = r.number_or("samples", 100000.0);
  if (!(samples >= 1.0) || samples != std::floor(samples)) throw ValidationError("lineshape.samples must be a positive integer");
  s.samples = static_cast<std::uint64_t>(samples);
  s.grid = grid_from_json(r.at("grid"), "lineshape.grid", "mhz");
  r.finish();
  return s;
}

std::vector<ObservedLine> observed_from_json(const json& value, const std::filesystem::path& base_dir) {
  if (value.is_string()) return observed_from_csv(read_csv_file(base_dir / value.get<std::string>()));
  if (!value.is_array()) throw ValidationError("fit.observed: expected a CSV path or an array");
  std::vector<ObservedLine> lines;
  for (std::size_t k = 0; k < value.size(); ++k) {
    ObjectReader r(value[k], fmt::format("fit.observed[{}]", k));
    ObservedLine line;
    line.frequency = r.number("frequency_mhz");
    line.uncertainty = r.number_or("uncertainty_mhz", 1.0);
    if (r.has("site_hint")) line.site_hint = r.string("site_hint");
    if (r.has("assignment")) line.assignment = r.integer("assignment");
    r.finish();
    line.validate();
    lines.push_back(std::move(line));
  }
  return lines;
}

FitSection fit_from_json(const json& value, const RunConfig& run) {
  ObjectReader r(value, "fit");
  FitSection s;
  FitProblem& p = s.problem;
  p.systems = run.spin_systems;
  p.free_mask.assign(p.systems.size(), {});
  p.temperature_kelvin = run.temperature_kelvin;
  p.drive_direction = run.drive_direction;
  p.seed = run.seed;

  const json& free = r.at("free");
  if (!free.is_array()) throw ValidationError("fit.free: expected an array");
  // bounds are collected per (system, entry) and emitted in mask order
  std::vector<std::array<std::pair<double, double>, kParametersPerSystem>> bounds(p.systems.size());
  for (std::size_t k = 0; k < free.size(); ++k) {
    const std::string ctx = fmt::format("fit.free[{}]", k);
    ObjectReader f(free[k], ctx);
    const std::string site = f.string_or("site", p.systems.empty() ? "" : p.systems.front().site_label);
    const std::string name = f.string("parameter");
    const json& b = f.at("bounds_mhz");
    f.finish();
    const auto sys_it = std::find_if(p.systems.begin(), p.systems.end(),
                                     [&](const SpinSystem& sys) { return sys.site_label == site; });
    if (sys_it == p.systems.end()) throw ValidationError(fmt::format("{}: unknown site '{}'", ctx, site));
    const auto& names = parameter_names();
    const auto name_it = std::find(names.begin(), names.end(), name);
    if (name_it == names.end()) throw ValidationError(fmt::format("{}: unknown parameter '{}' (expected one of {})", ctx, name, fmt::join(names, ", ")));
    const auto sidx = static_cast<std::size_t>(sys_it - p.systems.begin());
    const auto eidx = static_cast<std::size_t>(name_it - names.begin());
    if (p.free_mask[sidx][eidx]) throw ValidationError(fmt::format("{}: parameter listed twice", ctx));
    const FrequencyWindow w = window_from_json(b, ctx + ".bounds_mhz");
    p.free_mask[sidx][eidx] = true;
    bounds[sidx][eidx] = {w.lo, w.hi};
  }
  for (std::size_t sidx = 0; sidx < p.systems.size(); ++sidx) {
    for (std::size_t e = 0; e < static_cast<std::size_t>(kParametersPerSystem); ++e) {
      if (p.free_mask[sidx][e]) p.bounds.push_back(bounds[sidx][e]);
    }
  }

  p.observed = observed_from_json(r.at("observed"), run.base_dir);
  const std::string matching = r.string_or("matching", "nearest");
  if (matching == "nearest") {
    p.matching = Matching::nearest;
  } else if (matching == "assigned") {
    p.matching = Matching::assigned;
  } else {
    throw ValidationError(fmt::format("fit.matching: unknown mode '{}'", matching));
  }
  if (r.has("window_mhz")) {
    p.window = window_from_json(r.at("window_mhz"), "fit.window_mhz");
  } else if (run.window) {
    p.window = *run.window;
  }
  p.strength_floor = r.number_or("strength_floor", 0.0);
  p.restarts = r.integer_or("restarts", 8);
  r.finish();
  return s;
}

BudgetSection budget_from_json(const json& value) {
  ObjectReader r(value, "budget");
  BudgetSection s;
  s.input_power_watts = power_from_json(r.at("input_power"), "budget.input_power");
  if (r.has("site")) s.site = r.string("site");
  if (r.has("lower")) s.lower = r.integer("lower");
  if (r.has("upper")) s.upper = r.integer("upper");
  if (s.lower.has_value() != s.upper.has_value()) throw ValidationError("budget: lower and upper must be given together");
  if (r.has("collective_coupling_mhz")) s.collective_coupling_mhz = r.number("collective_coupling_mhz");
  s.linewidth_mhz = r.number_or("linewidth_mhz", 5.0);
  s.apply_coupling_correction = r.boolean_or("apply_coupling_correction", false);
  r.finish();
  if (!(s.linewidth_mhz > 0.0)) throw ValidationError("budget.linewidth_mhz must be > 0");
  return s;
}

}  // namespace

ObjectReader::ObjectReader(const json& object, std::string context) : object_(object), context_(std::move(context)) {
  if (!object_.is_object()) throw ValidationError(fmt::format("{}: expected a JSON object", context_));
}

bool ObjectReader::has(const std::string& key) const { return object_.contains(key); }

const json& ObjectReader::at(const std::string& key) {
  if (!object_.contains(key)) throw ValidationError(fmt::format("{}: missing required key '{}'", context_, key));
  seen_.push_back(key);
  return object_.at(key);
}

double ObjectReader::number(const std::string& key) {
  const json& v = at(key);
  if (!v.is_number()) throw ValidationError(fmt::format("{}.{}: expected a number", context_, key));
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ValidationError(fmt::format("{}.{}: must be finite", context_, key));
  return d;
}

double ObjectReader::number_or(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

int ObjectReader::integer(const std::string& key) {
  const json& v = at(key);
  if (!v.is_number_integer()) throw ValidationError(fmt::format("{}.{}: expected an integer", context_, key));
  return v.get<int>();
}

int ObjectReader::integer_or(const std::string& key, int fallback) { return has(key) ? integer(key) : fallback; }

std::string ObjectReader::string(const std::string& key) {
  const json& v = at(key);
  if (!v.is_string()) throw ValidationError(fmt::format("{}.{}: expected a string", context_, key));
  return v.get<std::string>();
}

std::string ObjectReader::string_or(const std::string& key, const std::string& fallback) {
  return has(key) ? string(key) : fallback;
}

bool ObjectReader::boolean_or(const std::string& key, bool fallback) {
  if (!has(key)) return fallback;
  const json& v = at(key);
  if (!v.is_boolean()) throw ValidationError(fmt::format("{}.{}: expected true or false", context_, key));
  return v.get<bool>();
}

void ObjectReader::finish() const {
  std::vector<std::string> unknown;
  for (const auto& [key, _] : object_.items()) {
    if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) unknown.push_back(key);
  }
  if (!unknown.empty()) {
    throw ValidationError(fmt::format("{}: unknown key(s) {}", context_, fmt::join(unknown, ", ")));
  }
}

Mat3 matrix_from_json(const json& value, const std::string& context) {
  Mat3 m;
  if (value.is_array() && value.size() == 9) {
    for (int k = 0; k < 9; ++k) {
      if (!value[static_cast<std::size_t>(k)].is_number()) throw ValidationError(fmt::format("{}: entries must be numbers", context));
      m(k / 3, k % 3) = value[static_cast<std::size_t>(k)].get<double>();
    }
    return m;
  }
  if (value.is_array() && value.size() == 3) {
    for (int r = 0; r < 3; ++r) {
      const json& row = value[static_cast<std::size_t>(r)];
      if (!row.is_array() || row.size() != 3) throw ValidationError(fmt::format("{}: expected a 3x3 matrix", context));
      for (int c = 0; c < 3; ++c) {
        if (!row[static_cast<std::size_t>(c)].is_number()) throw ValidationError(fmt::format("{}: entries must be numbers", context));
        m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
      }
    }
    return m;
  }
  throw ValidationError(fmt::format("{}: expected a 3x3 matrix (nested rows or 9 numbers, row-major)", context));
}

Vec3 vector_from_json(const json& value, const std::string& context) {
  if (!value.is_array() || value.size() != 3) throw ValidationError(fmt::format("{}: expected a 3-vector", context));
  Vec3 v;
  for (int k = 0; k < 3; ++k) {
    if (!value[static_cast<std::size_t>(k)].is_number()) throw ValidationError(fmt::format("{}: entries must be numbers", context));
    v[k] = value[static_cast<std::size_t>(k)].get<double>();
  }
  return v;
}

json matrix_to_json(const Mat3& m) {
  json out = json::array();
  for (int r = 0; r < 3; ++r) out.push_back({m(r, 0), m(r, 1), m(r, 2)});
  return out;
}

SpinSystem spin_system_from_json(const json& value) {
  ObjectReader r(value, "spin_system");
  SpinSystem sys;
  sys.site_label = r.string_or("site_label", "site1");
  sys.electron_multiplicity = r.integer_or("electron_multiplicity", 2);
  sys.nuclear_multiplicity = r.integer_or("nuclear_multiplicity", 8);
  sys.g = matrix_from_json(r.at("g"), "spin_system.g");
  sys.A = matrix_from_json(r.at("A"), "spin_system.A");
  sys.Q = r.has("Q") ? matrix_from_json(r.at("Q"), "spin_system.Q") : Mat3::Zero();
  sys.g_n = r.number("g_n");
  r.finish();
  try {
    sys.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("spin_system '{}': {}", sys.site_label, e.what()));
  }
  return sys;
}

json spin_system_to_json(const SpinSystem& sys) {
  return json{{"site_label", sys.site_label},
              {"electron_multiplicity", sys.electron_multiplicity},
              {"nuclear_multiplicity", sys.nuclear_multiplicity},
              {"g", matrix_to_json(sys.g)},
              {"A", matrix_to_json(sys.A)},
              {"Q", matrix_to_json(sys.Q)},
              {"g_n", sys.g_n}};
}

EnsembleSpec ensemble_from_json(const json& value) {
  ObjectReader r(value, "ensemble");
  EnsembleSpec e;
  e.dopant_fraction = r.number("dopant_fraction");
  e.host_site_density = r.number_or("host_site_density_per_m3", 1.83e28);
  if (r.has("sample_volume_m3")) {
    e.sample_volume = r.number("sample_volume_m3");
  } else {
    e.sample_volume = cylinder_volume(r.number("sample_diameter_m"), r.number("sample_length_m"));
  }
  e.sites_per_ion_class = r.integer_or("sites_per_ion_class", 2);
  r.finish();
  e.validate();
  return e;
}

CavityMode cavity_from_json(const json& value, std::optional<TuningCalibration>* tuning) {
  ObjectReader r(value, "cavity");
  CavityMode m;
  m.frequency = r.number("frequency_mhz");
  m.linewidth_kappa = r.number("kappa_mhz");
  m.kappa_ext = r.number_or("kappa_ext_mhz", 0.25 * m.linewidth_kappa);
  m.mode_volume = r.number("mode_volume_m3");
  m.filling_factor = r.number_or("filling_factor", 1.0);
  if (r.has("tuning")) {
    ObjectReader t(r.at("tuning"), "cavity.tuning");
    TuningCalibration cal{t.number("slope_mhz_per_mm"), t.number("reference_gap_mm"),
                          t.number_or("reference_frequency_mhz", m.frequency)};
    t.finish();
    cal.validate();
    if (tuning) *tuning = cal;
  }
  r.finish();
  m.validate();
  return m;
}

FieldDistribution field_distribution_from_json(ObjectReader& reader) {
  FieldDistribution d;
  d.sigma_b = reader.number("sigma_b_tesla");
  d.dimensionality = reader.integer_or("dimensionality", 1);
  if (reader.has("axis")) {
    d.axis = vector_from_json(reader.at("axis"), reader.context() + ".axis");
    if (d.axis.norm() == 0.0) throw ValidationError(reader.context() + ".axis: must be non-zero");
    d.axis.normalize();
  }
  d.validate();
  return d;
}

double power_from_json(const json& value, const std::string& context) {
  ObjectReader r(value, context);
  const double v = r.number("value");
  const std::string unit = r.string("unit");
  r.finish();
  if (unit == "dBm") return dbm_to_watts(v);
  if (unit == "W" || unit == "watts") {
    if (!(v >= 0.0)) throw ValidationError(fmt::format("{}: power must be >= 0 W", context));
    return v;
  }
  throw ValidationError(fmt::format("{}.unit: expected 'dBm' or 'W', got '{}'", context, unit));
}

const SpinSystem& RunConfig::system(const std::optional<std::string>& label) const {
  if (spin_systems.empty()) throw ValidationError("config: no spin systems defined");
  if (!label) return spin_systems.front();
  for (const auto& s : spin_systems) {
    if (s.site_label == *label) return s;
  }
  throw ValidationError(fmt::format("config: unknown site '{}'", *label));
}

RunConfig run_config_from_json(const json& document, const std::filesystem::path& base_dir) {
  ObjectReader r(document, "config");
  RunConfig run;
  run.base_dir = base_dir;
  run.seed = r.has("seed") ? static_cast<std::uint64_t>(r.integer("seed")) : 1;
  run.threads = r.integer_or("threads", 1);
  run.temperature_kelvin = r.number_or("temperature_kelvin", 5.1);
  if (!(run.temperature_kelvin > 0.0)) throw ValidationError("config.temperature_kelvin must be > 0");
  if (r.has("drive_direction")) {
    run.drive_direction = vector_from_json(r.at("drive_direction"), "config.drive_direction");
    if (run.drive_direction.norm() == 0.0) throw ValidationError("config.drive_direction must be non-zero");
    run.drive_direction.normalize();
  }
  if (r.has("window_mhz")) run.window = window_from_json(r.at("window_mhz"), "config.window_mhz");

  if (r.has("spin_systems")) {
    const json& list = r.at("spin_systems");
    if (!list.is_array()) throw ValidationError("config.spin_systems: expected an array");
    for (std::size_t k = 0; k < list.size(); ++k) {
      run.spin_systems.push_back(
          spin_system_from_json(resolve_document(list[k], base_dir, fmt::format("config.spin_systems[{}]", k))));
    }
  }
  for (std::size_t a = 0; a < run.spin_systems.size(); ++a) {
    for (std::size_t b = a + 1; b < run.spin_systems.size(); ++b) {
      if (run.spin_systems[a].site_label == run.spin_systems[b].site_label) {
        throw ValidationError(fmt::format("config.spin_systems: duplicate site_label '{}'", run.spin_systems[a].site_label));
      }
    }
  }
  if (r.has("ensemble")) run.ensemble = ensemble_from_json(resolve_document(r.at("ensemble"), base_dir, "config.ensemble"));
  if (r.has("cavity")) run.cavity = cavity_from_json(resolve_document(r.at("cavity"), base_dir, "config.cavity"), &run.tuning);

  if (r.has("sweep")) run.sweep = sweep_from_json(r.at("sweep"), base_dir);
  if (r.has("lineshape")) run.lineshape = lineshape_from_json(r.at("lineshape"));
  if (r.has("budget")) run.budget = budget_from_json(r.at("budget"));
  if (r.has("fit")) run.fit = fit_from_json(r.at("fit"), run);
  r.finish();

  run.hash = config_hash(document, run.seed);
  return run;
}

json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("{}: cannot open file", path.string()));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("{}: invalid JSON: {}", path.string(), e.what()));
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return run_config_from_json(load_json_file(path), path.parent_path());
}

std::string content_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

std::string config_hash(const json& document, std::uint64_t seed) {
  return content_hash(document.dump() + "|seed=" + std::to_string(seed));
}

}  // namespace zfepr
