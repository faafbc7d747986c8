#include "zfepr/fit.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <random>
#include <tuple>

#include <fmt/format.h>

#include "zfepr/errors.hpp"

namespace zfepr {
namespace {

struct EntryRef {
  bool quadrupole;
  int row;
  int col;
};

constexpr std::array<EntryRef, kParametersPerSystem> kEntries = {{
    {false, 0, 0}, {false, 0, 1}, {false, 0, 2}, {false, 1, 1}, {false, 1, 2}, {false, 2, 2},
    {true, 0, 0},  {true, 0, 1},  {true, 0, 2},  {true, 1, 1},  {true, 1, 2},  {true, 2, 2},
}};

int system_for(const FitProblem& problem, const ObservedLine& line) {
  if (!line.site_hint) return 0;
  for (std::size_t s = 0; s < problem.systems.size(); ++s) {
    if (problem.systems[s].site_label == *line.site_hint) return static_cast<int>(s);
  }
  throw ValidationError(fmt::format("observed line refers to unknown site '{}'", *line.site_hint));
}

}  // namespace

void ObservedLine::validate() const {
  if (!(frequency > 0.0)) throw ValidationError("observed line frequency must be > 0");
  if (!(uncertainty > 0.0)) throw ValidationError("observed line uncertainty must be > 0");
  if (assignment && *assignment < 0) throw ValidationError("observed line assignment must be >= 0");
}

const std::array<std::string, kParametersPerSystem>& parameter_names() {
  static const std::array<std::string, kParametersPerSystem> names = {
      "A_xx", "A_xy", "A_xz", "A_yy", "A_yz", "A_zz", "Q_xx", "Q_xy", "Q_xz", "Q_yy", "Q_yz", "Q_zz"};
  return names;
}

void perturb_entry(SpinSystem& sys, int entry, double delta) {
  if (entry < 0 || entry >= kParametersPerSystem) throw ValidationError("parameter entry out of range");
  const EntryRef& e = kEntries[static_cast<std::size_t>(entry)];
  Mat3& m = e.quadrupole ? sys.Q : sys.A;
  m(e.row, e.col) += delta;
  if (e.row != e.col) m(e.col, e.row) += delta;
}

int FitProblem::free_count() const {
  int n = 0;
  for (const auto& mask : free_mask) n += static_cast<int>(std::count(mask.begin(), mask.end(), true));
  return n;
}

std::vector<std::string> FitProblem::validate() const {
  if (systems.empty()) throw ValidationError("fit: at least one spin system is required");
  if (free_mask.size() != systems.size()) throw ValidationError("fit: one free mask per system is required");
  for (const auto& s : systems) s.validate();
  const int nfree = free_count();
  if (static_cast<int>(bounds.size()) != nfree) {
    throw ValidationError(fmt::format("fit: {} bounds given for {} free parameters", bounds.size(), nfree));
  }
  for (const auto& [lo, hi] : bounds) {
    if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi)) throw ValidationError("fit: bounds must be finite with lo <= hi");
  }
  if (observed.empty()) throw ValidationError("fit: no observed lines");
  for (const auto& line : observed) {
    line.validate();
    const int s = system_for(*this, line);
    if (matching == Matching::assigned) {
      if (!line.assignment) throw ValidationError("fit: assigned matching requires an assignment for every line");
      pair_from_index(*line.assignment, systems[static_cast<std::size_t>(s)].dimension());
    }
  }
  if (!(window.hi > window.lo)) throw ValidationError("fit: window must have hi > lo");
  if (restarts < 0) throw ValidationError("fit: restarts must be >= 0");

  std::vector<std::string> warnings;
  if (nfree == 0) warnings.emplace_back("no free parameters; the fit reports the baseline");
  if (static_cast<int>(observed.size()) < nfree) {
    warnings.push_back(fmt::format("{} observed lines for {} free parameters: the problem is underdetermined",
                                   observed.size(), nfree));
  }
  return warnings;
}

std::vector<SpinSystem> FitProblem::apply(const std::vector<double>& parameters) const {
  if (static_cast<int>(parameters.size()) != free_count()) {
    throw ValidationError(fmt::format("fit: parameter vector has {} entries, expected {}", parameters.size(), free_count()));
  }
  std::vector<SpinSystem> out = systems;
  std::size_t k = 0;
  for (std::size_t s = 0; s < systems.size(); ++s) {
    for (int e = 0; e < kParametersPerSystem; ++e) {
      if (free_mask[s][static_cast<std::size_t>(e)]) perturb_entry(out[s], e, parameters[k++]);
    }
  }
  return out;
}

std::vector<std::string> FitProblem::free_parameter_labels() const {
  std::vector<std::string> labels;
  for (std::size_t s = 0; s < systems.size(); ++s) {
    for (int e = 0; e < kParametersPerSystem; ++e) {
      if (free_mask[s][static_cast<std::size_t>(e)]) {
        labels.push_back(systems[s].site_label + ":" + parameter_names()[static_cast<std::size_t>(e)]);
      }
    }
  }
  return labels;
}

std::vector<PredictedLine> predict_lines(const std::vector<SpinSystem>& systems, const FrequencyWindow& window,
                                         double strength_floor, double temperature_kelvin,
                                         const Vec3& drive_direction) {
  std::vector<PredictedLine> out;
  for (std::size_t s = 0; s < systems.size(); ++s) {
    const SpinHamiltonian ham(systems[s]);
    const EnergyLevels levels = eigensystem(ham.zero_field());
    const auto transitions = enumerate_transitions(levels, systems[s], drive_direction, temperature_kelvin, window);
    std::vector<PredictedLine> merged;
    for (const auto& t : transitions) {
      if (!merged.empty() && t.frequency - merged.back().frequency < 1e-6) {
        auto& last = merged.back();
        last.strength = std::hypot(last.strength, t.weighted_strength);
        continue;
      }
      merged.push_back(PredictedLine{t.frequency, t.weighted_strength, static_cast<int>(s), systems[s].site_label,
                                     t.lower_index, t.upper_index});
    }
    for (auto& line : merged) {
      if (line.strength >= strength_floor) out.push_back(std::move(line));
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const PredictedLine& a, const PredictedLine& b) { return a.frequency < b.frequency; });
  return out;
}

Evaluation evaluate(const FitProblem& problem, const std::vector<double>& parameters) {
  const int nfree = problem.free_count();
  if (static_cast<int>(parameters.size()) != nfree) throw ValidationError("objective: wrong parameter count");
  for (int k = 0; k < nfree; ++k) {
    const auto [lo, hi] = problem.bounds[static_cast<std::size_t>(k)];
    const double slack = 1e-12 * std::max(1.0, hi - lo);
    const double v = parameters[static_cast<std::size_t>(k)];
    if (!(v >= lo - slack && v <= hi + slack)) {
      throw ValidationError(fmt::format("objective: parameter {} = {} outside bounds [{}, {}]", k, v, lo, hi));
    }
  }
  const auto systems = problem.apply(parameters);

  Evaluation ev;
  ev.residuals.assign(problem.observed.size(), std::numeric_limits<double>::quiet_NaN());
  ev.matched.assign(problem.observed.size(), std::nullopt);

  if (problem.matching == Matching::assigned) {
    std::vector<Eigen::VectorXd> energies;
    energies.reserve(systems.size());
    for (const auto& s : systems) energies.push_back(eigensystem(SpinHamiltonian(s).zero_field()).values);
    for (std::size_t o = 0; o < problem.observed.size(); ++o) {
      const auto& line = problem.observed[o];
      const auto s = static_cast<std::size_t>(system_for(problem, line));
      const auto [lower, upper] = pair_from_index(*line.assignment, systems[s].dimension());
      const double f = energies[s][upper] - energies[s][lower];
      ev.residuals[o] = f - line.frequency;
      ev.matched[o] = PredictedLine{f, 0.0, static_cast<int>(s), systems[s].site_label, lower, upper};
      ev.objective += std::pow(ev.residuals[o] / line.uncertainty, 2);
    }
    return ev;
  }

  const auto predicted = predict_lines(systems, problem.window, problem.strength_floor, problem.temperature_kelvin,
                                       problem.drive_direction);
  std::vector<std::tuple<double, double, std::size_t, std::size_t>> candidates;
  for (std::size_t o = 0; o < problem.observed.size(); ++o) {
    const auto& line = problem.observed[o];
    const int hinted = line.site_hint ? system_for(problem, line) : -1;
    for (std::size_t p = 0; p < predicted.size(); ++p) {
      if (hinted >= 0 && predicted[p].system != hinted) continue;
      candidates.emplace_back(std::abs(predicted[p].frequency - line.frequency), -predicted[p].strength, o, p);
    }
  }
  std::sort(candidates.begin(), candidates.end());
  std::vector<bool> obs_used(problem.observed.size(), false);
  std::vector<bool> pred_used(predicted.size(), false);
  for (const auto& [dist, neg_strength, o, p] : candidates) {
    if (obs_used[o] || pred_used[p]) continue;
    obs_used[o] = true;
    pred_used[p] = true;
    ev.residuals[o] = predicted[p].frequency - problem.observed[o].frequency;
    ev.matched[o] = predicted[p];
  }
  for (std::size_t o = 0; o < problem.observed.size(); ++o) {
    const double u = problem.observed[o].uncertainty;
    if (obs_used[o]) {
      ev.objective += std::pow(ev.residuals[o] / u, 2);
    } else {
      ev.objective += std::pow(problem.window.width() / u, 2);
    }
  }
  return ev;
}

double objective(const FitProblem& problem, const std::vector<double>& parameters) {
  return evaluate(problem, parameters).objective;
}

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> start,
                             const std::vector<std::pair<double, double>>& bounds, const NelderMeadOptions& options) {
  const std::size_t n = start.size();
  if (bounds.size() != n) throw ValidationError("nelder_mead: bounds size mismatch");
  auto project = [&](std::vector<double>& x) {
    for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], bounds[i].first, bounds[i].second);
  };
  project(start);

  NelderMeadResult result;
  if (n == 0) {
    result.x = start;
    result.value = f(start);
    result.converged = true;
    return result;
  }

  std::vector<std::vector<double>> simplex(n + 1, start);
  for (std::size_t i = 0; i < n; ++i) {
    const double width = bounds[i].second - bounds[i].first;
    const double step = 0.05 * width;
    simplex[i + 1][i] += (start[i] + step <= bounds[i].second) ? step : -step;
  }
  std::vector<double> values(n + 1);
  for (std::size_t i = 0; i <= n; ++i) values[i] = f(simplex[i]);

  std::vector<std::size_t> order(n + 1);
  auto combine = [&](const std::vector<double>& a, const std::vector<double>& b, double t) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = a[i] + t * (b[i] - a[i]);
    project(x);
    return x;
  };

  int it = 0;
  for (; it < options.max_iterations; ++it) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[n - 1];
    if (values[worst] - values[best] < options.tolerance) {
      result.converged = true;
      break;
    }

    std::vector<double> centroid(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[order[k]][i] / static_cast<double>(n);
    }

    const auto reflected = combine(centroid, simplex[worst], -1.0);
    const double fr = f(reflected);
    if (fr < values[best]) {
      const auto expanded = combine(centroid, simplex[worst], -2.0);
      const double fe = f(expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        values[worst] = fe;
      } else {
        simplex[worst] = reflected;
        values[worst] = fr;
      }
      continue;
    }
    if (fr < values[second]) {
      simplex[worst] = reflected;
      values[worst] = fr;
      continue;
    }
    const bool outside = fr < values[worst];
    const auto contracted = outside ? combine(centroid, reflected, 0.5) : combine(centroid, simplex[worst], 0.5);
    const double fc = f(contracted);
    if ((outside && fc <= fr) || (!outside && fc < values[worst])) {
      simplex[worst] = contracted;
      values[worst] = fc;
      continue;
    }
    for (std::size_t k = 1; k <= n; ++k) {
      const std::size_t v = order[k];
      simplex[v] = combine(simplex[best], simplex[v], 0.5);
      values[v] = f(simplex[v]);
    }
  }

  const auto best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
  result.x = simplex[best];
  result.value = values[best];
  result.iterations = it;
  return result;
}

FitResult fit(const FitProblem& problem) {
  auto warnings = problem.validate();
  const int nfree = problem.free_count();

  std::vector<double> baseline(static_cast<std::size_t>(nfree), 0.0);
  for (int k = 0; k < nfree; ++k) {
    const auto [lo, hi] = problem.bounds[static_cast<std::size_t>(k)];
    baseline[static_cast<std::size_t>(k)] = std::clamp(0.0, lo, hi);
  }

  std::vector<std::vector<double>> starts{baseline};
  std::mt19937_64 rng(problem.seed);
  for (int r = 0; r < problem.restarts; ++r) {
    std::vector<double> x(static_cast<std::size_t>(nfree));
    for (int k = 0; k < nfree; ++k) {
      const auto [lo, hi] = problem.bounds[static_cast<std::size_t>(k)];
      x[static_cast<std::size_t>(k)] = std::uniform_real_distribution<double>(lo, hi)(rng);
    }
    starts.push_back(std::move(x));
  }

  const auto objective_fn = [&problem](const std::vector<double>& x) { return objective(problem, x); };
  std::vector<NelderMeadResult> runs(starts.size());
  const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, problem.threads)), 1, starts.size());
  if (workers == 1) {
    for (std::size_t i = 0; i < starts.size(); ++i) runs[i] = nelder_mead(objective_fn, starts[i], problem.bounds);
  } else {
    std::vector<std::future<void>> tasks;
    for (std::size_t w = 0; w < workers; ++w) {
      tasks.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t i = w; i < starts.size(); i += workers) runs[i] = nelder_mead(objective_fn, starts[i], problem.bounds);
      }));
    }
    for (auto& t : tasks) t.get();
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < runs.size(); ++i) {
    if (runs[i].value < runs[best].value) best = i;
  }

  FitResult result;
  result.warnings = std::move(warnings);
  result.baseline_objective = objective(problem, baseline);
  result.restarts_used = problem.restarts;
  if (runs[best].value > result.baseline_objective) {
    result.parameters = baseline;
    result.converged = false;
  } else {
    result.parameters = runs[best].x;
    result.converged = runs[best].converged;
    result.iterations = runs[best].iterations;
  }
  const Evaluation ev = evaluate(problem, result.parameters);
  result.systems = problem.apply(result.parameters);
  result.objective = ev.objective;
  result.residuals = ev.residuals;
  result.matched = ev.matched;
  return result;
}

PeakInfo reduce_sweep(const SweepResult& raw) { return extract_peak(raw); }

}  // namespace zfepr
