#include "zfepr/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"

#include "zfepr/cavity.hpp"
#include "zfepr/csv.hpp"
#include "zfepr/errors.hpp"
#include "zfepr/fit.hpp"
#include "zfepr/lineshape.hpp"
#include "zfepr/spin_model.hpp"
#include "zfepr/thermal.hpp"

namespace zfepr {
namespace {

const CavityMode& require_cavity(const RunConfig& run, const char* command) {
  if (!run.cavity) throw ValidationError(fmt::format("{}: config has no 'cavity'", command));
  return *run.cavity;
}

const EnsembleSpec& require_ensemble(const RunConfig& run, const char* command) {
  if (!run.ensemble) throw ValidationError(fmt::format("{}: config has no 'ensemble'", command));
  return *run.ensemble;
}

std::vector<double> grid_points(const GridSpec& g) { return uniform_grid(g.start, g.stop, g.step); }

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("{}: cannot open file", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void apply_overrides(RunConfig& run, const json& document, const CliOptions& options) {
  if (options.seed) run.seed = *options.seed;
  if (options.threads) {
    if (*options.threads < 1) throw ValidationError("--threads must be >= 1");
    run.threads = *options.threads;
  }
  if (run.fit) {
    run.fit->problem.seed = run.seed;
    run.fit->problem.threads = run.threads;
  }
  run.hash = config_hash(document, run.seed);
}

std::string cmd_levels(const RunConfig& run) {
  if (run.spin_systems.empty()) throw ValidationError("levels: config has no 'spin_systems'");
  CsvWriter out({"site", "index", "energy_mhz"});
  out.comment("config_hash", run.hash);
  out.comment("field_tesla", "0");
  for (const auto& sys : run.spin_systems) {
    const EnergyLevels levels = eigensystem(SpinHamiltonian(sys).zero_field());
    for (int k = 0; k < levels.size(); ++k) {
      out.row({sys.site_label, std::to_string(k), format_number(levels.values[k])});
    }
  }
  return out.str();
}

std::string cmd_transitions(const RunConfig& run) {
  if (run.spin_systems.empty()) throw ValidationError("transitions: config has no 'spin_systems'");
  const CavityMode& mode = require_cavity(run, "transitions");
  const double n_total = ion_count(require_ensemble(run, "transitions"));

  CsvWriter out({"frequency_mhz", "collective_coupling_mhz", "site", "lower", "upper", "dipole_mhz_per_tesla",
                 "population_difference"});
  out.comment("config_hash", run.hash);
  out.comment("temperature_kelvin", format_number(run.temperature_kelvin));
  if (run.window) out.comment("window_mhz", fmt::format("{}..{}", format_number(run.window->lo), format_number(run.window->hi)));
  for (const auto& sys : run.spin_systems) {
    const EnergyLevels levels = eigensystem(SpinHamiltonian(sys).zero_field());
    for (const auto& tr : enumerate_transitions(levels, sys, run.drive_direction, run.temperature_kelvin, run.window)) {
      const double dn = n_total * tr.population_difference;
      out.row({format_number(tr.frequency), format_number(collective_coupling(tr, mode, std::abs(dn))), sys.site_label,
               std::to_string(tr.lower_index), std::to_string(tr.upper_index), format_number(tr.dipole_element),
               format_number(tr.population_difference)});
    }
  }
  return out.str();
}

std::string cmd_sweep(const RunConfig& run) {
  if (!run.sweep) throw ValidationError("sweep: config has no 'sweep' section");
  const SweepSection& s = *run.sweep;
  const CavityMode& base = require_cavity(run, "sweep");

  std::vector<double> gaps;
  std::vector<double> centres;
  if (s.gaps) {
    if (!run.tuning) throw ValidationError("sweep.gaps requires cavity.tuning");
    gaps = grid_points(*s.gaps);
    for (const double g : gaps) centres.push_back(gap_to_frequency(*run.tuning, g));
  } else {
    centres = grid_points(*s.cavity_frequencies);
  }

  std::vector<std::string> header{"cavity_frequency_mhz", "peak_s21_squared", "q"};
  if (s.gaps) header.insert(header.begin(), "gap_mm");
  CsvWriter out(header);
  out.comment("config_hash", run.hash);
  out.comment("lines", std::to_string(s.lines.size()));
  out.comment("jitter_sigma_mhz", format_number(s.jitter_sigma_mhz));

  for (std::size_t k = 0; k < centres.size(); ++k) {
    CavityMode mode = base;
    mode.frequency = centres[k];
    const auto grid = cavity_grid(mode, s.half_span_kappa, s.step_kappa);
    SweepResult response = transmission(grid, mode, s.lines);
    if (s.jitter_sigma_mhz > 0.0) response = vibration_average(response, s.jitter_sigma_mhz);
    const PeakInfo peak = extract_peak(response);
    std::vector<std::string> row{format_number(centres[k]), format_number(peak.value), format_number(peak.q)};
    if (s.gaps) row.insert(row.begin(), format_number(gaps[k]));
    out.row(std::move(row));
  }
  return out.str();
}

std::string cmd_lineshape(const RunConfig& run) {
  if (!run.lineshape) throw ValidationError("lineshape: config has no 'lineshape' section");
  const LineshapeSection& s = *run.lineshape;
  const SamplingOptions options{s.samples, run.seed, run.threads};
  const auto grid = grid_points(s.grid);

  std::map<std::string, std::string> meta{{"config_hash", run.hash},
                                          {"samples", std::to_string(s.samples)},
                                          {"sigma_b_tesla", format_number(s.distribution.sigma_b)},
                                          {"dimensionality", std::to_string(s.distribution.dimensionality)}};
  LineProfile profile;
  if (s.toy) {
    profile = toy_profile(*s.toy, s.distribution, grid, options);
    meta["source"] = "toy";
  } else {
    const SpinSystem& sys = run.system(s.site);
    profile = synthesize_profile(sys, s.lower, s.upper, s.distribution, grid, s.method, options);
    meta["source"] = fmt::format("{}:{}-{}", sys.site_label, s.lower, s.upper);
    meta["method"] = s.method == ProfileMethod::exact ? "exact" : "quadratic";
  }
  meta["effective_linewidth_mhz"] = format_number(effective_linewidth(profile));
  meta["asymmetry_index"] = format_number(asymmetry_index(profile));
  return profile_to_csv(profile, meta);
}

FitReport cmd_fit(const RunConfig& run) {
  if (!run.fit) throw ValidationError("fit: config has no 'fit' section");
  FitProblem problem = run.fit->problem;
  problem.seed = run.seed;
  problem.threads = run.threads;
  const FitResult result = fit(problem);
  const auto labels = problem.free_parameter_labels();

  json report;
  report["config_hash"] = run.hash;
  report["seed"] = run.seed;
  report["objective"] = result.objective;
  report["baseline_objective"] = result.baseline_objective;
  report["converged"] = result.converged;
  report["iterations"] = result.iterations;
  report["restarts_used"] = result.restarts_used;
  report["warnings"] = result.warnings;
  json params = json::array();
  for (std::size_t k = 0; k < result.parameters.size(); ++k) {
    params.push_back({{"name", labels[k]}, {"perturbation_mhz", result.parameters[k]}});
  }
  report["parameters"] = params;
  json obs = json::array();
  for (std::size_t k = 0; k < problem.observed.size(); ++k) {
    json entry{{"frequency_mhz", problem.observed[k].frequency}};
    if (result.matched[k]) {
      const PredictedLine& p = *result.matched[k];
      entry["predicted_mhz"] = p.frequency;
      entry["residual_mhz"] = result.residuals[k];
      entry["site"] = p.site;
      entry["lower"] = p.lower;
      entry["upper"] = p.upper;
    } else {
      entry["predicted_mhz"] = nullptr;
      entry["residual_mhz"] = nullptr;
    }
    obs.push_back(std::move(entry));
  }
  report["observations"] = obs;
  json systems = json::array();
  for (const auto& sys : result.systems) systems.push_back(spin_system_to_json(sys));
  report["systems"] = systems;

  std::string table = fmt::format("# config_hash={}\nobjective {} (baseline {}), converged={}\n", run.hash,
                                  format_number(result.objective), format_number(result.baseline_objective),
                                  result.converged);
  for (std::size_t k = 0; k < result.parameters.size(); ++k) {
    table += fmt::format("  {:<16} {:>14.6f} MHz\n", labels[k], result.parameters[k]);
  }
  for (std::size_t k = 0; k < problem.observed.size(); ++k) {
    table += result.matched[k] ? fmt::format("  obs {:>12.4f} MHz  residual {:>10.5f} MHz  ({} {}-{})\n",
                                             problem.observed[k].frequency, result.residuals[k],
                                             result.matched[k]->site, result.matched[k]->lower,
                                             result.matched[k]->upper)
                               : fmt::format("  obs {:>12.4f} MHz  unmatched\n", problem.observed[k].frequency);
  }
  for (const auto& w : result.warnings) table += "  warning: " + w + "\n";
  return FitReport{report.dump(2) + "\n", table};
}

std::string cmd_budget(const RunConfig& run) {
  if (!run.budget) throw ValidationError("budget: config has no 'budget' section");
  const BudgetSection& b = *run.budget;
  const CavityMode& mode = require_cavity(run, "budget");
  const EnsembleSpec& ensemble = require_ensemble(run, "budget");
  const SpinSystem& sys = run.system(b.site);

  const EnergyLevels levels = eigensystem(SpinHamiltonian(sys).zero_field());
  // Without an explicit pair, take the strongest transition inside the window
  // (or within 100 MHz of the cavity when no window is configured).
  const FrequencyWindow near = run.window.value_or(FrequencyWindow{mode.frequency - 100.0, mode.frequency + 100.0});
  Transition chosen;
  bool found = false;
  for (const auto& tr : enumerate_transitions(levels, sys, run.drive_direction, run.temperature_kelvin)) {
    if (b.lower) {
      if (tr.lower_index == *b.lower && tr.upper_index == *b.upper) {
        chosen = tr;
        found = true;
      }
    } else if (near.contains(tr.frequency) && (!found || tr.dipole_element > chosen.dipole_element)) {
      chosen = tr;
      found = true;
    }
  }
  if (!found) throw ValidationError("budget: no transition selected; set budget.lower and budget.upper");

  const double factor = b.apply_coupling_correction ? coupling_correction(mode) : 1.0;
  const double photons = photon_number(mode, b.input_power_watts, factor);
  const double dn = population_difference_count(ion_count(ensemble), levels, run.temperature_kelvin,
                                                chosen.lower_index, chosen.upper_index);
  const double collective = b.collective_coupling_mhz ? *b.collective_coupling_mhz
                                                      : collective_coupling(chosen, mode, std::abs(dn));
  const double single = collective / std::sqrt(std::abs(dn));
  const double rabi = rabi_frequency(single, photons);
  const double coop = cooperativity(collective, mode.linewidth_kappa, b.linewidth_mhz);

  CsvWriter out({"quantity", "value", "unit"});
  out.comment("config_hash", run.hash);
  out.comment("transition", fmt::format("{}:{}-{}", sys.site_label, chosen.lower_index, chosen.upper_index));
  out.row({"input_power", format_number(b.input_power_watts), "W"});
  out.row({"transition_frequency", format_number(chosen.frequency), "MHz"});
  out.row({"coupling_correction", format_number(factor), "1"});
  out.row({"photon_number", format_number(photons), "1"});
  out.row({"population_difference", format_number(dn), "1"});
  out.row({"collective_coupling", format_number(collective), "MHz"});
  out.row({"single_spin_coupling", format_number(single), "MHz"});
  out.row({"rabi_frequency", format_number(rabi), "MHz"});
  out.row({"cooperativity", format_number(coop), "1"});
  return out.str();
}

std::string cmd_ingest(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  std::istringstream in(text);
  const SweepResult sweep = sweep_from_csv(parse_csv(in, path.string()));
  const PeakInfo peak = reduce_sweep(sweep);
  CsvWriter out({"peak_frequency_mhz", "peak_s21_squared", "fwhm_mhz", "q"});
  out.comment("input_hash", content_hash(text));
  out.comment("source", path.filename().string());
  out.row({format_number(peak.frequency), format_number(peak.value), format_number(peak.fwhm), format_number(peak.q)});
  return out.str();
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Zero-field EPR and cavity-coupling modelling for doped crystals"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_path;
  CliOptions options;
  std::uint64_t seed = 0;
  int threads = 0;
  app.add_option("--config", config_path, "Run configuration (JSON)");
  auto* seed_opt = app.add_option("--seed", seed, "Random seed override");
  auto* threads_opt = app.add_option("--threads", threads, "Worker threads");
  app.add_option("--out", out_path, "Output file (default: stdout)");

  std::string ingest_path;
  for (const char* name : {"levels", "transitions", "sweep", "lineshape", "fit", "budget"}) {
    app.add_subcommand(name)->fallthrough();
  }
  app.add_subcommand("ingest", "Reduce a measured transmission CSV to peak, FWHM and Q")
      ->fallthrough()
      ->add_option("path", ingest_path, "Sweep CSV with frequency_mhz,s21_squared columns")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }
  if (*seed_opt) options.seed = seed;
  if (*threads_opt) options.threads = threads;

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    auto emit = [&](const std::string& text) {
      if (out_path.empty()) {
        std::cout << text;
      } else {
        write_atomically(out_path, text);
      }
    };
    if (command == "ingest") {
      emit(cmd_ingest(ingest_path));
      return exit_ok;
    }
    if (config_path.empty()) throw ValidationError("--config is required");
    const json document = load_json_file(config_path);
    RunConfig run = run_config_from_json(document, std::filesystem::path(config_path).parent_path());
    apply_overrides(run, document, options);

    if (command == "levels") emit(cmd_levels(run));
    if (command == "transitions") emit(cmd_transitions(run));
    if (command == "sweep") emit(cmd_sweep(run));
    if (command == "lineshape") emit(cmd_lineshape(run));
    if (command == "budget") emit(cmd_budget(run));
    if (command == "fit") {
      const FitReport report = cmd_fit(run);
      emit(report.json_text);
      (out_path.empty() ? std::cerr : std::cout) << report.table;
    }
    return exit_ok;
  } catch (const ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return exit_data;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return exit_numerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_unexpected;
  }
}

}  // namespace zfepr
