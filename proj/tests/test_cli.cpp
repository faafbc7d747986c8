#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "json.hpp"
#include "zfepr/cavity.hpp"
#include "zfepr/csv.hpp"

namespace {

const std::filesystem::path kConfigs = ZFEPR_CONFIG_DIR;

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run cli(const std::string& args) {
  static int counter = 0;
  static const auto dir = testing::scratch_dir("cli_io");
  const auto out = dir / ("out" + std::to_string(counter) + ".txt");
  const auto err = dir / ("err" + std::to_string(counter) + ".txt");
  ++counter;
  const std::string cmd = std::string("\"") + ZFEPR_CLI + "\" " + args + " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string config(const std::string& name) { return "--config \"" + (kConfigs / name).string() + "\""; }

std::filesystem::path write_config(const std::filesystem::path& dir, const std::string& name, const nlohmann::json& j) {
  const auto p = dir / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(cli("--help").code == 0);
  CHECK(cli("").code == 2);
  CHECK(cli("levels --bogus").code == 2);
  const Run missing = cli("levels");
  CHECK(missing.code == 2);
  CHECK(missing.err.find("--config") != std::string::npos);
}

TEST_CASE("levels and transitions carry the config hash") {
  const Run levels = cli("levels " + config("spectrum.json"));
  REQUIRE(levels.code == 0);
  CHECK(levels.out.find("# config_hash=") != std::string::npos);
  CHECK(levels.out.find("site,index,energy_mhz") != std::string::npos);
  const Run transitions = cli("transitions " + config("spectrum.json"));
  REQUIRE(transitions.code == 0);
  CHECK(transitions.out.find("frequency_mhz,collective_coupling_mhz") != std::string::npos);
  CHECK(transitions.out.find("3075.2") != std::string::npos);
}

TEST_CASE("seed override changes the hash") {
  const Run a = cli("levels " + config("spectrum.json"));
  const Run b = cli("--seed 99 levels " + config("spectrum.json"));
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(a.out != b.out);
}

TEST_CASE("configuration errors exit with 2 and name the key") {
  const auto dir = testing::scratch_dir("cli_config");
  auto site = nlohmann::json::parse(slurp(kConfigs / "site1.json"));
  site["A"][0][1] = 0.0;
  const auto bad_site = write_config(dir, "bad_site.json", site);
  const auto run = write_config(dir, "run.json", {{"spin_systems", {bad_site.string()}}});
  const Run r = cli("levels --config \"" + run.string() + "\"");
  CHECK(r.code == 2);
  CHECK(r.err.find("A") != std::string::npos);
  CHECK(r.err.find("symmetric") != std::string::npos);

  const auto typo = write_config(dir, "typo.json", {{"spin_systems", {(kConfigs / "site1.json").string()}}, {"temprature_kelvin", 4}});
  const Run t = cli("levels --config \"" + typo.string() + "\"");
  CHECK(t.code == 2);
  CHECK(t.err.find("temprature_kelvin") != std::string::npos);
}

TEST_CASE("data errors exit with 3 and report the line") {
  const auto dir = testing::scratch_dir("cli_data");
  std::ofstream(dir / "bad.csv") << "frequency_mhz,s21_squared\n3100,0.1\n3100.1,x\n3100.2,0.1\n";
  const Run r = cli("ingest \"" + (dir / "bad.csv").string() + "\"");
  CHECK(r.code == 3);
  CHECK(r.err.find("bad.csv:3") != std::string::npos);
}

TEST_CASE("numerical errors exit with 4") {
  const auto dir = testing::scratch_dir("cli_numerical");
  // isotropic A: the 3100 MHz cluster is degenerate, so the quadratic method has no curvature
  const nlohmann::json iso = {{"site_label", "iso"},
                              {"g", {{2, 0, 0}, {0, 2, 0}, {0, 0, 2}}},
                              {"A", {{775, 0, 0}, {0, 775, 0}, {0, 0, 775}}},
                              {"g_n", 0.0}};
  const nlohmann::json doc = {{"spin_systems", {iso}},
                              {"lineshape",
                               {{"lower", 0},
                                {"upper", 8},
                                {"sigma_b_tesla", 1e-4},
                                {"method", "quadratic"},
                                {"samples", 100},
                                {"grid", {{"start_mhz", 3000}, {"stop_mhz", 3200}, {"step_mhz", 1}}}}}};
  const auto path = write_config(dir, "iso.json", doc);
  const Run r = cli("lineshape --config \"" + path.string() + "\"");
  CHECK(r.code == 4);
  CHECK(r.err.find("exact") != std::string::npos);
}

TEST_CASE("empty window yields a header-only transitions file") {
  const auto dir = testing::scratch_dir("cli_window");
  auto doc = nlohmann::json::parse(slurp(kConfigs / "spectrum.json"));
  for (auto& s : doc["spin_systems"]) s = (kConfigs / s.get<std::string>()).string();
  doc["ensemble"] = (kConfigs / "ensemble.json").string();
  doc["cavity"] = (kConfigs / "cavity.json").string();
  doc["window_mhz"] = {1e5, 1.1e5};
  const auto path = write_config(dir, "empty.json", doc);
  const Run r = cli("transitions --config \"" + path.string() + "\"");
  REQUIRE(r.code == 0);
  std::istringstream in(r.out);
  const auto table = zfepr::parse_csv(in, "stdout");
  CHECK(table.rows.empty());
  CHECK(table.column("frequency_mhz") == 0);
}

TEST_CASE("fit output is byte-identical across runs and thread counts") {
  const auto dir = testing::scratch_dir("cli_fit");
  const auto a = dir / "a.json";
  const auto b = dir / "b.json";
  const Run ra = cli(config("fit_measured.json") + " --out \"" + a.string() + "\" fit");
  const Run rb = cli(config("fit_measured.json") + " --threads 3 --out \"" + b.string() + "\" fit");
  REQUIRE(ra.code == 0);
  REQUIRE(rb.code == 0);
  CHECK(slurp(a) == slurp(b));
  const auto report = nlohmann::json::parse(slurp(a));
  CHECK(report.contains("config_hash"));
  CHECK(report["seed"] == 11);
  CHECK(report["objective"].get<double>() <= report["baseline_objective"].get<double>());
  CHECK(report["observations"].size() == 4);
  CHECK(ra.out.find("A_xx") != std::string::npos);
}

TEST_CASE("budget reproduces the photon and population numbers") {
  const Run r = cli("budget " + config("budget.json"));
  REQUIRE(r.code == 0);
  std::istringstream in(r.out);
  const auto t = zfepr::parse_csv(in, "budget");
  const int q = t.require_column("quantity");
  const int v = t.require_column("value");
  std::map<std::string, double> values;
  for (std::size_t k = 0; k < t.rows.size(); ++k) values[t.rows[k][static_cast<std::size_t>(q)]] = t.number(k, v);
  CHECK(values.at("photon_number") / 5e12 <= 2.0);
  CHECK(values.at("population_difference") / 1e14 >= 1.0 / 3);
  CHECK(values.at("population_difference") / 1e14 <= 3.0);
  CHECK(values.at("cooperativity") >= 0.1);
  CHECK(t.metadata.count("config_hash") == 1);
}

TEST_CASE("ingest recovers a synthetic Lorentzian") {
  const auto dir = testing::scratch_dir("cli_ingest");
  zfepr::CavityMode m;
  m.frequency = 3050.0;
  m.linewidth_kappa = 0.03;
  m.kappa_ext = 0.0075;
  m.mode_volume = 3e-7;
  const auto sweep = zfepr::transmission(zfepr::cavity_grid(m), m, {});
  std::ofstream(dir / "vna.csv") << zfepr::sweep_to_csv(sweep, "0000000000000000");
  const Run r = cli("--out \"" + (dir / "peak.csv").string() + "\" ingest \"" + (dir / "vna.csv").string() + "\"");
  REQUIRE(r.code == 0);
  const auto t = zfepr::read_csv_file(dir / "peak.csv");
  CHECK(t.metadata.count("input_hash") == 1);
  REQUIRE(t.rows.size() == 1);
  CHECK(t.number(0, t.require_column("peak_frequency_mhz")) == doctest::Approx(3050.0).epsilon(1e-9));
  CHECK(t.number(0, t.require_column("q")) == doctest::Approx(3050.0 / 0.03).epsilon(0.01));
}

TEST_CASE("lineshape and sweep commands write their tables") {
  const Run l = cli("lineshape " + config("lineshape_toy.json"));
  REQUIRE(l.code == 0);
  CHECK(l.out.find("density_per_mhz") != std::string::npos);
  CHECK(l.out.find("# asymmetry") != std::string::npos);
  const Run s = cli("sweep " + config("sweep.json"));
  REQUIRE(s.code == 0);
  CHECK(s.out.find("peak_s21_squared") != std::string::npos);
}
