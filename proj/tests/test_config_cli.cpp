#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bsde/config.hpp"
#include "bsde/report_io.hpp"
#include "bsde/svg_plot.hpp"

using namespace bsde;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(BSDE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

}  // namespace

TEST_CASE("config parsing: comments, dotted keys, line diagnostics") {
  ConfigMap map = ConfigMap::parse_string(
      "# comment\n"
      "schema_version = 1\n"
      "mode = solve\n"
      "problem.name = linear1d   # trailing comment\n"
      "grid.N = 4\n");
  CHECK(map.entries.at("problem.name").value == "linear1d");
  CHECK(map.entries.at("grid.N").line == 5);
  CHECK_THROWS_WITH_AS(ConfigMap::parse_string("schema_version = 1\nnot a kv line\n"),
                       doctest::Contains("line 2"), std::invalid_argument);
}

TEST_CASE("experiment config validation") {
  auto base = [](const std::string& extra) {
    return ConfigMap::parse_string("schema_version = 1\nmode = solve\n"
                                   "problem.name = linear1d\ngrid.N = 4\n" +
                                   extra);
  };
  CHECK_NOTHROW(ExperimentConfig::from_map(base("")));

  // Unknown keys are rejected with the line number.
  CHECK_THROWS_WITH_AS(ExperimentConfig::from_map(base("trian.iterations = 10\n")),
                       doctest::Contains("unknown key"), std::invalid_argument);
  // Malformed values name the field.
  CHECK_THROWS_WITH_AS(ExperimentConfig::from_map(base("grid.N = -3\n")),
                       doctest::Contains("grid.N"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(ExperimentConfig::from_map(base("train.batch_size = 1\n")),
                       doctest::Contains("batch_size"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(ExperimentConfig::from_map(base("problem.name = unknown\n")),
                       doctest::Contains("problem.name"), std::invalid_argument);
  // Schema version is mandatory.
  CHECK_THROWS_AS(ExperimentConfig::from_map(ConfigMap::parse_string("mode = solve\n")),
                  std::invalid_argument);
  // converge mode needs the N list.
  CHECK_THROWS_AS(
      ExperimentConfig::from_map(ConfigMap::parse_string(
          "schema_version = 1\nmode = converge\nproblem.name = linear1d\n")),
      std::invalid_argument);
}

TEST_CASE("config echo round-trips through the parser") {
  ConfigMap map = preset("example2-desk");
  map.set("mode", "solve");
  ExperimentConfig cfg = ExperimentConfig::from_map(map);
  ConfigMap echoed = cfg.echo();
  std::string text;
  for (const auto& [k, v] : echoed.entries) text += k + " = " + v.value + "\n";
  ExperimentConfig cfg2 = ExperimentConfig::from_map(ConfigMap::parse_string(text));
  CHECK(cfg2.problem_name == cfg.problem_name);
  CHECK(cfg2.dim == cfg.dim);
  CHECK(cfg2.grid_N == cfg.grid_N);
  CHECK(cfg2.train.iterations == cfg.train.iterations);
  CHECK(cfg2.train.lr.start_rate == cfg.train.lr.start_rate);
  CHECK(cfg2.train.lr.end_rate == cfg.train.lr.end_rate);
  CHECK(cfg2.train.seed == cfg.train.seed);
  CHECK(cfg2.train.batchnorm == cfg.train.batchnorm);
  CHECK(cfg2.runs == cfg.runs);
}

TEST_CASE("presets exist and pin the benchmark shapes") {
  for (const auto& name : preset_names()) CHECK_NOTHROW(preset(name));
  CHECK_THROWS_AS(preset("example3-paper"), std::invalid_argument);

  ExperimentConfig e1 = ExperimentConfig::from_map(preset("example1-paper"));
  CHECK(e1.dim == 100);
  CHECK(e1.grid_N == 160);
  CHECK(e1.train.iterations == 25000);
  CHECK(e1.train.lr.start_rate == 1e-2);
  CHECK(e1.train.lr.end_rate == 1e-5);
  CHECK(e1.runs == 5);
  CHECK(e1.train.mu0_lo == 2.0);
  CHECK(e1.train.mu0_hi == 4.0);

  ExperimentConfig e2 = ExperimentConfig::from_map(preset("example2-paper"));
  CHECK(e2.dim == 100);
  CHECK(e2.grid_N == 200);
  CHECK(e2.train.iterations == 5000);
  CHECK(e2.train.lr.end_rate == 1e-3);

  ExperimentConfig d2 = ExperimentConfig::from_map(preset("example2-desk"));
  CHECK(d2.dim == 10);
  CHECK(d2.grid_N == 40);
  CHECK(d2.train.iterations == 2000);
  CHECK(d2.runs == 3);

  ExperimentConfig d1 = ExperimentConfig::from_map(preset("example1-desk"));
  CHECK(d1.dim == 10);
  CHECK(d1.grid_N == 40);
  CHECK(d1.train.iterations == 3000);
}

TEST_CASE("csv reader surfaces missing columns by name") {
  TempDir dir("bsde_csv_test");
  const std::string file = dir.str() + "/t.csv";
  std::ofstream(file) << "a,b\n1,2\n3,4\n";
  CsvTable t = read_csv(file);
  CHECK(t.column("b") == 1);
  CHECK_THROWS_WITH_AS(t.column("zz"), doctest::Contains("zz"), std::runtime_error);
  CHECK(t.rows.size() == 2);
}

TEST_CASE("audit experiment writes artifacts and sets the exit code") {
  TempDir dir("bsde_audit_test");
  ConfigMap map = ConfigMap::parse_string(
      "schema_version = 1\nmode = audit\naudit.K = 1\naudit.g_x = 0.5\naudit.f_x = 0.5\n"
      "audit.T = 1\noutput.dir = " +
      dir.str() + "\n");
  ExperimentConfig cfg = ExperimentConfig::from_map(map);
  CHECK(run_experiment(cfg) == 0);  // decoupled constants hold
  CHECK(fs::exists(dir.path / "audit.csv"));
  CHECK(fs::exists(dir.path / "audit.json"));
  CHECK(fs::exists(dir.path / "manifest.json"));
  const std::string csv = slurp(dir.str() + "/audit.csv");
  CHECK(csv.find("L0,L1,c,lambda1_star,holds") != std::string::npos);

  // Strong coupling: conditions fail, nonzero exit.
  ConfigMap bad = ConfigMap::parse_string(
      "schema_version = 1\nmode = audit\naudit.K = 1\naudit.b_y = 1\naudit.sigma_y = 1\n"
      "audit.g_x = 1\naudit.f_x = 1\naudit.sigma_x = 1\naudit.f_z = 1\naudit.T = 1\n"
      "output.dir = " +
      dir.str() + "\n");
  CHECK(run_experiment(ExperimentConfig::from_map(bad)) == 1);
}

TEST_CASE("solve experiment produces the documented artifacts") {
  TempDir dir("bsde_solve_test");
  ConfigMap map = preset("linear1d-smoke");
  map.set("mode", "solve");
  map.set("train.iterations", "60");
  map.set("train.checkpoint_every", "20");
  map.set("output.dir", dir.str());
  map.set("deterministic", "true");
  ExperimentConfig cfg = ExperimentConfig::from_map(map);
  CHECK(run_experiment(cfg) == 0);
  CHECK(fs::exists(dir.path / "training_run0.csv"));
  CHECK(fs::exists(dir.path / "training_aggregate.csv"));
  CHECK(fs::exists(dir.path / "report.json"));
  CHECK(fs::exists(dir.path / "policy_run0.ckpt"));
  CsvTable t = read_csv(dir.str() + "/training_run0.csv");
  CHECK(t.header == std::vector<std::string>{"step", "lr", "val_loss", "y0_estimate",
                                             "rel_error", "wall_s"});
  CHECK(t.rows.size() == 4);  // in-loop checkpoints 0,20,40 plus the final step 60
}

TEST_CASE("cli end to end: determinism of training csv bytes") {
  TempDir a("bsde_cli_det_a"), b("bsde_cli_det_b");
  const std::string common =
      "solve --preset linear1d-smoke --deterministic --seed 5 --out ";
  REQUIRE(run_cli(common + a.str()) == 0);
  REQUIRE(run_cli(common + b.str()) == 0);
  CHECK(slurp(a.str() + "/training_run0.csv") == slurp(b.str() + "/training_run0.csv"));
  CHECK(slurp(a.str() + "/training_aggregate.csv") == slurp(b.str() + "/training_aggregate.csv"));
}

TEST_CASE("cli rejects malformed configs with a nonzero exit") {
  TempDir dir("bsde_cli_bad");
  const std::string cfg_path = dir.str() + "/bad.cfg";
  std::ofstream(cfg_path) << "schema_version = 1\nmode = solve\nproblem.name = linear1d\n"
                          << "grid.N = -4\n";
  CHECK(run_cli("solve --config " + cfg_path + " --out " + dir.str()) != 0);
  CHECK(run_cli("solve --out " + dir.str()) != 0);  // neither preset nor config
}

TEST_CASE("plots are rebuilt from the csv artifacts alone") {
  TempDir dir("bsde_plot_test");
  {
    std::ofstream agg(dir.str() + "/training_aggregate.csv");
    agg << "step,lr,val_loss_mean,val_loss_sd,rel_error_mean,rel_error_sd,y0_mean,y0_sd\n";
    for (int s = 0; s <= 500; s += 100)
      agg << s << ",0.01," << 1.0 / (1 + s) << "," << 0.1 / (1 + s) << "," << 0.5 / (1 + s)
          << "," << 0.05 / (1 + s) << ",1,0\n";
    std::ofstream conv(dir.str() + "/convergence.csv");
    conv << "N,h,mean_rel_error,sd_rel_error\n10,0.1,0.02,0.005\n20,0.05,0.012,0.004\n"
         << "40,0.025,0.007,0.002\n";
  }
  auto written = emit_plots(dir.str());
  CHECK(written.size() == 3);
  for (const auto& f : written) CHECK(fs::exists(f));
  const std::string svg = slurp(dir.str() + "/loss_vs_step.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);
  CHECK(svg.find("polygon") != std::string::npos);  // the mean +- SD band

  // A directory without the expected CSVs is an error.
  TempDir empty("bsde_plot_empty");
  CHECK_THROWS_AS(emit_plots(empty.str()), std::runtime_error);
}

TEST_CASE("single-run aggregate has zero band width") {
  TempDir dir("bsde_plot_single");
  std::ofstream agg(dir.str() + "/training_aggregate.csv");
  agg << "step,lr,val_loss_mean,val_loss_sd,rel_error_mean,rel_error_sd,y0_mean,y0_sd\n"
      << "0,0.01,1,0,0.5,0,1,0\n100,0.01,0.5,0,0.2,0,1,0\n";
  agg.close();
  auto written = emit_plots(dir.str());
  CHECK(!written.empty());
}
