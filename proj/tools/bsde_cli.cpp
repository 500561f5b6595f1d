#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "bsde/config.hpp"
#include "bsde/svg_plot.hpp"
#include "bsde/version.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string preset_name;
  std::string out_dir;
  std::int64_t seed = -1;
  bool deterministic = false;
  double max_seconds = -1.0;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "Experiment config file");
  cmd->add_option("--preset", opts.preset_name, "Built-in preset name");
  cmd->add_option("--out", opts.out_dir, "Output directory");
  cmd->add_option("--seed", opts.seed, "Override train.seed");
  cmd->add_flag("--deterministic", opts.deterministic,
                "Serial kernels and zeroed wall-clock columns; byte-stable artifacts");
  cmd->add_option("--max-seconds", opts.max_seconds, "Wall-time budget per run");
}

bsde::ExperimentConfig assemble(const CommonOpts& opts, const std::string& mode) {
  bsde::ConfigMap map;
  bool have_source = false;
  if (!opts.preset_name.empty()) {
    map = bsde::preset(opts.preset_name);
    have_source = true;
  }
  if (!opts.config_path.empty()) {
    map.merge_from(bsde::ConfigMap::parse_file(opts.config_path));
    have_source = true;
  }
  if (!have_source) throw std::invalid_argument("need --preset and/or --config");
  map.set("mode", mode);
  if (opts.seed >= 0) map.set("train.seed", std::to_string(opts.seed));
  if (opts.deterministic) map.set("deterministic", "true");
  if (opts.max_seconds >= 0.0) map.set("train.max_seconds", std::to_string(opts.max_seconds));
  if (!opts.out_dir.empty()) map.set("output.dir", opts.out_dir);
  return bsde::ExperimentConfig::from_map(map);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep FBSDE solver: terminal-mismatch training, coupling audit, LSMC oracle"};
  app.set_version_flag("--version", bsde::kVersion);
  app.require_subcommand(1);

  CommonOpts opts;
  std::string plot_dir;

  auto* solve = app.add_subcommand("solve", "Train the solver on a problem preset/config");
  add_common(solve, opts);
  auto* converge = app.add_subcommand("converge", "Relative error against the grid size N");
  add_common(converge, opts);
  auto* audit = app.add_subcommand("audit", "Check the weak-coupling conditions (exit 0 iff they hold)");
  add_common(audit, opts);
  auto* oracle = app.add_subcommand("oracle", "Low-dimensional LSMC reference solve");
  add_common(oracle, opts);
  auto* crosscheck = app.add_subcommand("crosscheck", "Deep solver vs LSMC oracle on one problem");
  add_common(crosscheck, opts);
  auto* plot = app.add_subcommand("plot", "Render SVG charts from report CSVs");
  plot->add_option("--out", plot_dir, "Directory holding the report CSVs")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (plot->parsed()) {
      for (const auto& f : bsde::emit_plots(plot_dir)) std::printf("wrote %s\n", f.c_str());
      return 0;
    }
    std::string mode;
    if (solve->parsed()) mode = "solve";
    if (converge->parsed()) mode = "converge";
    if (audit->parsed()) mode = "audit";
    if (oracle->parsed()) mode = "oracle";
    if (crosscheck->parsed()) mode = "crosscheck";
    const bsde::ExperimentConfig cfg = assemble(opts, mode);
    const int rc = bsde::run_experiment(cfg);
    std::printf("artifacts in %s\n", cfg.output_dir.c_str());
    return rc;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
