#include "bsde/config.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "bsde/checkpoint.hpp"
#include "bsde/report_io.hpp"

namespace bsde {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::string& key, int line, const std::string& what) {
  std::ostringstream ss;
  ss << "config: field '" << key << "'";
  if (line > 0) ss << " (line " << line << ")";
  ss << ": " << what;
  throw std::invalid_argument(ss.str());
}

}  // namespace

ConfigMap ConfigMap::parse_string(const std::string& text) {
  ConfigMap map;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("config: line " + std::to_string(lineno) + ": empty key");
    map.entries[key] = {value, lineno};
  }
  return map;
}

ConfigMap ConfigMap::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

void ConfigMap::merge_from(const ConfigMap& other) {
  for (const auto& [k, v] : other.entries) entries[k] = v;
}

namespace {

/// Typed reader over a ConfigMap that tracks which keys were consumed.
struct Reader {
  const ConfigMap& map;
  std::set<std::string> seen;

  bool has(const std::string& key) {
    if (map.has(key)) {
      seen.insert(key);
      return true;
    }
    return false;
  }
  const ConfigMap::Entry& raw(const std::string& key) { return map.entries.at(key); }

  std::string str(const std::string& key, const std::string& fallback) {
    return has(key) ? raw(key).value : fallback;
  }
  std::string required(const std::string& key) {
    if (!has(key)) throw std::invalid_argument("config: missing required field '" + key + "'");
    return raw(key).value;
  }
  double num(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const auto& e = raw(key);
    char* end = nullptr;
    const double v = std::strtod(e.value.c_str(), &end);
    if (end == e.value.c_str() || *end != '\0') fail(key, e.line, "not a number: '" + e.value + "'");
    return v;
  }
  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    const double v = num(key, static_cast<double>(fallback));
    if (v != std::floor(v)) fail(key, map.has(key) ? raw(key).line : 0, "not an integer");
    return static_cast<std::int64_t>(v);
  }
  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& e = raw(key);
    if (e.value == "true" || e.value == "1") return true;
    if (e.value == "false" || e.value == "0") return false;
    fail(key, e.line, "expected true/false");
  }
  std::vector<std::int64_t> int_list(const std::string& key) {
    std::vector<std::int64_t> out;
    if (!has(key)) return out;
    const auto& e = raw(key);
    std::stringstream ss(e.value);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cell = trim(cell);
      if (cell.empty()) continue;
      char* end = nullptr;
      const long long v = std::strtoll(cell.c_str(), &end, 10);
      if (end == cell.c_str() || *end != '\0') fail(key, e.line, "bad list entry '" + cell + "'");
      out.push_back(v);
    }
    if (out.empty()) fail(key, e.line, "empty list");
    return out;
  }
};

}  // namespace

ExperimentConfig ExperimentConfig::from_map(const ConfigMap& map) {
  Reader r{map, {}};
  ExperimentConfig cfg;

  const std::int64_t schema = r.integer("schema_version", -1);
  if (schema != 1) throw std::invalid_argument("config: schema_version must be 1");

  const std::string mode = r.required("mode");
  if (mode == "solve")
    cfg.mode = ExperimentMode::solve;
  else if (mode == "converge")
    cfg.mode = ExperimentMode::converge;
  else if (mode == "audit")
    cfg.mode = ExperimentMode::audit;
  else if (mode == "oracle")
    cfg.mode = ExperimentMode::oracle;
  else if (mode == "crosscheck")
    cfg.mode = ExperimentMode::crosscheck;
  else
    fail("mode", r.raw("mode").line, "unknown mode '" + mode + "'");

  cfg.problem_name = r.str("problem.name", cfg.problem_name);
  cfg.dim = r.integer("problem.dim", cfg.dim);
  if (cfg.dim < 1) fail("problem.dim", 0, "must be >= 1");
  cfg.linear1d_xi = r.num("problem.xi", cfg.linear1d_xi);
  cfg.example2.sigma = r.num("problem.sigma", cfg.example2.sigma);
  cfg.example2.r = r.num("problem.r", cfg.example2.r);
  cfg.example2.D = r.num("problem.D", cfg.example2.D);

  cfg.grid_N = r.integer("grid.N", cfg.grid_N);
  if (cfg.grid_N < 1) fail("grid.N", map.has("grid.N") ? r.raw("grid.N").line : 0, "must be >= 1");

  cfg.train.iterations = r.integer("train.iterations", cfg.train.iterations);
  cfg.train.batch_size = r.integer("train.batch_size", cfg.train.batch_size);
  cfg.train.validation_paths = r.integer("train.validation_paths", cfg.train.validation_paths);
  cfg.train.lr.start_rate = r.num("train.lr_start", cfg.train.lr.start_rate);
  cfg.train.lr.end_rate = r.num("train.lr_end", cfg.train.lr.end_rate);
  cfg.train.lr.decay_interval = r.integer("train.lr_decay_interval", cfg.train.lr.decay_interval);
  cfg.train.seed = static_cast<std::uint64_t>(r.integer("train.seed", 1));
  cfg.train.mu0_lo = r.num("train.mu0_lo", cfg.train.mu0_lo);
  cfg.train.mu0_hi = r.num("train.mu0_hi", cfg.train.mu0_hi);
  cfg.train.checkpoint_every = r.integer("train.checkpoint_every", cfg.train.checkpoint_every);
  cfg.train.batchnorm = r.boolean("train.batchnorm", cfg.train.batchnorm);
  cfg.train.max_seconds = r.num("train.max_seconds", cfg.train.max_seconds);
  const std::string layout = r.str("train.input_layout", "xy");
  if (layout == "xy")
    cfg.train.layout = InputLayout::xy;
  else if (layout == "x")
    cfg.train.layout = InputLayout::x_only;
  else
    fail("train.input_layout", r.raw("train.input_layout").line, "expected xy or x");
  const std::string init = r.str("train.init", "uniform");
  if (init == "uniform")
    cfg.train.init = InitScheme::uniform;
  else if (init == "normal")
    cfg.train.init = InitScheme::normal;
  else
    fail("train.init", r.raw("train.init").line, "expected uniform or normal");

  cfg.runs = static_cast<int>(r.integer("runs", cfg.runs));
  if (cfg.runs < 1) fail("runs", 0, "must be >= 1");
  cfg.converge_N_list = r.int_list("converge.N_list");

  cfg.oracle.basis.degree = static_cast<int>(r.integer("oracle.degree", cfg.oracle.basis.degree));
  cfg.oracle.n_paths = r.integer("oracle.n_paths", cfg.oracle.n_paths);
  cfg.oracle.picard_tol = r.num("oracle.picard_tol", cfg.oracle.picard_tol);
  cfg.oracle.max_sweeps = static_cast<int>(r.integer("oracle.max_sweeps", cfg.oracle.max_sweeps));
  cfg.oracle.seed = static_cast<std::uint64_t>(r.integer("oracle.seed", 7));

  cfg.audit_constants.k_b = r.num("audit.k_b", 0.0);
  cfg.audit_constants.k_f = r.num("audit.k_f", 0.0);
  cfg.audit_constants.K = r.num("audit.K", 0.0);
  cfg.audit_constants.b_y = r.num("audit.b_y", 0.0);
  cfg.audit_constants.sigma_x = r.num("audit.sigma_x", 0.0);
  cfg.audit_constants.sigma_y = r.num("audit.sigma_y", 0.0);
  cfg.audit_constants.f_x = r.num("audit.f_x", 0.0);
  cfg.audit_constants.f_z = r.num("audit.f_z", 0.0);
  cfg.audit_constants.g_x = r.num("audit.g_x", 0.0);
  cfg.audit_constants.b_0 = r.num("audit.b_0", 0.0);
  cfg.audit_constants.sigma_0 = r.num("audit.sigma_0", 0.0);
  cfg.audit_constants.f_0 = r.num("audit.f_0", 0.0);
  cfg.audit_constants.g_0 = r.num("audit.g_0", 0.0);
  cfg.audit_constants.T = r.num("audit.T", 1.0);

  cfg.output_dir = r.str("output.dir", cfg.output_dir);
  cfg.dump_paths = r.boolean("output.dump_paths", cfg.dump_paths);
  cfg.deterministic = r.boolean("deterministic", cfg.deterministic);
  cfg.train.deterministic = cfg.deterministic;

  for (const auto& [key, entry] : map.entries)
    if (!r.seen.count(key)) fail(key, entry.line, "unknown key");

  // Mode-specific requirements.
  if (cfg.mode == ExperimentMode::converge && cfg.converge_N_list.empty())
    throw std::invalid_argument("config: converge mode requires converge.N_list");
  if (cfg.mode != ExperimentMode::audit) {
    if (cfg.problem_name != "example1" && cfg.problem_name != "example2" &&
        cfg.problem_name != "linear1d")
      fail("problem.name", 0, "unknown problem '" + cfg.problem_name + "'");
    cfg.train.validate();
  } else {
    cfg.audit_constants.validate();
  }
  return cfg;
}

ConfigMap ExperimentConfig::echo() const {
  ConfigMap m;
  auto put_num = [&](const std::string& k, double v) { m.set(k, format_double(v)); };
  auto put_int = [&](const std::string& k, std::int64_t v) { m.set(k, std::to_string(v)); };
  m.set("schema_version", "1");
  switch (mode) {
    case ExperimentMode::solve: m.set("mode", "solve"); break;
    case ExperimentMode::converge: m.set("mode", "converge"); break;
    case ExperimentMode::audit: m.set("mode", "audit"); break;
    case ExperimentMode::oracle: m.set("mode", "oracle"); break;
    case ExperimentMode::crosscheck: m.set("mode", "crosscheck"); break;
  }
  m.set("problem.name", problem_name);
  put_int("problem.dim", dim);
  put_num("problem.xi", linear1d_xi);
  put_num("problem.sigma", example2.sigma);
  put_num("problem.r", example2.r);
  put_num("problem.D", example2.D);
  put_int("grid.N", grid_N);
  put_int("train.iterations", train.iterations);
  put_int("train.batch_size", train.batch_size);
  put_int("train.validation_paths", train.validation_paths);
  put_num("train.lr_start", train.lr.start_rate);
  put_num("train.lr_end", train.lr.end_rate);
  put_int("train.lr_decay_interval", train.lr.decay_interval);
  put_int("train.seed", static_cast<std::int64_t>(train.seed));
  put_num("train.mu0_lo", train.mu0_lo);
  put_num("train.mu0_hi", train.mu0_hi);
  put_int("train.checkpoint_every", train.checkpoint_every);
  put_num("train.max_seconds", train.max_seconds);
  m.set("train.input_layout", train.layout == InputLayout::xy ? "xy" : "x");
  m.set("train.batchnorm", train.batchnorm ? "true" : "false");
  m.set("train.init", train.init == InitScheme::uniform ? "uniform" : "normal");
  put_int("runs", runs);
  if (!converge_N_list.empty()) {
    std::string list;
    for (std::size_t i = 0; i < converge_N_list.size(); ++i)
      list += (i ? "," : "") + std::to_string(converge_N_list[i]);
    m.set("converge.N_list", list);
  }
  put_int("oracle.degree", oracle.basis.degree);
  put_int("oracle.n_paths", oracle.n_paths);
  put_num("oracle.picard_tol", oracle.picard_tol);
  put_int("oracle.max_sweeps", oracle.max_sweeps);
  put_int("oracle.seed", static_cast<std::int64_t>(oracle.seed));
  if (mode == ExperimentMode::audit) {
    put_num("audit.k_b", audit_constants.k_b);
    put_num("audit.k_f", audit_constants.k_f);
    put_num("audit.K", audit_constants.K);
    put_num("audit.b_y", audit_constants.b_y);
    put_num("audit.sigma_x", audit_constants.sigma_x);
    put_num("audit.sigma_y", audit_constants.sigma_y);
    put_num("audit.f_x", audit_constants.f_x);
    put_num("audit.f_z", audit_constants.f_z);
    put_num("audit.g_x", audit_constants.g_x);
    put_num("audit.b_0", audit_constants.b_0);
    put_num("audit.sigma_0", audit_constants.sigma_0);
    put_num("audit.f_0", audit_constants.f_0);
    put_num("audit.g_0", audit_constants.g_0);
    put_num("audit.T", audit_constants.T);
  }
  m.set("output.dir", output_dir);
  m.set("output.dump_paths", dump_paths ? "true" : "false");
  m.set("deterministic", deterministic ? "true" : "false");
  return m;
}

FbsdeProblem ExperimentConfig::make_problem() const {
  return builtin_problem(problem_name, dim, example2, linear1d_xi);
}

ConfigMap preset(const std::string& name) {
  auto base = [](const std::string& problem, std::int64_t dim, std::int64_t N, std::int64_t iters,
                 double lr_start, double lr_end, double mu0_lo, double mu0_hi, int runs) {
    std::ostringstream ss;
    ss << "schema_version = 1\n"
       << "mode = solve\n"
       << "problem.name = " << problem << "\n"
       << "problem.dim = " << dim << "\n"
       << "grid.N = " << N << "\n"
       << "train.iterations = " << iters << "\n"
       << "train.batch_size = 64\n"
       << "train.validation_paths = 256\n"
       << "train.lr_start = " << lr_start << "\n"
       << "train.lr_end = " << lr_end << "\n"
       << "train.lr_decay_interval = 100\n"
       << "train.mu0_lo = " << mu0_lo << "\n"
       << "train.mu0_hi = " << mu0_hi << "\n"
       << "train.seed = 1\n"
       << "runs = " << runs << "\n";
    return ss.str();
  };
  std::string text;
  if (name == "example1-paper")
    text = base("example1", 100, 160, 25000, 1e-2, 1e-5, 2.0, 4.0, 5);
  else if (name == "example2-paper")
    text = base("example2", 100, 200, 5000, 1e-2, 1e-3, 0.0, 1.0, 5);
  else if (name == "example1-desk")
    text = base("example1", 10, 40, 3000, 1e-2, 1e-4, 2.0, 4.0, 3);
  else if (name == "example2-desk")
    text = base("example2", 10, 40, 2000, 1e-2, 1e-3, 0.0, 1.0, 3);
  else if (name == "linear1d-smoke")
    text = base("linear1d", 1, 10, 500, 1e-2, 1e-3, 0.0, 2.0, 1) +
           "train.batchnorm = false\noracle.degree = 1\noracle.n_paths = 50000\n";
  else
    throw std::invalid_argument("unknown preset '" + name + "'; available: example1-paper, "
                                "example2-paper, example1-desk, example2-desk, linear1d-smoke");
  return ConfigMap::parse_string(text);
}

std::vector<std::string> preset_names() {
  return {"example1-paper", "example2-paper", "example1-desk", "example2-desk", "linear1d-smoke"};
}

namespace {

void run_solve(const ExperimentConfig& cfg, const std::string& dir) {
  const FbsdeProblem problem = cfg.make_problem();
  const TimeGrid grid = TimeGrid::uniform(problem.horizon, cfg.grid_N);
  std::vector<SolverPolicy> policies;
  MultiRunReport report = multi_run(problem, grid, cfg.train, cfg.runs, &policies);
  for (std::size_t r = 0; r < report.runs.size(); ++r) {
    write_training_csv(report.runs[r], dir + "/training_run" + std::to_string(r) + ".csv");
    save_policy(dir + "/policy_run" + std::to_string(r) + ".ckpt", policies[r],
                report.runs[r].seed);
  }
  write_aggregate_csv(report, dir + "/training_aggregate.csv");
  write_solve_report_json(cfg, report, dir + "/report.json");
  if (cfg.dump_paths) {
    GaussianStream rng(derive_seed(cfg.train.seed, 99));
    Tape tape;
    RolloutOptions opts;
    opts.keep_paths = true;
    Rollout r = rollout(problem, grid, policies.front(), std::min<std::int64_t>(16, cfg.train.batch_size),
                        rng, opts, tape);
    export_paths_csv(r.paths, grid, dir + "/paths_run0.csv");
  }
}

void run_converge(const ExperimentConfig& cfg, const std::string& dir) {
  const FbsdeProblem problem = cfg.make_problem();
  auto rows = convergence_study(problem, cfg.train, cfg.converge_N_list, cfg.runs);
  write_convergence_csv(rows, dir + "/convergence.csv");
}

int run_audit(const ExperimentConfig& cfg, const std::string& dir) {
  const audit::AuditReport report = audit::check_conditions(cfg.audit_constants);
  write_audit_csv(cfg.audit_constants, report, dir + "/audit.csv");
  write_audit_report_json(cfg.audit_constants, report, dir + "/audit.json");
  return report.holds ? 0 : 1;
}

OracleSolution run_oracle(const ExperimentConfig& cfg, const std::string& dir) {
  const FbsdeProblem problem = cfg.make_problem();
  const TimeGrid grid = TimeGrid::uniform(problem.horizon, cfg.grid_N);
  OracleSolution sol = lsmc_implicit_solve(problem, grid, cfg.oracle);
  write_oracle_csv(sol, grid, dir + "/oracle.csv");
  write_oracle_report_json(sol, dir + "/oracle.json");
  return sol;
}

void run_crosscheck(const ExperimentConfig& cfg, const std::string& dir) {
  const FbsdeProblem problem = cfg.make_problem();
  const TimeGrid grid = TimeGrid::uniform(problem.horizon, cfg.grid_N);
  std::vector<SolverPolicy> policies;
  MultiRunReport solve_report = multi_run(problem, grid, cfg.train, cfg.runs, &policies);
  write_aggregate_csv(solve_report, dir + "/training_aggregate.csv");
  OracleSolution sol = run_oracle(cfg, dir);
  CrossCheckReport cross =
      oracle_cross_check(problem, solve_report.aggregate.back().y0_mean, sol);
  write_crosscheck_report_json(cross, dir + "/crosscheck.json");
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);
  if (cfg.deterministic) kernels::set_backend(kernels::Backend::serial);
  write_manifest(cfg, cfg.output_dir + "/manifest.json");
  switch (cfg.mode) {
    case ExperimentMode::solve: run_solve(cfg, cfg.output_dir); return 0;
    case ExperimentMode::converge: run_converge(cfg, cfg.output_dir); return 0;
    case ExperimentMode::audit: return run_audit(cfg, cfg.output_dir);
    case ExperimentMode::oracle: run_oracle(cfg, cfg.output_dir); return 0;
    case ExperimentMode::crosscheck: run_crosscheck(cfg, cfg.output_dir); return 0;
  }
  return 1;
}

}  // namespace bsde
