#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bsde/oracle.hpp"
#include "bsde/trainer.hpp"

namespace bsde {

/// Flat dotted-key configuration ("a.b.c = value"), '#' comments, schema
/// versioned. Parsing keeps line numbers so validation errors can point at
/// the offending entry; unknown keys are rejected.
struct ConfigMap {
  struct Entry {
    std::string value;
    int line = 0;
  };
  std::map<std::string, Entry> entries;

  static ConfigMap parse_string(const std::string& text);
  static ConfigMap parse_file(const std::string& path);

  bool has(const std::string& key) const { return entries.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { entries[key] = {value, 0}; }
  /// Overlay: other's entries override this map's.
  void merge_from(const ConfigMap& other);
};

enum class ExperimentMode { solve, converge, audit, oracle, crosscheck };

struct ExperimentConfig {
  ExperimentMode mode = ExperimentMode::solve;

  // problem.*
  std::string problem_name = "linear1d";
  std::int64_t dim = 1;
  double linear1d_xi = 1.0;
  Example2Params example2;

  std::int64_t grid_N = 10;
  TrainConfig train;
  int runs = 1;
  std::vector<std::int64_t> converge_N_list;

  OracleConfig oracle;

  ProblemConstants audit_constants;

  std::string output_dir = "out";
  bool dump_paths = false;
  bool deterministic = false;

  static ExperimentConfig from_map(const ConfigMap& map);
  /// Full resolved key set; parsing it back reproduces this config.
  ConfigMap echo() const;

  FbsdeProblem make_problem() const;
};

/// Built-in experiment presets:
///   example1-paper, example2-paper, example1-desk, example2-desk,
///   linear1d-smoke.
ConfigMap preset(const std::string& name);
std::vector<std::string> preset_names();

/// Parses, validates, dispatches and writes all artifacts into the output
/// directory (manifest, CSVs, structured reports). Returns the process exit
/// code: 0 on success, and for audit mode 0 iff the conditions hold.
int run_experiment(const ExperimentConfig& cfg);

}  // namespace bsde
