#include "bsde/report_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bsde/config.hpp"
#include "bsde/version.hpp"

namespace bsde {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot open for writing: " + file);
  return out;
}

}  // namespace

void write_training_csv(const TrainingReport& report, const std::string& file) {
  auto out = open_out(file);
  out << "step,lr,val_loss,y0_estimate,rel_error,wall_s\n";
  for (const auto& r : report.records) {
    out << r.step << ',' << format_double(r.lr) << ',' << format_double(r.val_loss) << ','
        << format_double(r.y0_estimate) << ',' << format_double(r.rel_error) << ','
        << format_double(r.wall_s) << "\n";
  }
}

void write_aggregate_csv(const MultiRunReport& report, const std::string& file) {
  auto out = open_out(file);
  out << "step,lr,val_loss_mean,val_loss_sd,rel_error_mean,rel_error_sd,y0_mean,y0_sd\n";
  for (const auto& a : report.aggregate) {
    out << a.step << ',' << format_double(a.lr) << ',' << format_double(a.val_loss_mean) << ','
        << format_double(a.val_loss_sd) << ',' << format_double(a.rel_error_mean) << ','
        << format_double(a.rel_error_sd) << ',' << format_double(a.y0_mean) << ','
        << format_double(a.y0_sd) << "\n";
  }
}

void write_convergence_csv(const std::vector<ConvergenceRow>& rows, const std::string& file) {
  auto out = open_out(file);
  out << "N,h,mean_rel_error,sd_rel_error\n";
  for (const auto& r : rows)
    out << r.N << ',' << format_double(r.h) << ',' << format_double(r.mean_rel_error) << ','
        << format_double(r.sd_rel_error) << "\n";
}

void write_audit_csv(const ProblemConstants& k, const audit::AuditReport& report,
                     const std::string& file) {
  auto out = open_out(file);
  out << "k_b,k_f,K,b_y,sigma_x,sigma_y,f_x,f_z,g_x,T,L0,L1,c,lambda1_star,holds\n";
  for (double v : {k.k_b, k.k_f, k.K, k.b_y, k.sigma_x, k.sigma_y, k.f_x, k.f_z, k.g_x, k.T})
    out << format_double(v) << ',';
  out << format_double(report.L0) << ',' << format_double(report.L1) << ','
      << format_double(report.c) << ',' << format_double(report.lambda1_star) << ','
      << (report.holds ? 1 : 0) << "\n";
}

void write_oracle_csv(const OracleSolution& sol, const TimeGrid& grid, const std::string& file) {
  auto out = open_out(file);
  const std::int64_t nf = sol.y_coef.empty() ? 0 : sol.y_coef[1 % sol.y_coef.size()].rows;
  const std::int64_t d = sol.z_coef.empty() ? 0 : sol.z_coef[1 % sol.z_coef.size()].cols;
  out << "step,t";
  for (std::int64_t k = 0; k < nf; ++k) out << ",y_c" << k;
  for (std::int64_t j = 0; j < d; ++j)
    for (std::int64_t k = 0; k < nf; ++k) out << ",z" << j << "_c" << k;
  out << "\n";
  for (std::size_t i = 0; i < sol.y_coef.size(); ++i) {
    out << i << ',' << format_double(grid.knot(static_cast<std::int64_t>(i)));
    // Step 0 regressions are intercept-only (deterministic initial state);
    // pad the higher-order coefficients with zeros.
    for (std::int64_t k = 0; k < nf; ++k) {
      const double v = k < sol.y_coef[i].rows ? sol.y_coef[i].at(k, 0) : 0.0;
      out << ',' << format_double(v);
    }
    for (std::int64_t j = 0; j < d; ++j)
      for (std::int64_t k = 0; k < nf; ++k) {
        const double v = k < sol.z_coef[i].rows ? sol.z_coef[i].at(k, j) : 0.0;
        out << ',' << format_double(v);
      }
    out << "\n";
  }
}

namespace {

json config_echo_json(const ExperimentConfig& cfg) {
  json j;
  for (const auto& [key, entry] : cfg.echo().entries) j[key] = entry.value;
  return j;
}

json run_summary_json(const TrainingReport& r) {
  json j;
  j["seed"] = r.seed;
  j["final_step"] = r.final_record().step;
  j["final_val_loss"] = r.final_record().val_loss;
  j["final_y0"] = r.final_record().y0_estimate;
  j["final_rel_error"] = r.final_record().rel_error;
  j["diverged"] = r.diverged;
  j["hit_time_limit"] = r.hit_time_limit;
  j["skipped_steps"] = r.skipped_steps;
  j["certificate"] = {{"loss", r.final_certificate.loss}, {"h", r.final_certificate.h}};
  return j;
}

}  // namespace

void write_solve_report_json(const ExperimentConfig& cfg, const MultiRunReport& report,
                             const std::string& file) {
  json j;
  j["config"] = config_echo_json(cfg);
  j["runs"] = json::array();
  for (const auto& r : report.runs) j["runs"].push_back(run_summary_json(r));
  j["final_rel_error_mean"] = report.final_rel_error_mean;
  j["final_rel_error_sd"] = report.final_rel_error_sd;
  if (!report.runs.empty() && report.runs.front().has_reference)
    j["y0_reference"] = report.runs.front().y0_reference;
  auto out = open_out(file);
  out << j.dump(2) << "\n";
}

void write_audit_report_json(const ProblemConstants& k, const audit::AuditReport& report,
                             const std::string& file) {
  json j;
  j["constants"] = {{"k_b", k.k_b},     {"k_f", k.k_f},         {"K", k.K},
                    {"b_y", k.b_y},     {"sigma_x", k.sigma_x}, {"sigma_y", k.sigma_y},
                    {"f_x", k.f_x},     {"f_z", k.f_z},         {"g_x", k.g_x},
                    {"b_0", k.b_0},     {"sigma_0", k.sigma_0}, {"f_0", k.f_0},
                    {"g_0", k.g_0},     {"T", k.T}};
  j["L0"] = report.L0;
  j["L1"] = report.L1;
  j["c"] = report.c;
  j["lambda1_star"] = report.lambda1_star;
  j["holds"] = report.holds;
  j["margin"] = report.margin;
  j["boundary_warning"] = report.boundary_warning;
  auto out = open_out(file);
  out << j.dump(2) << "\n";
}

void write_oracle_report_json(const OracleSolution& sol, const std::string& file) {
  json j;
  j["y0"] = sol.y0;
  j["y0_se"] = sol.y0_se;
  j["z0"] = sol.z0;
  j["n_paths"] = sol.n_paths;
  j["sweeps_used"] = sol.sweeps_used;
  j["converged"] = sol.converged;
  j["any_regularized"] = sol.any_regularized;
  j["sweep_residuals"] = sol.sweep_residuals;
  auto out = open_out(file);
  out << j.dump(2) << "\n";
}

void write_crosscheck_report_json(const CrossCheckReport& report, const std::string& file) {
  json j;
  j["y0_deep"] = report.y0_deep;
  j["y0_oracle"] = report.y0_oracle;
  j["abs_gap"] = report.abs_gap;
  j["rel_gap"] = report.rel_gap;
  if (report.analytic) {
    j["analytic"] = *report.analytic;
    j["deep_rel_error"] = *report.deep_rel_error;
    j["oracle_rel_error"] = *report.oracle_rel_error;
  }
  auto out = open_out(file);
  out << j.dump(2) << "\n";
}

void write_manifest(const ExperimentConfig& cfg, const std::string& file) {
  json j;
  j["schema_version"] = 1;
  j["config"] = config_echo_json(cfg);
  j["build"] = {{"version", kVersion},
                {"compiler", __VERSION__},
                {"openmp", kernels::openmp_compiled()},
                {"backend", kernels::backend() == kernels::Backend::openmp ? "openmp" : "serial"}};
  auto out = open_out(file);
  out << j.dump(2) << "\n";
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  throw std::runtime_error("csv: missing column '" + name + "'");
}

CsvTable read_csv(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file);
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    if (first) {
      while (std::getline(ss, cell, ',')) t.header.push_back(cell);
      first = false;
      continue;
    }
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace bsde
