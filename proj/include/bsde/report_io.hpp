#pragma once

#include <string>
#include <vector>

#include "bsde/auditor.hpp"
#include "bsde/oracle.hpp"
#include "bsde/trainer.hpp"

namespace bsde {

struct ExperimentConfig;  // config.hpp

// Fixed CSV schemas (documented in the README):
//   training:    step,lr,val_loss,y0_estimate,rel_error,wall_s
//   aggregate:   step,lr,val_loss_mean,val_loss_sd,rel_error_mean,
//                rel_error_sd,y0_mean,y0_sd
//   convergence: N,h,mean_rel_error,sd_rel_error
//   audit:       k_b,k_f,K,b_y,sigma_x,sigma_y,f_x,f_z,g_x,T,L0,L1,c,
//                lambda1_star,holds
void write_training_csv(const TrainingReport& report, const std::string& file);
void write_aggregate_csv(const MultiRunReport& report, const std::string& file);
void write_convergence_csv(const std::vector<ConvergenceRow>& rows, const std::string& file);
void write_audit_csv(const ProblemConstants& k, const audit::AuditReport& report,
                     const std::string& file);
void write_oracle_csv(const OracleSolution& sol, const TimeGrid& grid, const std::string& file);

void write_solve_report_json(const ExperimentConfig& cfg, const MultiRunReport& report,
                             const std::string& file);
void write_audit_report_json(const ProblemConstants& k, const audit::AuditReport& report,
                             const std::string& file);
void write_oracle_report_json(const OracleSolution& sol, const std::string& file);
void write_crosscheck_report_json(const CrossCheckReport& report, const std::string& file);
void write_manifest(const ExperimentConfig& cfg, const std::string& file);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;  // throws naming the column
};
CsvTable read_csv(const std::string& file);

/// "%.17g" rendering used for every CSV float, so equal doubles give equal
/// bytes.
std::string format_double(double v);

}  // namespace bsde
