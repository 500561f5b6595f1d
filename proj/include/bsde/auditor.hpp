#pragma once

#include "bsde/problem.hpp"

namespace bsde::audit {

/// (e^x - 1)/x, continued through 0 by its series.
double gamma0(double x);

/// sup over theta in (0,1) of theta * e^(theta x); closed form e^x for
/// x >= -1 and (-1/x) e^{-1} below.
double theta_sup(double x);

/// sup over theta in (0,1) of theta e^{theta x} Gamma_0(y).
double gamma1(double x, double y);

struct CouplingConstants {
  double L0;
  double L1;
};

CouplingConstants compute_L0_L1(const ProblemConstants& k);

/// The coupling functional at a fixed lambda1 (before the infimum); exposed
/// so brute-force grid oracles can cross-check the minimizer.
double c_at_lambda1(const ProblemConstants& k, double L1, double lambda1);

struct CInfimum {
  double c;
  double lambda1_star;
  bool boundary_warning;  // minimizer pinned at the search-range edge
};

/// inf over lambda1 > 0, via a coarse log-spaced scan of [1e-6, 1e6]
/// refined by golden-section search to relative tolerance 1e-8.
CInfimum compute_c(const ProblemConstants& k);

struct AuditReport {
  double L0;
  double L1;
  double c;
  double lambda1_star;
  bool holds;     // L0 < e^{-1} and c < 1
  double margin;  // min(e^{-1} - L0, 1 - c)
  bool boundary_warning;
};

AuditReport check_conditions(const ProblemConstants& k);

}  // namespace bsde::audit
