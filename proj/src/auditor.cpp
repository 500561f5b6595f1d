#include "bsde/auditor.hpp"

#include <cmath>

namespace bsde::audit {

double gamma0(double x) {
  if (std::abs(x) < 1e-6) return 1.0 + x / 2.0 + x * x / 6.0 + x * x * x / 24.0;
  return std::expm1(x) / x;
}

double theta_sup(double x) {
  // theta e^{theta x} increases on (0,1) when x >= -1 (sup at theta -> 1);
  // otherwise the interior stationary point theta = -1/x wins.
  if (x >= -1.0) return std::exp(x);
  return (-1.0 / x) * std::exp(-1.0);
}

double gamma1(double x, double y) { return theta_sup(x) * gamma0(y); }

CouplingConstants compute_L0_L1(const ProblemConstants& k) {
  const double coupling = (k.b_y + k.sigma_y) * (k.g_x + k.f_x * k.T);
  const double rate = (2.0 * k.k_b + 2.0 * k.k_f + 2.0 + k.sigma_x + k.f_z) * k.T;
  CouplingConstants out;
  out.L0 = (k.b_y + k.sigma_y) * (k.g_x + k.f_x * k.T) * k.T *
           std::exp(coupling * k.T + rate);
  out.L1 = (k.g_x + k.f_x * k.T) * std::max(std::exp(coupling * k.T + rate + 1.0), 1.0);
  return out;
}

double c_at_lambda1(const ProblemConstants& k, double L1, double lambda1) {
  const double by_sy = k.b_y + k.sigma_y;
  const double arg_f = (2.0 * k.k_f + 1.0 + k.f_z) * k.T;
  const double arg_b = (2.0 * k.k_b + 1.0 + k.sigma_x + (1.0 + lambda1) * by_sy * L1) * k.T;
  const double prefactor =
      std::max(std::exp((2.0 * k.k_b + 1.0 + k.sigma_x + by_sy * L1) * k.T), 1.0) *
      (1.0 + 1.0 / lambda1) * by_sy * k.T;
  const double bracket = k.g_x * gamma1(arg_f, arg_b) + k.f_x * k.T * gamma0(arg_f) * gamma0(arg_b);
  return prefactor * bracket;
}

namespace {

/// Golden-section minimize over [lo, hi]; assumes a locally unimodal f.
double golden_min(const std::function<double(double)>& f, double lo, double hi, double rel_tol,
                  double* xmin) {
  const double inv_phi = 0.6180339887498948482;
  double a = lo, b = hi;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (std::abs(b - a) > rel_tol * (std::abs(x1) + std::abs(x2)) + 1e-300) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    }
  }
  if (f1 < f2) {
    *xmin = x1;
    return f1;
  }
  *xmin = x2;
  return f2;
}

}  // namespace

CInfimum compute_c(const ProblemConstants& k) {
  k.validate();
  const CouplingConstants l = compute_L0_L1(k);
  auto value = [&](double log_lambda) { return c_at_lambda1(k, l.L1, std::exp(log_lambda)); };

  const double log_lo = std::log(1e-6), log_hi = std::log(1e6);
  const int n_scan = 512;
  int best = 0;
  double best_v = value(log_lo);
  for (int i = 1; i <= n_scan; ++i) {
    const double x = log_lo + (log_hi - log_lo) * i / n_scan;
    const double v = value(x);
    if (v < best_v) {
      best_v = v;
      best = i;
    }
  }
  const double step = (log_hi - log_lo) / n_scan;
  const double a = log_lo + step * std::max(0, best - 1);
  const double b = log_lo + step * std::min(n_scan, best + 1);
  double xmin = 0.0;
  double c = golden_min(value, a, b, 1e-8, &xmin);
  if (best_v < c) {  // guard against a flat bracket
    c = best_v;
    xmin = log_lo + step * best;
  }
  CInfimum out;
  out.c = c;
  out.lambda1_star = std::exp(xmin);
  out.boundary_warning = (best == 0 || best == n_scan) && c > 0.0;
  return out;
}

AuditReport check_conditions(const ProblemConstants& k) {
  k.validate();
  const CouplingConstants l = compute_L0_L1(k);
  const CInfimum ci = compute_c(k);
  AuditReport r;
  r.L0 = l.L0;
  r.L1 = l.L1;
  r.c = ci.c;
  r.lambda1_star = ci.lambda1_star;
  const double e_inv = std::exp(-1.0);
  r.holds = r.L0 < e_inv && r.c < 1.0;
  r.margin = std::min(e_inv - r.L0, 1.0 - r.c);
  r.boundary_warning = ci.boundary_warning;
  return r;
}

}  // namespace bsde::audit
