#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bsde/auditor.hpp"
#include "bsde/rng.hpp"

using namespace bsde;
using namespace bsde::audit;

namespace {

/// Independent high-precision route for the closed forms, in long double.
long double gamma0_ld(long double x) {
  if (std::abs(x) < 1e-8L) return 1.0L + x / 2.0L + x * x / 6.0L;
  return expm1l(x) / x;
}

long double l0_ld(const ProblemConstants& k) {
  const long double coupling = (static_cast<long double>(k.b_y) + k.sigma_y) *
                               (static_cast<long double>(k.g_x) + k.f_x * k.T);
  const long double rate =
      (2.0L * k.k_b + 2.0L * k.k_f + 2.0L + k.sigma_x + k.f_z) * k.T;
  return coupling * k.T * expl(coupling * k.T + rate) /
         (static_cast<long double>(k.g_x) + k.f_x * k.T == 0.0L && coupling == 0.0L ? 1.0L : 1.0L);
}

long double l1_ld(const ProblemConstants& k) {
  const long double coupling = (static_cast<long double>(k.b_y) + k.sigma_y) *
                               (static_cast<long double>(k.g_x) + k.f_x * k.T);
  const long double rate =
      (2.0L * k.k_b + 2.0L * k.k_f + 2.0L + k.sigma_x + k.f_z) * k.T;
  return (static_cast<long double>(k.g_x) + k.f_x * k.T) *
         std::max(expl(coupling * k.T + rate + 1.0L), 1.0L);
}

/// Random sets kept in the regime where the coupling functional stays
/// finite (large constants overflow the nested exponentials to inf, which
/// the auditor reports as a failed condition but which makes a relative
/// grid comparison meaningless).
ProblemConstants random_constants(GaussianStream& rng) {
  ProblemConstants k;
  k.k_b = rng.uniform(-0.5, 0.3);
  k.k_f = rng.uniform(-0.5, 0.3);
  k.b_y = rng.uniform(0.0, 0.4);
  k.sigma_x = rng.uniform(0.0, 0.4);
  k.sigma_y = rng.uniform(0.0, 0.4);
  k.f_x = rng.uniform(0.0, 0.4);
  k.f_z = rng.uniform(0.0, 0.4);
  k.g_x = rng.uniform(0.0, 0.4);
  k.T = rng.uniform(0.2, 1.0);
  k.K = 0.5;
  return k;
}

/// Dense log-grid brute force over lambda1 for the infimum.
double c_grid_min(const ProblemConstants& k, int points, double* lambda_best = nullptr) {
  const CouplingConstants l = compute_L0_L1(k);
  const double lo = std::log(1e-6), hi = std::log(1e6);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= points; ++i) {
    const double lam = std::exp(lo + (hi - lo) * i / points);
    const double v = c_at_lambda1(k, l.L1, lam);
    if (v < best) {
      best = v;
      if (lambda_best) *lambda_best = lam;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("gamma0 values and series branch") {
  CHECK(gamma0(1.0) == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-14));
  CHECK(gamma0(2.0) ==
        doctest::Approx(static_cast<double>((expl(2.0L) - 1.0L) / 2.0L)).epsilon(1e-14));
  // Continuity at 0: the series branch agrees with the formula nearby.
  CHECK(gamma0(1e-9) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(gamma0(0.0) == 1.0);
  CHECK(gamma0(2e-6) == doctest::Approx(gamma0(1.9999e-6)).epsilon(1e-9));
  CHECK(gamma0(-0.5) == doctest::Approx(std::expm1(-0.5) / -0.5).epsilon(1e-14));
}

TEST_CASE("gamma1 closed form against a theta grid") {
  GaussianStream rng(5);
  // x = 0: sup of theta on (0,1) is 1, so gamma1 = gamma0(y).
  CHECK(gamma1(0.0, 0.7) == doctest::Approx(gamma0(0.7)).epsilon(1e-12));
  // x = -2: interior stationary point theta* = 1/2 of theta e^{-2 theta}.
  CHECK(gamma1(-2.0, 0.3) ==
        doctest::Approx(gamma0(0.3) * 0.5 * std::exp(-1.0)).epsilon(1e-12));

  for (int rep = 0; rep < 10; ++rep) {
    const double x = rng.uniform(-5.0, 3.0);
    const double y = rng.uniform(1e-3, 3.0);
    double grid_best = 0.0;
    const int n = 1000000;
    for (int i = 1; i < n; ++i) {
      const double theta = static_cast<double>(i) / n;
      grid_best = std::max(grid_best, theta * std::exp(theta * x) * gamma0(y));
    }
    // Boundary suprema (x >= -1) sit at theta -> 1; refine the grid tail so
    // the oracle resolves them to the comparison tolerance.
    for (int j = 6; j <= 14; ++j) {
      const double theta = 1.0 - std::pow(10.0, -j);
      grid_best = std::max(grid_best, theta * std::exp(theta * x) * gamma0(y));
    }
    CHECK(gamma1(x, y) == doctest::Approx(grid_best).epsilon(1e-6));
    CHECK(gamma1(x, y) >= grid_best - 1e-12);  // the sup dominates every sample
  }

  // Supremum dominates 1000 random theta draws.
  for (int rep = 0; rep < 1000; ++rep) {
    const double x = rng.uniform(-4.0, 2.0), y = rng.uniform(0.1, 2.0);
    const double theta = rng.uniform(1e-6, 1.0 - 1e-6);
    CHECK(gamma1(x, y) >= theta * std::exp(theta * x) * gamma0(y) - 1e-12);
  }
}

TEST_CASE("L0 and L1 against the independent high-precision route") {
  GaussianStream rng(7);
  // Decoupled limits.
  ProblemConstants k;
  k.K = 1.0;
  k.g_x = 0.5;
  k.f_x = 0.5;
  k.T = 1.0;
  CHECK(compute_L0_L1(k).L0 == 0.0);  // b_y = sigma_y = 0
  ProblemConstants k2;
  k2.K = 1.0;
  k2.b_y = 0.5;
  k2.sigma_y = 0.5;
  k2.T = 1.0;
  CHECK(compute_L0_L1(k2).L0 == 0.0);  // g_x = f_x = 0
  CHECK(compute_L0_L1(k2).L1 == 0.0);

  for (int rep = 0; rep < 20; ++rep) {
    ProblemConstants k3 = random_constants(rng);
    const CouplingConstants l = compute_L0_L1(k3);
    CHECK(l.L0 == doctest::Approx(static_cast<double>(l0_ld(k3))).epsilon(1e-12));
    CHECK(l.L1 == doctest::Approx(static_cast<double>(l1_ld(k3))).epsilon(1e-12));
  }
}

TEST_CASE("compute_c matches a dense log-grid brute force") {
  GaussianStream rng(11);
  // Decoupled limits give c = 0 exactly.
  ProblemConstants dec;
  dec.K = 1.0;
  dec.g_x = 0.6;
  dec.f_x = 0.6;
  dec.T = 1.0;
  CHECK(compute_c(dec).c == 0.0);
  ProblemConstants dec2;
  dec2.K = 1.0;
  dec2.b_y = 0.6;
  dec2.sigma_y = 0.6;
  dec2.T = 1.0;
  CHECK(compute_c(dec2).c == 0.0);

  for (int rep = 0; rep < 20; ++rep) {
    ProblemConstants k = random_constants(rng);
    const CInfimum ci = compute_c(k);
    const double grid = c_grid_min(k, 100000);
    REQUIRE(std::isfinite(grid));
    if (grid > 0.0) {
      CHECK(ci.c == doctest::Approx(grid).epsilon(1e-6));
    } else {
      CHECK(ci.c <= 1e-12);
    }
    CHECK(ci.c <= grid + 1e-10);  // the refined infimum never exceeds a sample
    CHECK(ci.lambda1_star > 0.0);
  }
}

TEST_CASE("check_conditions on the three reference regimes") {
  // Fully decoupled: both conditions hold at zero.
  ProblemConstants dec;
  dec.K = 1.0;
  dec.g_x = 0.5;
  dec.f_x = 0.5;
  dec.T = 1.0;
  AuditReport r = check_conditions(dec);
  CHECK(r.holds);
  CHECK(r.L0 == 0.0);
  CHECK(r.c == 0.0);
  CHECK(r.margin == doctest::Approx(std::min(std::exp(-1.0), 1.0)));

  // Small time duration: L0 -> 0 and c -> 0.
  ProblemConstants small = dec;
  small.b_y = 1.0;
  small.sigma_y = 1.0;
  small.g_x = 1.0;
  small.f_x = 1.0;
  small.K = 1.0;
  small.T = 1e-6;
  AuditReport rs = check_conditions(small);
  CHECK(rs.holds);
  CHECK(rs.L0 < 1e-4);
  CHECK(rs.c < 1e-2);

  // Large coupling violates the conditions by orders of magnitude.
  ProblemConstants big;
  big.b_y = 1.0;
  big.sigma_y = 1.0;
  big.g_x = 1.0;
  big.f_x = 1.0;
  big.K = 1.0;
  big.sigma_x = 1.0;
  big.f_z = 1.0;
  big.T = 1.0;
  AuditReport rb = check_conditions(big);
  CHECK(!rb.holds);
  CHECK(rb.L0 > std::exp(-1.0) * 10.0);
}

TEST_CASE("monotonicity in each coupling constant") {
  GaussianStream rng(13);
  auto bump = [](ProblemConstants k, int which) {
    switch (which) {
      case 0: k.b_y *= 1.1; break;
      case 1: k.sigma_y *= 1.1; break;
      case 2: k.g_x *= 1.1; break;
      case 3: k.f_x *= 1.1; break;
      case 4: k.T *= 1.1; break;
    }
    return k;
  };
  for (int rep = 0; rep < 8; ++rep) {
    ProblemConstants k = random_constants(rng);
    const AuditReport base = check_conditions(k);
    REQUIRE(std::isfinite(base.c));
    for (int which = 0; which < 5; ++which) {
      const AuditReport up = check_conditions(bump(k, which));
      CHECK(up.L0 >= base.L0 - 1e-12);
      if (std::isfinite(up.c))
        CHECK(up.c >= base.c - 1e-10 * std::max(1.0, base.c));
    }
  }

  // Overflowing constants degrade gracefully: c reported as +inf, holds false.
  ProblemConstants huge;
  huge.b_y = 2.0;
  huge.sigma_y = 2.0;
  huge.g_x = 2.0;
  huge.f_x = 2.0;
  huge.K = 2.0;
  huge.T = 3.0;
  AuditReport r = check_conditions(huge);
  CHECK(!r.holds);
}
