#include <doctest.h>

#include <cmath>
#include <limits>

#include "nelson_tfd/analytic.hpp"
#include "oracles.hpp"

using namespace ntfd;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
EquilibriumSolution eq_at(double bb) { return EquilibriumSolution(PhysicalParams::from_beta_bar(bb)); }
}  // namespace

TEST_CASE("equilibrium exponent R_eq") {
  const EquilibriumSolution eq = eq_at(1.0);
  CHECK(eq.r_eq(0, 0) == 0.0);
  // frozen: -(cosh .5 - 1)/sinh .5 and -cosh .5 / (2 sinh .5)
  CHECK(eq.r_eq(1, 1) == doctest::Approx(-0.244918662403709129).epsilon(1e-14));
  CHECK(eq.r_eq(1, 0) == doctest::Approx(-1.081976706869326424).epsilon(1e-14));

  SUBCASE("symmetric, nonpositive, vanishing only at the origin") {
    for (double x : {-2.0, -0.3, 0.7, 1.9}) {
      for (double xt : {-1.1, 0.2, 2.4}) {
        CHECK(eq.r_eq(x, xt) == doctest::Approx(eq.r_eq(xt, x)).epsilon(1e-15));
        CHECK(eq.r_eq(x, xt) < 0.0);
      }
    }
    CHECK(eq.s_eq(0.3, -0.8) == 0.0);
  }

  SUBCASE("zero-temperature limiting form -(mw/2hbar)(x^2 + x~^2)") {
    const EquilibriumSolution cold(PhysicalParams(1, 1, 1, kInf));
    CHECK(cold.r_eq(1.0, 2.0) == doctest::Approx(-0.5 * (1.0 + 4.0)).epsilon(1e-15));
    CHECK(cold.r_eq(1.0, 0.0) == doctest::Approx(-0.5).epsilon(1e-15));
  }
}

TEST_CASE("equilibrium drifts") {
  const EquilibriumSolution eq = eq_at(1.0);

  SUBCASE("linear fields vanish at the origin") {
    const DriftValues d = eq.drift_eq(0, 0);
    CHECK(d.b == 0.0);
    CHECK(d.b_star == 0.0);
    CHECK(d.b_tilde == 0.0);
    CHECK(d.b_tilde_star == 0.0);
  }

  SUBCASE("frozen values at (1, 0), beta_bar = 1") {
    const DriftValues d = eq.drift_eq(1, 0);
    CHECK(d.b == doctest::Approx(-2.163953413738653).epsilon(1e-14));
    CHECK(d.b_tilde_star == doctest::Approx(-1.919034751334944).epsilon(1e-14));
  }

  SUBCASE("equilibrium pairing b* = -b, b~ = -b~*") {
    for (double x : {-1.5, 0.2, 2.0}) {
      for (double xt : {-0.7, 0.0, 1.3}) {
        const DriftValues d = eq.drift_eq(x, xt);
        CHECK(d.b_star == doctest::Approx(-d.b).epsilon(1e-15));
        CHECK(d.b_tilde == doctest::Approx(-d.b_tilde_star).epsilon(1e-15));
      }
    }
  }

  SUBCASE("zero temperature decouples: b -> -w x") {
    const EquilibriumSolution cold(PhysicalParams(1, 1, 1, kInf));
    const DriftValues d = cold.drift_eq(1.0, 0.7);
    CHECK(d.b == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(d.b_tilde_star == doctest::Approx(0.7).epsilon(1e-15));
  }

  SUBCASE("current velocity vanishes identically in equilibrium") {
    for (double x : {-2.2, 0.4, 1.8}) {
      for (double xt : {-1.4, 0.9}) {
        const DriftValues d = eq.drift_eq(x, xt);
        CHECK(0.5 * (d.b + d.b_star) == 0.0);
        CHECK(0.5 * (d.b_tilde + d.b_tilde_star) == 0.0);
      }
    }
  }
}

TEST_CASE("drift equals (hbar/m) grad R_eq by central differences") {
  for (double bb : {0.5, 1.0, 3.0}) {
    const EquilibriumSolution eq = eq_at(bb);
    const double pts[][2] = {{0.3, -0.9}, {-1.2, 0.4}, {1.7, 1.1}, {-0.5, -0.5}};
    for (const auto& p : pts) {
      const DriftValues d = eq.drift_eq(p[0], p[1]);
      for (double h : {1e-2, 1e-3}) {
        const double fd_x = oracles::central_diff(
            [&](double x) { return eq.r_eq(x, p[1]); }, p[0], h);
        const double fd_xt = oracles::central_diff(
            [&](double xt) { return eq.r_eq(p[0], xt); }, p[1], h);
        // quadratic form: central differences are exact up to rounding
        CHECK(d.b == doctest::Approx(fd_x).epsilon(1e-9));
        CHECK(d.b_tilde_star == doctest::Approx(-fd_xt).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("stationary covariance closed forms") {
  SUBCASE("frozen values") {
    const StationaryCovariance c1 = eq_at(1.0).stationary_covariance();
    CHECK(c1.var_x == doctest::Approx(1.081976706869326424).epsilon(1e-14));
    CHECK(c1.var_x_tilde == c1.var_x);
    CHECK(c1.cov_xxt == doctest::Approx(0.959517375667471860).epsilon(1e-14));

    const StationaryCovariance c3 = eq_at(3.0).stationary_covariance();
    CHECK(c3.var_x == doctest::Approx(0.552395696491255952).epsilon(1e-14));

    const StationaryCovariance cold =
        EquilibriumSolution(PhysicalParams(1, 1, 1, kInf)).stationary_covariance();
    CHECK(cold.var_x == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(cold.cov_xxt == 0.0);
  }

  SUBCASE("positive-definite Gaussian: var > |cov| >= 0") {
    for (double bb : {0.25, 0.5, 1.0, 2.0, 5.0, 50.0}) {
      const StationaryCovariance c = eq_at(bb).stationary_covariance();
      CHECK(c.var_x > std::abs(c.cov_xxt));
      CHECK(c.cov_xxt >= 0.0);
    }
  }

  SUBCASE("moments of normalized e^{2R_eq} by 2-D quadrature, 1e-6 relative") {
    for (double bb : {0.5, 1.0, 3.0}) {
      const EquilibriumSolution eq = eq_at(bb);
      const StationaryCovariance c = eq.stationary_covariance();
      const double extent = 10.0 * std::sqrt(c.var_x);
      auto density = [&](double x, double xt) { return std::exp(2.0 * eq.r_eq(x, xt)); };
      const int n = 600;
      const double mass = oracles::simpson_2d(density, extent, n);
      const double var_quad = oracles::simpson_2d(
                                  [&](double x, double xt) { return x * x * density(x, xt); },
                                  extent, n) / mass;
      const double cov_quad = oracles::simpson_2d(
                                  [&](double x, double xt) { return x * xt * density(x, xt); },
                                  extent, n) / mass;
      CHECK(var_quad == doctest::Approx(c.var_x).epsilon(1e-6));
      CHECK(cov_quad == doctest::Approx(c.cov_xxt).epsilon(1e-6));
    }
  }
}

TEST_CASE("uncertainty product") {
  CHECK(EquilibriumSolution(PhysicalParams(1, 1, 1, kInf)).uncertainty_product() ==
        doctest::Approx(0.5).epsilon(1e-15));
  CHECK(eq_at(1.0).uncertainty_product() == doctest::Approx(1.081976706869326424).epsilon(1e-14));
  CHECK(eq_at(3.0).uncertainty_product() == doctest::Approx(0.552395696491255952).epsilon(1e-14));

  SUBCASE("never below hbar/2, equality only in the cold limit") {
    // beta_bar <= 30 keeps the thermal excess 2n above double epsilon
    for (double bb : {0.25, 0.5, 1.0, 2.0, 3.0, 5.0, 20.0, 30.0}) {
      CHECK(eq_at(bb).uncertainty_product() > 0.5);
    }
  }

  SUBCASE("product = sqrt(Var[x]) sqrt(Var[(p-p*)/2])") {
    for (double bb : {0.5, 1.0, 3.0}) {
      const EquilibriumSolution eq = eq_at(bb);
      const double product = std::sqrt(eq.stationary_covariance().var_x) *
                             std::sqrt(eq.momentum_half_diff_variance());
      CHECK(eq.uncertainty_product() == doctest::Approx(product).epsilon(1e-14));
    }
  }

  SUBCASE("general units: scales as hbar") {
    const PhysicalParams p(2.0, 3.0, 0.7, 1.0 / (0.7 * 3.0));  // beta_bar = 1
    const EquilibriumSolution eq(p);
    CHECK(eq.uncertainty_product() ==
          doctest::Approx(0.7 * 1.081976706869326424).epsilon(1e-14));
  }
}
