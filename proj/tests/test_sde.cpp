#include <doctest.h>

#include <cmath>
#include <limits>
#include <string>

#include "nelson_tfd/analytic.hpp"
#include "nelson_tfd/fields.hpp"
#include "nelson_tfd/sde.hpp"
#include "nelson_tfd/stats.hpp"

using namespace ntfd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

DriftSet zero_drifts() {
  DriftSet d;
  auto zero = [](double, double, double) { return 0.0; };
  d.b = zero;
  d.b_star = zero;
  d.b_tilde = zero;
  d.b_tilde_star = zero;
  return d;
}

DriftSet constant_drifts(double cx, double cxt) {
  DriftSet d;
  d.b = [cx](double, double, double) { return cx; };
  d.b_star = [cx](double, double, double) { return -cx; };
  d.b_tilde = [cxt](double, double, double) { return cxt; };
  d.b_tilde_star = [cxt](double, double, double) { return -cxt; };
  return d;
}

EnsembleConfig small_config(double beta_bar, std::int64_t paths, double horizon,
                            std::uint64_t seed) {
  EnsembleConfig config = EnsembleConfig::defaults(PhysicalParams::from_beta_bar(beta_bar));
  config.n_paths = paths;
  config.horizon = horizon;
  config.base_seed = seed;
  return config;
}

}  // namespace

TEST_CASE("steps: drift enters linearly, noise is seed-reproducible") {
  const PhysicalParams params = PhysicalParams::from_beta_bar(1.0);
  const ThermalPoint start{0.4, -0.2, 0.0};
  const double dt = 1e-3;

  SUBCASE("zero drift and zero noise leave the point unchanged") {
    // identical streams cancel: the step with constant drift differs from
    // the zero-drift step by exactly drift*dt, so the noise-free part of
    // the zero-drift step is the identity
    PathRng rng_a(11, 0), rng_b(11, 0);
    const ThermalPoint a = step_forward_group(start, dt, zero_drifts(), params, rng_a);
    const ThermalPoint b = step_forward_group(start, dt, constant_drifts(2.0, -3.0), params, rng_b);
    CHECK(b.x - a.x == doctest::Approx(2.0 * dt).epsilon(1e-12));
    CHECK(b.x_tilde - a.x_tilde == doctest::Approx(-3.0 * dt).epsilon(1e-12));
    CHECK(a.t == doctest::Approx(start.t + dt));

    // and zero-drift increments are pure noise with mean 0
    PathRng rng(13, 0);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const ThermalPoint next = step_forward_group(start, dt, zero_drifts(), params, rng);
      sum += next.x - start.x;
    }
    CHECK(std::abs(sum / n) < 3.0 * std::sqrt(dt / n));
  }

  SUBCASE("backward step mirrors with starred drifts and decreasing time") {
    PathRng rng_a(11, 0), rng_b(11, 0);
    const ThermalPoint a = step_backward_group(start, dt, zero_drifts(), params, rng_a);
    const ThermalPoint b = step_backward_group(start, dt, constant_drifts(2.0, -3.0), params, rng_b);
    // x' = x - b* dt: constant_drifts has b* = -2, b~* = +3
    CHECK(b.x - a.x == doctest::Approx(2.0 * dt).epsilon(1e-12));
    CHECK(b.x_tilde - a.x_tilde == doctest::Approx(-3.0 * dt).epsilon(1e-12));
    CHECK(a.t == doctest::Approx(start.t - dt));
  }

  SUBCASE("dt must be positive") {
    PathRng rng(1, 0);
    CHECK_THROWS_AS(step_forward_group(start, 0.0, zero_drifts(), params, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(step_backward_group(start, -1e-3, zero_drifts(), params, rng),
                    std::invalid_argument);
  }
}

TEST_CASE("equilibrium drift identities hold along simulated paths") {
  const PhysicalParams params = PhysicalParams::from_beta_bar(1.0);
  const EquilibriumSolution eq(params);
  const DriftSet drifts = eq.drift_set();
  PathRng rng(99, 0);
  ThermalPoint p = sample_stationary(params, rng.init);
  for (int k = 0; k < 200; ++k) {
    p = step_backward_group(p, 1e-3, drifts, params, rng);
    CHECK(drifts.b_star(p.x, p.x_tilde, p.t) == -drifts.b(p.x, p.x_tilde, p.t));
    CHECK(drifts.b_tilde(p.x, p.x_tilde, p.t) == -drifts.b_tilde_star(p.x, p.x_tilde, p.t));
  }
}

TEST_CASE("stationary sampler matches the analytic covariance") {
  for (double beta : {1.0, kInf}) {
    const PhysicalParams params(1, 1, 1, beta);
    const StationaryCovariance cov = EquilibriumSolution(params).stationary_covariance();
    const int n = 1000000;
    double sxx = 0, sxt = 0, sxxt = 0;
    PathRng rng(31, 0);
    for (int i = 0; i < n; ++i) {
      const ThermalPoint p = sample_stationary(params, rng.init);
      sxx += p.x * p.x;
      sxt += p.x_tilde * p.x_tilde;
      sxxt += p.x * p.x_tilde;
    }
    const double se_var = cov.var_x * std::sqrt(2.0 / n);
    CHECK(std::abs(sxx / n - cov.var_x) < 3 * se_var);
    CHECK(std::abs(sxt / n - cov.var_x) < 3 * se_var);
    CHECK(std::abs(sxxt / n - cov.cov_xxt) < 3 * se_var);
  }
}

TEST_CASE("forward-group ensemble stays stationary over T = 10/w") {
  // dt = 0.01/w, five tracked moments time-independent within 3 SE
  EnsembleConfig config = small_config(1.0, 10000, 10.0, 17);
  config.dt = 0.01;
  config.record_stride = 100;  // 11 recorded times
  const Ensemble ens = simulate_ensemble(config);
  const StationaryCovariance cov = EquilibriumSolution(config.params).stationary_covariance();
  REQUIRE(ens.records.size() >= 10);
  for (const MomentRecord& rec : ens.records) {
    const double n = static_cast<double>(rec.n);
    const double mean_x = rec.sx / n;
    const double mean_xt = rec.sxt / n;
    const double var_x = (rec.sxx - rec.sx * rec.sx / n) / (n - 1);
    const double var_xt = (rec.sxtxt - rec.sxt * rec.sxt / n) / (n - 1);
    const double cov_xxt = (rec.sxxt - rec.sx * rec.sxt / n) / (n - 1);
    const double se_mean = std::sqrt(cov.var_x / n);
    const double se_var = cov.var_x * std::sqrt(2.0 / n);
    CHECK(std::abs(mean_x) < 3 * se_mean);
    CHECK(std::abs(mean_xt) < 3 * se_mean);
    CHECK(std::abs(var_x - cov.var_x) < 3 * se_var);
    CHECK(std::abs(var_xt - cov.var_x) < 3 * se_var);
    CHECK(std::abs(cov_xxt - cov.cov_xxt) < 3 * se_var);
  }
}

TEST_CASE("zero temperature decorrelates the tilde coordinate") {
  EnsembleConfig config = EnsembleConfig::defaults(PhysicalParams(1, 1, 1, kInf));
  config.n_paths = 20000;
  config.horizon = 2.0;
  config.base_seed = 23;
  const Ensemble ens = simulate_ensemble(config);
  const MomentEstimates m = moment_estimates(ens);
  CHECK(std::abs(m.cov_xxt) < 3 * m.se_cov_xxt);
  CHECK(std::abs(m.var_x - 0.5) < 3 * m.se_var_x);
}

TEST_CASE("group equivalence and tilde symmetry of equilibrium statistics") {
  EnsembleConfig forward = small_config(1.0, 20000, 2.0, 41);
  EnsembleConfig backward = forward;
  backward.group = GroupMode::Backward;
  backward.base_seed = 42;  // independent noise, same law
  const MomentEstimates mf = moment_estimates(simulate_ensemble(forward));
  const MomentEstimates mb = moment_estimates(simulate_ensemble(backward));
  const double se_var = std::hypot(mf.se_var_x, mb.se_var_x);
  const double se_cov = std::hypot(mf.se_cov_xxt, mb.se_cov_xxt);
  CHECK(std::abs(mf.var_x - mb.var_x) < 3 * se_var);
  CHECK(std::abs(mf.cov_xxt - mb.cov_xxt) < 3 * se_cov);

  // tilde symmetry within one run
  CHECK(std::abs(mf.var_x - mf.var_xt) < 3 * std::hypot(mf.se_var_x, mf.se_var_xt));
  CHECK(std::abs(mf.mean_x - mf.mean_xt) < 3 * std::hypot(mf.se_mean_x, mf.se_mean_xt));
}

TEST_CASE("transformed coordinates") {
  SUBCASE("zero temperature: identity map") {
    const PhysicalParams cold(1, 1, 1, kInf);
    const TransformedPoint t = transform_coordinates({0.7, -0.3, 0}, cold);
    CHECK(t.X == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(t.X_tilde == doctest::Approx(-0.3).epsilon(1e-15));
  }
  SUBCASE("origin maps to origin") {
    const TransformedPoint t = transform_coordinates({0, 0, 0}, PhysicalParams::from_beta_bar(1.0));
    CHECK(t.X == 0.0);
    CHECK(t.X_tilde == 0.0);
  }
  SUBCASE("frozen value at beta_bar = 1") {
    const TransformedPoint t = transform_coordinates({1, 1, 0}, PhysicalParams::from_beta_bar(1.0));
    CHECK(t.X == doctest::Approx(0.494892576630231).epsilon(1e-13));
    CHECK(t.X_tilde == doctest::Approx(0.494892576630231).epsilon(1e-13));
  }
  SUBCASE("round-trips to 1e-12") {
    for (double bb : {0.3, 1.0, 4.0}) {
      const PhysicalParams params = PhysicalParams::from_beta_bar(bb);
      for (double x : {-1.4, 0.2, 2.7}) {
        for (double xt : {-2.0, 0.9}) {
          const TransformedPoint t = transform_coordinates({x, xt, 0}, params);
          const ThermalPoint back = inverse_transform(t, params);
          CHECK(back.x == doctest::Approx(x).epsilon(1e-12));
          CHECK(back.x_tilde == doctest::Approx(xt).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("transformed OU process") {
  SUBCASE("zero temperature: pure OU with amplitude sqrt(hbar/m)") {
    const PhysicalParams cold(1, 1, 1, kInf);
    PathRng rng(7, 3), replay(7, 3);
    const TransformedPoint next = step_transformed({0.5, -0.1}, 1e-3, cold, replay);
    // reproduce by hand: at n = 0 the cross coefficient vanishes
    const double dw = std::sqrt(1e-3) * rng.non_tilde.gaussian();
    const double dwt = std::sqrt(1e-3) * rng.tilde.gaussian();
    CHECK(next.X == doctest::Approx(0.5 - 0.5 * 1e-3 + dw).epsilon(1e-15));
    CHECK(next.X_tilde == doctest::Approx(-0.1 + 0.1 * 1e-3 + dwt).epsilon(1e-15));
  }

  SUBCASE("stationary variance (hbar/2mw)(1+2n) within 3 SE") {
    EnsembleConfig config = small_config(1.0, 20000, 4.0, 49);
    const Ensemble ens = simulate_transformed_ensemble(config);
    const MomentEstimates m = moment_estimates(ens);
    const double n_occ = thermal_occupation(config.params);
    const double target = 0.5 * (1.0 + 2.0 * n_occ);
    CHECK(std::abs(m.var_x - target) < 3 * m.se_var_x);
    CHECK(std::abs(m.var_xt - target) < 3 * m.se_var_xt);
    // matches the thermal Var[x] target at equal beta_bar
    const double var_x_target = EquilibriumSolution(config.params).stationary_covariance().var_x;
    CHECK(target == doctest::Approx(var_x_target).epsilon(1e-14));
  }

  SUBCASE("classical limit: noise variance rate -> 2kT/(m w) within 1%") {
    const PhysicalParams hot = PhysicalParams::from_beta_bar(0.01);
    const double n_occ = thermal_occupation(hot);
    const double rate = (hot.hbar / hot.m) * (1.0 + 2.0 * n_occ);
    const double classical = 2.0 * (1.0 / hot.beta) / (hot.m * hot.omega);
    CHECK(rate / classical == doctest::Approx(1.0).epsilon(0.01));

    // empirical: mean squared increment of single steps from the origin
    PathRng rng(3, 0);
    const double dt = 1e-4;
    double sum_sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const TransformedPoint next = step_transformed({0.0, 0.0}, dt, hot, rng);
      sum_sq += next.X * next.X;
    }
    const double empirical_rate = sum_sq / n / dt;
    CHECK(empirical_rate == doctest::Approx(rate).epsilon(0.02));
  }
}

TEST_CASE("ensemble determinism and path replay") {
  EnsembleConfig config = small_config(2.0, 3000, 0.5, 77);
  config.dump_paths = 3;
  config.threads = 2;
  const Ensemble a = simulate_ensemble(config);
  const Ensemble b = simulate_ensemble(config);

  SUBCASE("same seed: bit-identical accumulators, finals, and dumps") {
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
      CHECK(a.records[i].sxx == b.records[i].sxx);
      CHECK(a.records[i].sxxt == b.records[i].sxxt);
    }
    for (std::size_t i = 0; i < a.final_points.size(); ++i) {
      CHECK(a.final_points[i].x == b.final_points[i].x);
      CHECK(a.final_points[i].x_tilde == b.final_points[i].x_tilde);
    }
    for (std::size_t p = 0; p < a.dumped.size(); ++p) {
      REQUIRE(a.dumped[p].samples.size() == b.dumped[p].samples.size());
      for (std::size_t k = 0; k < a.dumped[p].samples.size(); ++k) {
        CHECK(a.dumped[p].samples[k].x == b.dumped[p].samples[k].x);
      }
    }
  }

  SUBCASE("thread count does not change the result") {
    EnsembleConfig serial = config;
    serial.threads = 1;
    const Ensemble c = simulate_ensemble(serial);
    for (std::size_t i = 0; i < a.records.size(); ++i) {
      CHECK(a.records[i].sxx == c.records[i].sxx);
      CHECK(a.records[i].sx4 == c.records[i].sx4);
    }
    CHECK(a.final_points.back().x == c.final_points.back().x);
  }

  SUBCASE("paths replay independently of the ensemble size") {
    EnsembleConfig bigger = config;
    bigger.n_paths = 6000;
    const Ensemble c = simulate_ensemble(bigger);
    for (std::size_t p = 0; p < a.dumped.size(); ++p) {
      for (std::size_t k = 0; k < a.dumped[p].samples.size(); ++k) {
        CHECK(a.dumped[p].samples[k].x == c.dumped[p].samples[k].x);
        CHECK(a.dumped[p].samples[k].x_tilde == c.dumped[p].samples[k].x_tilde);
      }
    }
  }

  SUBCASE("seed changes the draw") {
    EnsembleConfig other = config;
    other.base_seed = 78;
    const Ensemble c = simulate_ensemble(other);
    CHECK(a.final_points[0].x != c.final_points[0].x);
  }
}

TEST_CASE("caller-supplied drift fields run through the same engine") {
  // equilibrium drifts rebuilt from (R, S) fields: statistics must match
  const PhysicalParams params = PhysicalParams::from_beta_bar(1.0);
  const EquilibriumSolution eq(params);
  const ScalarField2D r_field = equilibrium_r_field(eq);
  const ScalarField2D s_field = equilibrium_s_field();
  const DriftSet drifts = drift_set_from_rs(r_field, s_field, params);

  EnsembleConfig config = small_config(1.0, 5000, 1.0, 61);
  const Ensemble ens = simulate_ensemble_with(config, drifts);
  const MomentEstimates m = moment_estimates(ens);
  const StationaryCovariance cov = eq.stationary_covariance();
  CHECK(std::abs(m.var_x - cov.var_x) < 3 * m.se_var_x);
  CHECK(std::abs(m.cov_xxt - cov.cov_xxt) < 3 * m.se_cov_xxt);

  // backward group with the same fields is stationary too
  config.group = GroupMode::Backward;
  const MomentEstimates mb = moment_estimates(simulate_ensemble_with(config, drifts));
  CHECK(std::abs(mb.var_x - cov.var_x) < 3 * mb.se_var_x);
}

TEST_CASE("trivial ensembles and validation") {
  SUBCASE("n_paths = 1, T = 0 gives the initial point") {
    EnsembleConfig config = small_config(1.0, 1, 0.0, 5);
    config.init = InitMode::Point;
    config.x0 = 0.3;
    config.xt0 = -0.6;
    config.dump_paths = 1;
    const Ensemble ens = simulate_ensemble(config);
    REQUIRE(ens.final_points.size() == 1);
    CHECK(ens.final_points[0].x == 0.3);
    CHECK(ens.final_points[0].x_tilde == -0.6);
    REQUIRE(ens.dumped.size() == 1);
    CHECK(ens.dumped[0].samples.size() == 1);
    REQUIRE(ens.records.size() == 1);
    CHECK(ens.records[0].n == 1);
  }

  SUBCASE("burn-in initialization relaxes a displaced start") {
    EnsembleConfig config = small_config(1.0, 5000, 1.0, 91);
    config.init = InitMode::BurnIn;
    config.x0 = 4.0;
    config.xt0 = 4.0;
    // (4, 4) excites the slow symmetric mode, rate w tanh(beta_bar/4);
    // 50/w covers ~12 relaxation times
    config.burn_in = 50.0;
    config.dt = 5e-3;
    const Ensemble ens = simulate_ensemble(config);
    const MomentEstimates m = moment_estimates(ens);
    const StationaryCovariance cov = EquilibriumSolution(config.params).stationary_covariance();
    CHECK(std::abs(m.var_x - cov.var_x) < 4 * m.se_var_x);
    CHECK(std::abs(m.mean_x) < 4 * m.se_mean_x);
  }

  SUBCASE("config validation") {
    EnsembleConfig config = small_config(1.0, 0, 1.0, 1);
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
    config.n_paths = 10;
    config.dt = 0.0;
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  }
}

TEST_CASE("path divergence raises with path and step context") {
  EnsembleConfig config = small_config(0.5, 4, 40.0, 3);
  config.dt = 10.0;  // wildly unstable explicit Euler
  try {
    simulate_ensemble(config);
    FAIL("expected divergence");
  } catch (const PathDivergedError& err) {
    CHECK(err.path_index >= 0);
    CHECK(err.step_index >= 0);
    CHECK(std::string(err.what()).find("reduce dt") != std::string::npos);
  }
}

TEST_CASE("explicit-Euler bias halves when dt halves") {
  // beta = inf decouples the coordinates into plain OU, where the exact
  // transition is available; sharing the per-step gaussians between the
  // Euler chain and the exact chain leaves only the discretization bias.
  const double horizon = 2.0;
  auto paired_bias = [&](double dt, std::uint64_t seed, double* se_out) {
    const int n = 20000;
    const int steps = static_cast<int>(horizon / dt + 0.5);
    const double decay = std::exp(-dt);
    const double exact_sd = std::sqrt(0.5 * (1.0 - std::exp(-2.0 * dt)));
    double sum = 0.0, sum_sq = 0.0;
    for (int path = 0; path < n; ++path) {
      NoiseStream init(seed, path, 2), noise(seed, path, 0);
      double x_euler = std::sqrt(0.5) * init.gaussian();
      double x_exact = x_euler;
      for (int k = 0; k < steps; ++k) {
        const double z = noise.gaussian();
        x_euler = x_euler * (1.0 - dt) + std::sqrt(dt) * z;
        x_exact = x_exact * decay + exact_sd * z;
      }
      const double d = x_euler * x_euler - x_exact * x_exact;
      sum += d;
      sum_sq += d * d;
    }
    const double mean = sum / n;
    *se_out = std::sqrt((sum_sq / n - mean * mean) / n);
    return mean;
  };

  double se_coarse = 0, se_fine = 0;
  const double bias_coarse = paired_bias(2e-3, 2027, &se_coarse);
  const double bias_fine = paired_bias(1e-3, 2028, &se_fine);
  CHECK(bias_coarse > 10 * se_coarse);  // bias resolved, not noise
  CHECK(bias_fine > 10 * se_fine);
  const double ratio = bias_coarse / bias_fine;
  CHECK(ratio > 1.5);
  CHECK(ratio < 2.5);
}
