"""Smoke tests for the python bindings; run with PYTHONPATH pointing at the
built package directory."""

import math

import nelson_tfd as nt


def test_thermal_scalars():
    p = nt.PhysicalParams.from_beta_bar(1.0)
    assert abs(nt.thermal_occupation(p) - 0.581976706869326424) < 1e-14
    assert abs(nt.partition_function(p) - 0.959517375667471860) < 1e-14
    cold = nt.PhysicalParams(beta=math.inf)
    assert nt.thermal_occupation(cold) == 0.0
    try:
        nt.partition_function(cold)
    except ValueError:
        pass
    else:
        raise AssertionError("partition function must reject beta = inf")


def test_equilibrium_solution():
    p = nt.PhysicalParams.from_beta_bar(1.0)
    eq = nt.EquilibriumSolution(p)
    assert abs(eq.r_eq(1.0, 0.0) + 1.081976706869326424) < 1e-12
    d = eq.drift_eq(1.0, 0.0)
    assert abs(d.b + 2.163953413738653) < 1e-12
    assert abs(d.b_tilde_star + 1.919034751334944) < 1e-12
    cov = eq.stationary_covariance()
    assert abs(cov.var_x - 1.081976706869326424) < 1e-12
    assert abs(cov.cov_xxt - 0.959517375667471860) < 1e-12
    assert abs(eq.uncertainty_product() - (0.5 + nt.thermal_occupation(p))) < 1e-14


def test_transform_round_trip():
    p = nt.PhysicalParams.from_beta_bar(1.0)
    X, Xt = nt.transform_coordinates(nt.ThermalPoint(1.0, 1.0, 0.0), p)
    assert abs(X - 0.494892576630231) < 1e-12
    x, xt = nt.inverse_transform(X, Xt, p)
    assert abs(x - 1.0) < 1e-12 and abs(xt - 1.0) < 1e-12


def test_ensemble_and_estimators():
    p = nt.PhysicalParams.from_beta_bar(1.0)
    ens = nt.simulate_ensemble(p, paths=20000, horizon=1.0, seed=12, threads=2)
    m = nt.moment_estimates(ens)
    cov = nt.EquilibriumSolution(p).stationary_covariance()
    assert abs(m.var_x - cov.var_x) < 4 * m.se_var_x
    assert abs(m.cov_xxt - cov.cov_xxt) < 4 * m.se_cov_xxt

    # determinism across thread counts
    again = nt.simulate_ensemble(p, paths=20000, horizon=1.0, seed=12, threads=1)
    assert nt.moment_estimates(again).var_x == m.var_x

    hist = nt.marginal_histogram(ens, "x", 75, -5 * math.sqrt(cov.var_x), 5 * math.sqrt(cov.var_x))
    chi = nt.gaussian_chi_square_test(hist, 0.0, cov.var_x)
    assert chi.p_value > 0.001, chi.p_value

    report = nt.uncertainty_estimate(ens, p)
    assert abs(report.product - report.analytic_product) < 4 * report.se_product
    assert report.product >= 0.5 - 3 * report.se_product


def test_transformed_ensemble():
    p = nt.PhysicalParams.from_beta_bar(1.0)
    ens = nt.simulate_transformed_ensemble(p, paths=20000, horizon=3.0, seed=3)
    m = nt.moment_estimates(ens)
    target = 0.5 * (1.0 + 2.0 * nt.thermal_occupation(p))
    assert abs(m.var_x - target) < 4 * m.se_var_x


def test_residual_norms():
    norms = nt.equilibrium_residual_norms(nt.PhysicalParams.from_beta_bar(1.0), 4.0, 0.05)
    for name, value in norms.items():
        assert value <= 1e-10, (name, value)


def main():
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for test in tests:
        test()
        print(f"ok {test.__name__}")
    print(f"{len(tests)} python smoke tests passed (nelson_tfd {nt.__version__})")


if __name__ == "__main__":
    main()
