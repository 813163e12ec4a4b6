import math

import numpy as np
import pytest

import rwsbi


def test_kernel_and_errors():
    k = rwsbi.ssrw()
    assert k.sigma2 == pytest.approx(1.0)
    assert k.symmetric
    wide = rwsbi.kernel([(-2, 0.25), (-1, 0.25), (1, 0.25), (2, 0.25)])
    assert wide.sigma2 == pytest.approx(2.5)
    with pytest.raises(rwsbi.RwsbiError):
        rwsbi.kernel([(1, 1.0)])


def test_solve_rho():
    sol = rwsbi.solve_rho(1.0, 1.0, "ssrw", t_max=50.0)
    assert sol.t_max == pytest.approx(50.0)
    rho = sol.rho0(np.array([1.0, 10.0, 50.0]))
    assert np.all(np.diff(rho) > 0)
    assert rho[2] == pytest.approx(1.520340595880, abs=1e-6)
    assert sol.mass_discrepancy() < 1e-6
    profile = sol.profile(50.0)
    assert profile.shape == (2 * sol.radius + 1,)
    assert rwsbi.tilde_rho(0.0) == pytest.approx(0.5)


def test_simulation_is_deterministic():
    a = rwsbi.simulate_rwsbi(1.0, "ssrw", 50.0, seed=3)
    b = rwsbi.simulate_rwsbi(1.0, "ssrw", 50.0, seed=3)
    assert a["successes"] == b["successes"]
    assert np.array_equal(a["positions"], b["positions"])
    assert a["successes"] + a["blocked"] == a["attempts"]


def test_coupling():
    out = rwsbi.reflection_couple(5, "ssrw", seed=1, record_paths=True)
    assert out["success"]
    t, x, y = out["paths"][-1]
    assert x == y
    with pytest.raises(rwsbi.DomainError):
        rwsbi.reflection_couple(0, "ssrw")
    grid = rwsbi.time_grid(0.5, 100)
    assert len(grid) == 301
    assert np.all(np.diff(grid) > 0)


def test_correlations():
    spec = rwsbi.VacancySpec(2, [0.0, 1.0, 1.0, 0.5])
    want = math.exp(-2.0) * (math.exp(0.5) - 1.0)
    assert rwsbi.correlation_exact(spec) == pytest.approx(want, rel=1e-12)
    value, bound = rwsbi.correlation_series(spec, 40)
    assert value == pytest.approx(want, rel=1e-10)
    est, se = rwsbi.correlation_montecarlo(spec, 100000, seed=2)
    assert abs(est - want) < 5 * se
    with pytest.raises(rwsbi.UnrealizableSpec):
        rwsbi.VacancySpec(2, [0.0, 1.0, 1.0, 2.0])


def test_smoke_suite():
    assert "smoke" in rwsbi.available_suites()
    records = rwsbi.run_suite("smoke")
    assert records and all(r["passed"] for r in records)
    with pytest.raises(rwsbi.ConfigError):
        rwsbi.run_suite("nope")
