import math

import numpy as np
import pytest

import mlpmcmc


def test_kernel_and_levels():
    assert mlpmcmc.kernel(0.7, 0.4, 1.0) == pytest.approx(0.7)
    L, M = mlpmcmc.choose_levels(0.1, 0.4, M_min=1)
    assert L == 4
    assert M[0] == 132
    assert all(a >= b for a, b in zip(M, M[1:]))


def test_simulate_is_reproducible():
    params = mlpmcmc.default_params("ssm")
    a = mlpmcmc.simulate(params, T=10, level=3, seed=5)
    b = mlpmcmc.simulate(params, T=10, level=3, seed=5)
    assert a["y"].shape == (10,)
    assert a["v"].shape == (81,)
    np.testing.assert_array_equal(a["y"], b["y"])


def test_one_particle_filter_matches_density():
    params = mlpmcmc.default_params("ssm")
    y = [1.2]
    log_z, w = mlpmcmc.particle_filter(y, params, level=0, particles=1, seed=3)
    v = mlpmcmc.volatility_path(params, list(w), level=0, horizon=1)
    s2 = params["sigma_obs"] ** 2
    want = -0.5 * math.log(2 * math.pi * s2) - 0.5 * (y[0] - v[1]) ** 2 / s2
    assert log_z == pytest.approx(want, rel=1e-12)


def test_pmcmc_and_mlpmcmc_run():
    params = mlpmcmc.default_params("ssm")
    data = mlpmcmc.simulate(params, T=3, level=4, seed=1)
    steps = [0.3, 0.3, 0.3, 0.3]
    chain = mlpmcmc.pmcmc(list(data["y"]), params, level=1, particles=10, iterations=50, seed=2, step_sizes=steps)
    assert chain["z"].shape == (51, 4)
    assert 0.0 <= chain["acceptance_rate"] <= 1.0
    assert len(chain["estimate"]) == 4

    est = mlpmcmc.mlpmcmc(list(data["y"]), params, base_level=0, M=[20, 10], particles=10, seed=2, step_sizes=steps,
                          functionals=["V0", "V[3]"])
    assert est["names"] == ["V0", "V[3]"]
    for f, value in enumerate(est["value"]):
        assert value == pytest.approx(sum(c[f] for c in est["components"]), abs=1e-12)


def test_return_statistics():
    prices = [100.0, 101.0, 99.5, 100.2, 102.0, 101.1]
    r = mlpmcmc.log_returns(prices)
    s = mlpmcmc.return_stats(list(r))
    assert s["n"] == 5
    assert s["mean"] == pytest.approx(np.mean(r))
    assert s["variance"] == pytest.approx(np.var(r, ddof=1))
    curve = mlpmcmc.lagged_abs_correlation(list(r), 2)
    assert sorted(curve) == [-2, -1, 0, 1, 2]
    n = len(r)
    for j, value in curve.items():
        idx = [i for i in range(n) if 0 <= i - j < n]
        a = np.abs(r[idx])
        b = r[[i - j for i in idx]]
        assert value == pytest.approx(np.corrcoef(a, b)[0, 1], rel=1e-10)


def test_errors_are_raised():
    bad = mlpmcmc.default_params("ssm")
    bad["H"] = 0.7
    with pytest.raises(mlpmcmc.Error, match="H"):
        mlpmcmc.simulate(bad, T=2)


def test_run_command_writes_files(tmp_path):
    mlpmcmc.run_command("simulate", "[data]\nT = 4\ndata_level = 2\n", str(tmp_path), seed=3)
    assert (tmp_path / "data.csv").exists()
    assert (tmp_path / "resolved_config.ini").exists()
