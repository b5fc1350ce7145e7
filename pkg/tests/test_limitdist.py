import json
import math

import numpy as np
import pytest
from scipy import stats

from panelbreak.cusum import g, m
from panelbreak.dgp import ErrorModel, simulate_panel
from panelbreak.errors import KernelNotPSDError, MissingTableError, ParameterError
from panelbreak.estimators import make_weights, sigma_hat
from panelbreak.limitdist import (CACHE_SCHEMA, CritTable, build_kernel,
                                  check_covariance, covariance_kernel,
                                  critical_value, dh_closed, dh_finite,
                                  factor_kernel, functional_values, make_table,
                                  simulate_sup_distribution, table_for)
from panelbreak.panel import PanelMatrix
from panelbreak.teststat import check_v_process, compute_statistic, v_process


def test_closed_form_constants():
    assert dh_closed("ols")[0] == pytest.approx(13 / 28)
    assert dh_closed("wls")[0] == pytest.approx(math.pi ** 2 / 3 - 3)
    assert dh_closed("tau", 0.4)[0] == 1.0
    D, h = dh_closed("oracle")
    assert D == 0.0 and h(np.array([0.3, 0.6])).tolist() == [0.0, 0.0]
    with pytest.raises(ParameterError):
        dh_closed("tau")
    with pytest.raises(ParameterError):
        dh_closed("custom")


def test_wls_h_is_finite_at_the_ends():
    _, h = dh_closed("wls")
    values = h(np.array([0.0, 1e-12, 0.5, 1.0]))
    assert np.all(np.isfinite(values))
    assert values[0] == 0.0 and values[-1] == 0.0


def test_finite_constants_converge():
    t = 2000
    s = np.arange(1, t) / t
    D, h = dh_finite(make_weights("ols", t))
    assert abs(D - 13 / 28) <= 0.01
    assert np.max(np.abs(h - dh_closed("ols")[1](s))) <= 5 / t
    D, _ = dh_finite(make_weights("wls", t))
    assert abs(D - (math.pi ** 2 / 3 - 3)) <= 0.02
    D, h = dh_finite(make_weights("tau", t, tau=0.1))
    assert D == pytest.approx(1.0)
    assert np.max(np.abs(h - dh_closed("tau", 0.1)[1](s))) <= 5 / t


def test_kernel_shape_and_symmetry():
    points = np.linspace(0.1, 0.9, 9)
    D, h = dh_closed("ols")
    gamma = covariance_kernel(points, points, D, h)
    np.testing.assert_allclose(gamma, gamma.T, atol=1e-15)
    assert np.all(np.diag(gamma) > 0)
    oracle = covariance_kernel(points, points, *dh_closed("oracle"))
    np.testing.assert_allclose(np.diag(oracle), 2 * (points * (1 - points)) ** 2)


@pytest.mark.parametrize("kind, tau", [("ols", None), ("wls", None),
                                       ("tau", 0.1), ("tau", 0.5), ("oracle", None)])
def test_build_kernel(kind, tau):
    kernel = build_kernel(kind, tau, grid=200)
    assert kernel.grid == 200
    assert kernel.jitter <= 1e-10 * np.max(np.diag(kernel.gamma)) * 1.0001
    rebuilt = kernel.chol @ kernel.chol.T
    np.testing.assert_allclose(rebuilt, kernel.gamma + kernel.jitter * np.eye(200),
                               atol=1e-12)


def test_custom_kernel_uses_finite_constants():
    t = 200
    scheme = make_weights("custom", t, w=np.ones(t - 1))
    kernel = build_kernel(scheme=scheme, grid=50)
    assert kernel.kind == "custom"
    assert kernel.D == pytest.approx(dh_finite(make_weights("ols", t))[0])


def test_factor_kernel_rejects_indefinite_matrices():
    bad = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(KernelNotPSDError) as info:
        factor_kernel(bad)
    assert info.value.min_eigenvalue == pytest.approx(-1.0)


@pytest.mark.parametrize("tau", [0.1, 0.5])
def test_point_tau_paths_are_pinned(tau):
    kernel = build_kernel("tau", tau, grid=999)
    j = int(round(tau * 1000)) - 1
    assert kernel.points[j] == pytest.approx(tau)
    rng = np.random.default_rng(1)
    z = rng.standard_normal((200, kernel.grid)) @ kernel.chol.T
    assert np.max(np.abs(z[:, j])) <= 10 * math.sqrt(kernel.jitter)
    assert np.max(np.abs(z)) > 0.01


def check_covariance_by_trace(points, weights, rows):
    # 2 tr(A_u C A_v C) with A_u the quadratic form of the process at u
    cov = g(points[:, None], points[None, :])
    mu = m(points)
    eye = np.eye(points.size)
    forms = []
    for u in rows:
        r = cov[:, u] / mu[u]
        x = mu - cov[:, u] * r
        x[u] = 0.0
        a = weights * x / np.sum(weights * x * x)
        form = np.outer(eye[u], eye[u])
        for j in range(points.size):
            c = eye[j] - r[j] * eye[u]
            form = form - mu[u] * a[j] * np.outer(c, c)
        forms.append(form)
    return np.array([[2 * np.trace(fu @ cov @ fv @ cov) for fv in forms]
                     for fu in forms])


@pytest.mark.parametrize("kind", ["ols", "wls", "custom"])
def test_check_covariance_matches_trace_formula(kind):
    t = 9
    s = np.arange(1, t) / t
    w = {"ols": np.ones(t - 1), "wls": m(s) ** -2,
         "custom": np.linspace(0.5, 2.0, t - 1)}[kind]
    expected = check_covariance_by_trace(s, w, range(t - 1))
    np.testing.assert_allclose(check_covariance(s, s, w), expected,
                               rtol=1e-9, atol=1e-12)


def test_point_mass_check_covariance_matches_trace_formula():
    t = 10
    s = np.arange(1, t) / t
    w = np.zeros(t - 1)
    w[3] = 1.0
    rows = [j for j in range(t - 1) if j != 3]
    expected = check_covariance_by_trace(s, w, rows)
    np.testing.assert_allclose(check_covariance(s[rows], s[3:4], np.ones(1)),
                               expected, rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("kind", ["ols", "wls"])
def test_check_covariance_matches_simulated_processes(kind):
    n, t, reps = 4, 12, 20000
    scheme = make_weights(kind, t)
    rng = np.random.default_rng(21)
    values = np.empty((reps, t - 1))
    for r in range(reps):
        panel = PanelMatrix(rng.standard_normal((n, t)))
        values[r] = check_v_process(panel, scheme).values
    s = np.arange(1, t) / t
    expected = check_covariance(s, s, scheme.w)
    np.testing.assert_allclose(np.cov(values, rowvar=False), expected,
                               atol=0.1 * np.max(np.diag(expected)))


@pytest.mark.parametrize("kind, tau", [("check-ols", None), ("check-wls", None),
                                       ("check-tau", 0.5)])
def test_check_kernels(kind, tau):
    kernel = build_kernel(kind, tau, grid=199)
    assert kernel.kind == kind and math.isnan(kernel.D)
    # the shift-adjusted part is independent of the square at u
    assert np.all(np.diag(kernel.gamma) >= 2 * m(kernel.points) ** 2)
    if tau is None:
        assert kernel.grid == 199
    else:
        assert kernel.grid == 198
        assert not np.any(np.isclose(kernel.points, tau))
    rebuilt = kernel.chol @ kernel.chol.T
    np.testing.assert_allclose(rebuilt,
                               kernel.gamma + kernel.jitter * np.eye(kernel.grid),
                               atol=1e-12)


def test_simulation_is_reproducible():
    kernel = build_kernel("ols", grid=100)
    a = simulate_sup_distribution(kernel, "sup", 2500, seed=4)
    b = simulate_sup_distribution(kernel, "sup", 2500, seed=4)
    c = simulate_sup_distribution(kernel, "integral", 2500, seed=4)
    assert a.shape == (2500,)
    np.testing.assert_array_equal(a, b)
    assert np.all(c >= 0) and np.all(c <= a ** 2)
    with pytest.raises(ParameterError):
        simulate_sup_distribution(kernel, "mean", 10, seed=4)


def test_simulation_does_not_depend_on_workers():
    kernel = build_kernel("wls", grid=60)
    serial = simulate_sup_distribution(kernel, "sup", 2500, seed=6)
    parallel = simulate_sup_distribution(kernel, "sup", 2500, seed=6, workers=2)
    np.testing.assert_array_equal(serial, parallel)
    longer = simulate_sup_distribution(kernel, "sup", 4000, seed=6)
    np.testing.assert_array_equal(longer[:2000], serial[:2000])
    with pytest.raises(ParameterError):
        simulate_sup_distribution(kernel, "sup", 0, seed=6)


def test_critical_values():
    table = make_table("wls", functional="sup", grid=100, n_paths=2000, seed=3)
    levels = [0.10, 0.05, 0.025, 0.01]
    values = [critical_value(table, a) for a in levels]
    assert values == sorted(values)
    assert values[0] > 0
    assert critical_value(table, 0.2) < values[0]
    with pytest.raises(ParameterError):
        critical_value(table, 0.0)


def test_table_serialization():
    table = make_table("tau", 0.5, "integral", grid=50, n_paths=300, seed=1)
    again = CritTable.from_dict(json.loads(json.dumps(table.to_dict())))
    assert again.key == table.key
    assert again.quantiles == table.quantiles
    np.testing.assert_array_equal(again.sample, table.sample)


def test_cache_round_trip(cache):
    with pytest.raises(MissingTableError) as info:
        cache.get("ols", None, "sup", 60, 300, 1, build=False)
    assert info.value.key["grid"] == 60
    built = cache.get("ols", None, "sup", 60, 300, 1)
    path = cache.path(built.key)
    assert path.exists()
    assert [p.name for p in cache.directory.iterdir()] == [path.name]
    loaded = cache.get("ols", None, "sup", 60, 300, 1, build=False)
    assert loaded.quantiles == built.quantiles


def test_stale_cache_entries_are_rebuilt(cache):
    built = cache.get("oracle", None, "sup", 40, 200, 2)
    path = cache.path(built.key)
    data = json.loads(path.read_text())
    data["schema"] = CACHE_SCHEMA + 1
    data["quantiles"] = {"0.05": -1.0}
    path.write_text(json.dumps(data))
    assert cache.load(built.key) is None
    rebuilt = cache.get("oracle", None, "sup", 40, 200, 2)
    assert rebuilt.quantiles == built.quantiles


def test_table_for(cache):
    t = 100
    tau = make_weights("tau", t, tau=0.1)
    assert table_for(tau, "hat", grid=40, n_paths=200, cache=cache).kind == "tau"
    assert table_for(tau, "check", grid=40, n_paths=200, cache=cache).kind == "check-tau"
    custom = make_weights("custom", t, w=np.linspace(1, 2, t - 1))
    table = table_for(custom, "hat", grid=40, n_paths=200, cache=cache)
    assert table.kind == "custom"
    assert not any(cache.directory.glob("custom*"))


@pytest.mark.slow
def test_empirical_covariance_matches_kernel():
    n = t = 500
    reps = 2000
    ols = make_weights("ols", t)
    idx = np.arange(49, 499, 50)
    values = np.empty((reps, idx.size))
    for r in range(reps):
        panel, _ = simulate_panel(ErrorModel.ar1(0.0), n, t, seed=7000 + r)
        values[r] = v_process(panel, sigma_hat(panel, ols)).values[idx]
    s = (idx + 1) / t
    D, h = dh_finite(ols)
    expected = covariance_kernel(s, s, D, lambda u: h[np.rint(u * t).astype(int) - 1])
    centred = values - values.mean(axis=0)
    empirical = centred.T @ centred / (reps - 1)
    products = centred[:, :, None] * centred[:, None, :]
    se = products.std(axis=0, ddof=1) / math.sqrt(reps)
    z = np.abs(empirical - expected) / se
    assert np.all(np.diag(z) < 3)
    assert np.all(np.diag(z, 1) < 3)
    assert np.all(z < 4)
    assert np.all(np.abs(values.mean(axis=0)) < 3 * np.sqrt(np.diag(expected) / reps)
                  + 0.01)


def order_statistic_se(sample, alpha):
    n = sample.size
    p = 1 - alpha
    half = math.sqrt(n * p * (1 - p))
    lo = int(math.floor(n * p - half))
    hi = min(int(math.ceil(n * p + half)), n - 1)
    return (sample[hi] - sample[lo]) / 2


@pytest.mark.slow
@pytest.mark.parametrize("kind", ["ols", "wls"])
def test_quantiles_are_stable_under_grid_refinement(kind):
    # points j/500 are every other point of j/1000
    kernel = build_kernel(kind, grid=999)
    rng = np.random.default_rng(12)
    fine = {"sup": [], "integral": []}
    coarse = {"sup": [], "integral": []}
    for _ in range(10):
        paths = rng.standard_normal((2000, kernel.grid)) @ kernel.chol.T
        for functional in fine:
            fine[functional].append(functional_values(paths, functional))
            coarse[functional].append(functional_values(paths[:, 1::2], functional))
    for functional, bound in [("integral", 0.01), ("sup", 0.02)]:
        a = np.concatenate(coarse[functional])
        b = np.concatenate(fine[functional])
        for alpha in [0.10, 0.05, 0.01]:
            qa, qb = np.quantile(a, 1 - alpha), np.quantile(b, 1 - alpha)
            assert abs(qb - qa) < bound * qb
            if functional == "sup":
                assert qa <= qb


@pytest.mark.slow
@pytest.mark.parametrize("kind, functional", [("wls", "sup"), ("ols", "integral")])
def test_doubling_paths_moves_quantiles_within_their_error(kind, functional):
    small = make_table(kind, functional=functional, grid=200, n_paths=10000, seed=11)
    large = make_table(kind, functional=functional, grid=200, n_paths=20000, seed=11)
    for alpha in [0.10, 0.05, 0.025, 0.01]:
        se = order_statistic_se(small.sample, alpha)
        assert abs(critical_value(large, alpha) - critical_value(small, alpha)) < 2 * se


@pytest.mark.slow
@pytest.mark.parametrize("test, kind", [("check:ols", "check-ols"),
                                        ("check:wls", "check-wls")])
def test_check_statistic_follows_its_limit_law(test, kind):
    n = t = 200
    observed = []
    for r in range(500):
        panel, _ = simulate_panel(ErrorModel.ar1(0.0), n, t, seed=9000 + r)
        observed.append(compute_statistic(panel, test).normalized)
    table = make_table(kind, grid=t - 1, n_paths=10000, seed=5)
    assert stats.ks_2samp(observed, table.sample).pvalue > 0.01
