import math

import numpy as np
import pytest

from panelbreak.dgp import (ErrorModel, FactorSpec, add_factors, draw_break,
                            gen_errors, inject_break, simulate_panel)
from panelbreak.errors import DimensionError, ParameterError
from panelbreak.panel import BreakSpec, PanelMatrix


def lag_autocorrelation(values, lag):
    x = values - values.mean(axis=1, keepdims=True)
    return float(np.sum(x[:, lag:] * x[:, :-lag]) / np.sum(x * x))


def test_errors_are_reproducible():
    a = gen_errors(ErrorModel.arma21(), 4, 60, seed=3)
    b = gen_errors(ErrorModel.arma21(), 4, 60, seed=3)
    c = gen_errors(ErrorModel.arma21(), 4, 60, seed=4)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_panel_rows_depend_only_on_their_index():
    small = gen_errors(ErrorModel.ar1(0.3), 2, 40, seed=9)
    large = gen_errors(ErrorModel.ar1(0.3), 5, 40, seed=9)
    assert np.array_equal(small.values, large.values[:2])


def test_ar1_autocorrelation():
    e = gen_errors(ErrorModel.ar1(0.3), 20, 5000, seed=1)
    assert abs(lag_autocorrelation(e.values, 1) - 0.3) < 0.03
    assert abs(e.values.var() - 1 / (1 - 0.09)) < 0.05


def test_iid_errors_are_standard_normal():
    e = gen_errors(ErrorModel.ar1(0.0), 20, 5000, seed=2)
    assert abs(e.values.mean()) < 0.01
    assert abs(e.values.var() - 1.0) < 0.03
    assert abs(lag_autocorrelation(e.values, 1)) < 0.02


def test_long_run_variance():
    assert ErrorModel.ar1(0.5).long_run_variance == pytest.approx(4.0)
    assert ErrorModel.arma21().long_run_variance == pytest.approx(1.44 / 1.21)


def test_arma_sample_long_run_variance():
    e = gen_errors(ErrorModel.arma21(), 400, 500, seed=3)
    lrv = 500 * np.var(e.values.mean(axis=1))
    assert abs(lrv - ErrorModel.arma21().long_run_variance) < 0.3


@pytest.mark.parametrize("text, label", [("ar1:0", "AR(0)"), ("ar1:0.3", "AR(0.3)"),
                                         ("arma21", "ARMA"), ("ARMA", "ARMA")])
def test_parse_and_label(text, label):
    assert ErrorModel.parse(text).label == label


def test_model_validation():
    with pytest.raises(ParameterError):
        ErrorModel.ar1(-1.0)
    with pytest.raises(ParameterError):
        ErrorModel.parse("garch")
    with pytest.raises(ParameterError):
        gen_errors(ErrorModel.ar1(0.0), 2, 10, burn_in=-1)


def test_inject_break_is_an_exact_step():
    panel = PanelMatrix(np.zeros((2, 6)))
    spec = BreakSpec.from_theta(0.5, 6, [1.5, -2.0])
    out = inject_break(panel, spec).values
    assert out[:, :3].tolist() == [[0.0] * 3] * 2
    assert out[:, 3:].tolist() == [[1.5] * 3, [-2.0] * 3]


def test_draw_break():
    spec = draw_break(7, 200, theta=0.5, seed=1)
    changed = spec.deltas[:4]
    assert spec.change_time == 100
    assert np.all(spec.deltas[4:] == 0)
    assert np.all((changed >= -0.4) & (changed <= 0.4))
    assert np.count_nonzero(changed) == 4
    assert draw_break(4, 10, fraction=0.0, seed=1).is_null
    with pytest.raises(ParameterError):
        draw_break(4, 10, fraction=1.5)


@pytest.mark.parametrize("rule, expected", [("weak", lambda n: n ** -0.5),
                                            ("strong", lambda n: n ** 0.25)])
def test_lambda_bar(rule, expected):
    panel = PanelMatrix(np.zeros((64, 10)))
    _, draw = add_factors(panel, FactorSpec(1, rule), seed=0)
    assert draw.lambda_bar == pytest.approx(expected(64))


def test_explicit_loadings():
    panel = PanelMatrix(np.zeros((3, 5)))
    loadings = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    out, draw = add_factors(panel, FactorSpec(2, loadings), seed=4)
    np.testing.assert_allclose(out.values, loadings @ draw.factors.T)
    np.testing.assert_allclose(draw.q_hat, loadings.T @ loadings / 4.0)
    with pytest.raises(DimensionError):
        add_factors(panel, FactorSpec(2, np.ones((2, 2))), seed=4)


def test_no_factors_is_identity():
    panel = PanelMatrix(np.ones((3, 5)))
    out, draw = add_factors(panel, FactorSpec(0), seed=1)
    assert out is panel
    assert draw.factors.shape == (5, 0)
    assert draw.max_loading_norm == 0.0


def test_ar_factors_have_unit_variance():
    panel = PanelMatrix(np.zeros((1, 20000)))
    _, draw = add_factors(panel, FactorSpec(1, 1.0, factor_ar=0.5), seed=2)
    f = draw.factors[:, 0]
    assert abs(f.var() - 1.0) < 0.08
    assert abs(np.corrcoef(f[1:], f[:-1])[0, 1] - 0.5) < 0.05


def test_factor_spec_validation():
    with pytest.raises(ParameterError):
        FactorSpec(-1)
    with pytest.raises(ParameterError):
        FactorSpec(1, factor_ar=1.0)
    with pytest.raises(ParameterError):
        FactorSpec(1, "medium").loading_matrix(4)


def test_simulate_panel_layers():
    model = ErrorModel.ar1(0.0)
    base, none = simulate_panel(model, 10, 50, seed=8)
    spec = BreakSpec.from_theta(0.5, 50, np.full(10, 2.0))
    shifted, _ = simulate_panel(model, 10, 50, breaks=spec, seed=8)
    assert none is None
    np.testing.assert_allclose(shifted.values - base.values,
                               inject_break(PanelMatrix(np.zeros((10, 50))), spec).values)
    with_factors, draw = simulate_panel(model, 10, 50, factors=FactorSpec(1, "weak"),
                                        seed=8)
    np.testing.assert_allclose(with_factors.values - base.values,
                               draw.loadings @ draw.factors.T, atol=1e-12)
    assert math.isclose(draw.lambda_bar, 10 ** -0.5)


def test_simulate_panel_leaves_seed_sequence_alone():
    ss = np.random.SeedSequence(21)
    first, _ = simulate_panel(ErrorModel.ar1(0.3), 4, 30, seed=ss)
    assert ss.n_children_spawned == 0
    again, _ = simulate_panel(ErrorModel.ar1(0.3), 4, 30, seed=ss)
    assert np.array_equal(first.values, again.values)


@pytest.mark.parametrize("model", [ErrorModel.ar1(0.0), ErrorModel.ar1(0.3),
                                   ErrorModel.arma21()])
def test_panels_are_uncorrelated(model):
    e = gen_errors(model, 8, 10000, seed=13)
    corr = np.corrcoef(e.values)
    off_diagonal = corr[~np.eye(8, dtype=bool)]
    assert np.max(np.abs(off_diagonal)) < 0.05
