r"""
A walk through panelbreak.

Panels are N x T matrices, one series per row::

    >>> from panelbreak import PanelMatrix, make_weights, sigma_hat, run_test
    >>> from panelbreak.cusum import cusum_paths, cusum_squares_mean, m_grid
    >>> p = PanelMatrix([[1, 2, 3, 4], [4, 3, 2, 1]])
    >>> p
    PanelMatrix(N=2, T=4)
    >>> cusum_paths(p).tolist()
    [[-0.75, -1.0, -0.75], [0.75, 1.0, 0.75]]
    >>> cusum_squares_mean(p).tolist()
    [0.5625, 1.0, 0.5625]

The mean long-run variance is the slope of ``zbar`` on ``m``.  With a
single anchor ``tau`` it is just a ratio::

    >>> sigma_hat(p, make_weights('tau', 4, tau=0.5))
    4.0
    >>> round(sigma_hat(p, make_weights('ols', 4)), 10)
    3.4705882353
    >>> m_grid(4).tolist()
    [0.1875, 0.25, 0.1875]

Simulated panels are reproducible from their seed::

    >>> from panelbreak.dgp import ErrorModel, simulate_panel
    >>> panel, _ = simulate_panel(ErrorModel.ar1(0.0), 100, 200, seed=7)
    >>> again, _ = simulate_panel(ErrorModel.ar1(0.0), 100, 200, seed=7)
    >>> bool((panel.values == again.values).all())
    True
    >>> 0.7 < sigma_hat(panel, make_weights('ols', 200)) < 1.3
    True

A test with asymptotic critical values.  Tables are simulated once and
cached on disk::

    >>> import tempfile
    >>> from panelbreak.limitdist import CritTableCache
    >>> cache = CritTableCache(tempfile.mkdtemp())
    >>> outcome = run_test(panel, 'wls', cache=cache, grid=200, n_paths=2000)
    >>> outcome.test, outcome.calibration, outcome.critical_value > 0
    ('hat:wls', 'asymptotic', True)
    >>> outcome.reject   # random
    False
    >>> again = run_test(panel, 'wls', cache=cache, grid=200, n_paths=2000, build=False)
    >>> again.critical_value == outcome.critical_value
    True
    >>> run_test(panel, 'ols', cache=cache, grid=200, n_paths=2000, build=False)
    Traceback (most recent call last):
    ...
    panelbreak.errors.MissingTableError: no critical-value table for ...

The change-adjusted estimator removes an estimated shift first::

    >>> outcome = run_test(panel, 'ols', estimator='check', cache=cache,
    ...                    grid=200, n_paths=2000)
    >>> outcome.test, outcome.extra['table']['kind']
    ('check:ols', 'check-ols')

Under cross-sectional dependence the wild bootstrap calibrates the test::

    >>> from panelbreak.bootstrap import bootstrap_pvalue
    >>> small, _ = simulate_panel(ErrorModel.ar1(0.3), 20, 30, seed=1)
    >>> res = bootstrap_pvalue(small, 'wls', b_reps=19, seed=2, p_max=4)
    >>> res.b_reps, 0 < res.p_value <= 1
    (19, True)
"""
