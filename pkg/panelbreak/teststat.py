"""
Test processes and test statistics.

The centred CUSUM-square process is

    V(k/T; sigma2) = sqrt(N) (zbar[k] - sigma2 m_T(k/T)),

and a test rejects for large values of ``sup |V|`` or of ``T**-1 sum V**2``,
normalized by ``kappa_hat`` (sup) or ``kappa_hat**2`` (integral).  With the
change-adjusted estimator the process is evaluated at each ``u`` with the
``u``-specific ``check_sigma(u)``, and the functional is taken over ``u``.

EXAMPLES::

    >>> from panelbreak.panel import PanelMatrix
    >>> tp = v_process(PanelMatrix([[1, 2, 3, 4]]), 1.0)
    >>> tp.values.tolist()
    [0.375, 0.75, 0.375]
    >>> sup_stat(tp), integral_stat(tp)
    (0.75, 0.2109375)
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .config import CRIT_SEED, GRID, KAPPA_FLOOR, N_PATHS, P_MAX
from .cusum import cusum_paths, m_grid
from .errors import DegenerateDataError, ParameterError
from .estimators import (WeightScheme, check_sigma_grid, kappa_from_fourths,
                         parse_scheme, sigma_from_squares)

logger = logging.getLogger(__name__)

PLAIN = 'plain'
CHANGE_ADJUSTED = 'change-adjusted'
HAT = 'hat'
CHECK = 'check'
ESTIMATORS = (HAT, CHECK)
SUP = 'sup'
INTEGRAL = 'integral'
FUNCTIONALS = (SUP, INTEGRAL)
ASYMPTOTIC = 'asymptotic'
BOOTSTRAP = 'bootstrap'


@dataclass(frozen=True, eq=False)
class TestProcess:
    """
    ``V(k/T)`` for ``k = 1..T-1``.  ``sigma2_used`` is a scalar for the
    plain process and a grid vector for the change-adjusted one, whose
    values may contain NaN where the estimator is undefined.
    """
    __test__ = False

    values: np.ndarray
    sigma2_used: object
    kind: str
    t: int


def v_process(panel, sigma2):
    """
    The plain process with a given ``sigma2``.

        >>> from panelbreak.panel import PanelMatrix
        >>> v_process(PanelMatrix(np.full((4, 5), 2.0)), 0.0).values.tolist()
        [0.0, 0.0, 0.0, 0.0]
    """
    if sigma2 < 0:
        raise ParameterError('sigma2 must be nonnegative, got %r' % sigma2)
    zbar = np.mean(cusum_paths(panel) ** 2, axis=0)
    return _process(zbar, sigma2, panel.shape, PLAIN)


def _process(zbar, sigma2, shape, kind):
    n, t = shape
    with np.errstate(invalid='ignore'):
        values = math.sqrt(n) * (zbar - sigma2 * m_grid(t))
    return TestProcess(values, sigma2, kind, t)


def sup_stat(tp):
    """
    ``max |V|`` over the grid points where the process is defined.
    """
    values = tp.values[~np.isnan(tp.values)]
    if values.size == 0:
        return 0.0
    return float(np.max(np.abs(values)))


def integral_stat(tp):
    """
    ``T**-1 sum V**2``, the step-function approximation of ``int V**2``.
    """
    return float(np.nansum(tp.values ** 2) / tp.t)


def apply_functional(tp, functional):
    if functional == SUP:
        return sup_stat(tp)
    if functional == INTEGRAL:
        return integral_stat(tp)
    raise ParameterError('unknown functional %r' % functional)


def argmax_u(tp):
    """
    The grid point ``k/T`` where ``|V|`` peaks.  A diagnostic of the change
    location, not an estimator of it.
    """
    values = np.abs(tp.values)
    if np.all(np.isnan(values)):
        return None
    return float(np.nanargmax(values) + 1) / tp.t


def check_v_process(panel, scheme=None, paths=None):
    """
    ``V(u; check_sigma(u))`` for every grid point ``u = k/T``.
    """
    sigma2 = check_sigma_grid(panel, scheme, paths=paths)
    z = cusum_paths(panel) if paths is None else paths
    zbar = np.mean(z ** 2, axis=0)
    return _process(zbar, sigma2, panel.shape, CHANGE_ADJUSTED)


def check_v_statistic(panel, scheme=None, functional=SUP):
    """
    The functional over ``u`` of the change-adjusted process.

        >>> from panelbreak.panel import PanelMatrix
        >>> check_v_statistic(PanelMatrix(np.ones((3, 6))))
        0.0
    """
    return apply_functional(check_v_process(panel, scheme), functional)


@dataclass(frozen=True)
class TestSpec:
    """
    One test: a weight scheme name, an estimator (``'hat'`` or
    ``'check'``) and a functional.

        >>> parse_test('check:tau:0.1')
        TestSpec(scheme='tau:0.1', estimator='check', functional='sup')
        >>> parse_test('hat:wls', 'integral').label
        'hat:wls:integral'
    """
    __test__ = False

    scheme: str = 'ols'
    estimator: str = HAT
    functional: str = SUP

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ParameterError("estimator must be 'hat' or 'check', got %r"
                                 % self.estimator)
        if self.functional not in FUNCTIONALS:
            raise ParameterError("functional must be 'sup' or 'integral', got %r"
                                 % self.functional)

    @property
    def label(self):
        text = '%s:%s' % (self.estimator, self.scheme)
        if self.functional != SUP:
            text += ':' + self.functional
        return text

    def weights(self, t):
        return parse_scheme(self.scheme, t)


def parse_test(text, functional=SUP):
    """
    ``'hat:ols'``, ``'check:wls'``, ``'hat:tau:0.1'``, ``'check:0.5'``; a
    trailing ``':sup'`` or ``':integral'`` overrides ``functional``.
    """
    if isinstance(text, TestSpec):
        return text
    parts = str(text).strip().lower().split(':')
    estimator = HAT
    if parts[0] in ESTIMATORS:
        estimator = parts.pop(0)
    if len(parts) > 1 and parts[-1] in FUNCTIONALS:
        functional = parts.pop()
    if not parts or not parts[0]:
        raise ParameterError('test %r names no weight scheme' % text)
    scheme = ':'.join(parts)
    if scheme.replace('.', '', 1).isdigit():
        scheme = 'tau:' + scheme
    return TestSpec(scheme, estimator, functional)


@dataclass(frozen=True)
class StatResult:
    """
    A statistic and its normalization by ``kappa_hat``.
    """
    statistic: float
    kappa2: float
    normalized: float
    sigma2: object
    argmax_u: float


def _normalize(statistic, kappa2, functional):
    if kappa2 < KAPPA_FLOOR:
        if statistic == 0:
            return 0.0
        raise DegenerateDataError('kappa_hat**2 = %.3g is below %g'
                                  % (kappa2, KAPPA_FLOOR))
    if functional == SUP:
        return statistic / math.sqrt(kappa2)
    return statistic / kappa2


def compute_statistics(panel, specs, schemes=None):
    """
    Evaluate several tests on one panel, sharing the CUSUM paths.

    ``schemes`` optionally maps scheme names to prebuilt
    :class:`~panelbreak.estimators.WeightScheme` objects.

    EXAMPLES::

        >>> from panelbreak.panel import PanelMatrix
        >>> p = PanelMatrix(np.ones((3, 6)))
        >>> [r.normalized for r in compute_statistics(p, ['hat:ols', 'check:ols'])]
        [0.0, 0.0]
    """
    specs = [parse_test(s) for s in specs]
    n, t = panel.shape
    z = cusum_paths(panel)
    z2 = z ** 2
    zbar = z2.mean(axis=0)
    zz = (z2 ** 2).mean(axis=0)
    schemes = {} if schemes is None else dict(schemes)
    checked = {}
    out = []
    for spec in specs:
        scheme = schemes.get(spec.scheme)
        if scheme is None:
            scheme = schemes[spec.scheme] = spec.weights(t)
        kappa2 = kappa_from_fourths(zz, scheme)
        if spec.estimator == HAT:
            sigma2 = sigma_from_squares(zbar, scheme)
            tp = _process(zbar, sigma2, (n, t), PLAIN)
        else:
            if spec.scheme not in checked:
                checked[spec.scheme] = check_sigma_grid(panel, scheme, paths=z)
            sigma2 = checked[spec.scheme]
            tp = _process(zbar, sigma2, (n, t), CHANGE_ADJUSTED)
        statistic = apply_functional(tp, spec.functional)
        out.append(StatResult(statistic, kappa2,
                              _normalize(statistic, kappa2, spec.functional),
                              sigma2, argmax_u(tp)))
    return out


def compute_statistic(panel, spec):
    """
    One test statistic; see :func:`compute_statistics`.

        >>> from panelbreak.panel import PanelMatrix
        >>> r = compute_statistic(PanelMatrix([[1, 2, 3, 4], [4, 3, 2, 1]]), 'hat:tau:0.5')
        >>> r.sigma2, round(r.statistic, 6)
        (4.0, 0.265165)
    """
    return compute_statistics(panel, [spec])[0]


@dataclass
class TestOutcome:
    """
    A complete test decision with provenance.

    ``reject`` is ``normalized > critical_value`` under asymptotic
    calibration and ``p_value < alpha`` under the bootstrap.
    ``seed`` is the seed given by the caller, ``crit_seed`` the seed of the
    critical-value table.
    """
    __test__ = False

    test: str
    scheme: str
    estimator: str
    functional: str
    calibration: str
    alpha: float
    statistic: float
    kappa: float
    normalized: float
    reject: bool
    critical_value: float = None
    p_value: float = None
    argmax_u: float = None
    n_panels: int = None
    n_time: int = None
    seed: object = None
    crit_seed: int = None
    grid: int = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def run_test(panel, scheme='ols', estimator=HAT, functional=SUP,
             calibration=ASYMPTOTIC, alpha=0.05, seed=None, cache=None,
             build=True, grid=GRID, n_paths=N_PATHS, crit_seed=CRIT_SEED,
             b_reps=500, p_max=P_MAX, bandwidth=None):
    """
    Run one test on a panel.

    INPUT:

    - ``scheme`` -- a scheme name (``'ols'``, ``'wls'``, ``'tau:0.1'``) or a
      :class:`~panelbreak.estimators.WeightScheme`.

    - ``calibration`` -- ``'asymptotic'`` compares the normalized statistic
      with a simulated quantile of the limit (cached in ``cache``; with
      ``build=False`` a missing table raises
      :class:`~panelbreak.errors.MissingTableError`); ``'bootstrap'`` runs
      the factor-model wild bootstrap with ``b_reps`` replicates.

    OUTPUT: a :class:`TestOutcome`.
    """
    if not 0 < alpha < 1:
        raise ParameterError('alpha must lie in (0, 1), got %r' % alpha)
    if isinstance(scheme, WeightScheme):
        weights = scheme
        spec = TestSpec(scheme.name, estimator, functional)
    else:
        spec = TestSpec(str(scheme).lower(), estimator, functional)
        weights = spec.weights(panel.n_time)
        spec = TestSpec(weights.name, estimator, functional)
    result = compute_statistics(panel, [spec], {spec.scheme: weights})[0]
    outcome = dict(test=spec.label, scheme=weights.label, estimator=estimator,
                   functional=functional, calibration=calibration, alpha=alpha,
                   statistic=result.statistic,
                   kappa=math.sqrt(max(result.kappa2, 0.0)),
                   normalized=result.normalized, argmax_u=result.argmax_u,
                   n_panels=panel.n_panels, n_time=panel.n_time, seed=seed)
    if calibration == ASYMPTOTIC:
        from .limitdist import critical_value, table_for
        table = table_for(weights, estimator, functional, grid=grid,
                          n_paths=n_paths, seed=crit_seed, cache=cache,
                          build=build)
        cv = critical_value(table, alpha)
        outcome.update(critical_value=cv, reject=bool(result.normalized > cv),
                       grid=grid, crit_seed=crit_seed)
        outcome['extra'] = {'table': table.key}
    elif calibration == BOOTSTRAP:
        from .bootstrap import bootstrap_pvalue
        boot = bootstrap_pvalue(panel, weights, functional, estimator,
                                b_reps=b_reps, seed=seed, p_max=p_max,
                                bandwidth=bandwidth, observed=result)
        outcome.update(p_value=boot.p_value, reject=bool(boot.p_value < alpha))
        outcome['extra'] = boot.diagnostics()
    else:
        raise ParameterError("calibration must be 'asymptotic' or 'bootstrap', "
                             'got %r' % calibration)
    logger.info('%s: normalized %.4g, reject=%s', spec.label,
                result.normalized, outcome['reject'])
    return TestOutcome(**outcome)

