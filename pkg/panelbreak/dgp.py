"""
Seeded synthetic panels.

Errors follow one of two stationary linear models,

- ``AR(rho)``: ``e[t] = rho e[t-1] + eps[t]``,
- ``ARMA``: ``e[t] = 0.2 e[t-1] - 0.3 e[t-2] + eps[t] + 0.2 eps[t-1]``,

with ``eps`` iid standard normal; common factors ``lambda_i' f_t`` and mean
shifts ``delta_i 1(t > t0)`` are layered on top.  Each panel draws from its
own child stream, so a panel's values depend only on the seed and its index.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .config import BURN_IN
from .errors import DimensionError, ParameterError
from .panel import BreakSpec, PanelMatrix
from .rng import as_seed_sequence, spawn_generators

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ErrorModel:
    """
    A stationary ARMA error model.

    EXAMPLES::

        >>> ErrorModel.ar1(0.3).label, ErrorModel.arma21().label
        ('AR(0.3)', 'ARMA')
        >>> round(ErrorModel.arma21().long_run_variance, 6)
        1.190083
        >>> ErrorModel.parse('ar1:0') == ErrorModel.ar1(0.0)
        True
        >>> ErrorModel.ar1(1.0)
        Traceback (most recent call last):
        ...
        panelbreak.errors.ParameterError: AR(1) needs |rho| < 1, got 1.0
    """
    kind: str
    rho: float = 0.0

    def __post_init__(self):
        if self.kind not in ('ar1', 'arma21'):
            raise ParameterError('unknown error model %r' % self.kind)
        if self.kind == 'ar1' and not abs(self.rho) < 1:
            raise ParameterError('AR(1) needs |rho| < 1, got %r' % self.rho)

    @classmethod
    def ar1(cls, rho=0.0):
        return cls('ar1', float(rho))

    @classmethod
    def arma21(cls):
        return cls('arma21', 0.0)

    @classmethod
    def parse(cls, text):
        kind, _, rho = str(text).strip().lower().partition(':')
        if kind in ('ar1', 'ar'):
            return cls.ar1(float(rho) if rho else 0.0)
        if kind in ('arma21', 'arma'):
            return cls.arma21()
        raise ParameterError('unknown error model %r' % text)

    @property
    def filter(self):
        """
        ``(b, a)`` coefficients for :func:`scipy.signal.lfilter`.
        """
        if self.kind == 'ar1':
            return [1.0], [1.0, -self.rho]
        return [1.0, 0.2], [1.0, -0.2, 0.3]

    @property
    def long_run_variance(self):
        b, a = self.filter
        return (sum(b) / sum(a)) ** 2

    @property
    def label(self):
        if self.kind == 'arma21':
            return 'ARMA'
        return 'AR(%g)' % self.rho


def gen_errors(model, n, t, burn_in=BURN_IN, seed=None):
    """
    Simulate ``n`` independent stationary error series of length ``t``.

    Recursions start at zero and the first ``burn_in`` values are dropped.

    EXAMPLES::

        >>> e = gen_errors(ErrorModel.ar1(0.0), 3, 50, seed=1)
        >>> e.shape
        (3, 50)
        >>> bool((gen_errors(ErrorModel.ar1(0.0), 3, 50, seed=1).values == e.values).all())
        True
    """
    if burn_in < 0:
        raise ParameterError('burn_in must be nonnegative')
    if n < 1:
        raise DimensionError('need at least one panel')
    gens = spawn_generators(seed, n)
    eps = np.stack([g.standard_normal(t + burn_in) for g in gens])
    b, a = model.filter
    series = signal.lfilter(b, a, eps, axis=1)
    return PanelMatrix(series[:, burn_in:])


def inject_break(panel, spec):
    """
    Add ``spec.deltas[i]`` to panel ``i`` after the change time.

        >>> p = PanelMatrix([[0, 0, 0, 0]])
        >>> inject_break(p, BreakSpec.from_theta(0.5, 4, [1.0])).values.tolist()
        [[0.0, 0.0, 1.0, 1.0]]
    """
    spec.validate(panel)
    step = np.zeros(panel.n_time)
    step[spec.change_time:] = 1.0
    return PanelMatrix(panel.values + np.outer(spec.deltas, step))


def draw_break(n, t, theta=0.5, low=-0.4, high=0.4, fraction=0.5, seed=None):
    """
    Uniform ``[low, high]`` shifts on the first ``ceil(fraction n)`` panels.

        >>> spec = draw_break(5, 100, seed=3)
        >>> int((spec.deltas != 0).sum()), spec.change_time
        (3, 50)
    """
    if not 0 <= fraction <= 1:
        raise ParameterError('change fraction must lie in [0, 1]')
    changed = int(math.ceil(fraction * n - 1e-9))
    rng = np.random.Generator(np.random.PCG64(as_seed_sequence(seed)))
    deltas = np.zeros(n)
    deltas[:changed] = rng.uniform(low, high, size=changed)
    return BreakSpec.from_theta(theta, t, deltas)


@dataclass(frozen=True, eq=False)
class FactorSpec:
    """
    Common factors ``f_t`` (``p`` of them) and their loadings.

    ``loadings`` is ``'weak'`` (every loading ``N**-0.5``), ``'strong'``
    (``N**-0.125``), a scalar used for every panel, or an explicit N x p
    matrix.  With ``factor_ar = 0`` the factors are iid standard normal;
    otherwise each follows a unit-variance AR(1).
    """
    p: int = 1
    loadings: object = 'weak'
    factor_ar: float = 0.0

    def __post_init__(self):
        if self.p < 0:
            raise ParameterError('number of factors must be nonnegative')
        if not abs(self.factor_ar) < 1:
            raise ParameterError('factor AR coefficient must satisfy |phi| < 1')

    def loading_matrix(self, n):
        rule = self.loadings
        if isinstance(rule, str):
            if rule == 'weak':
                value = n ** -0.5
            elif rule == 'strong':
                value = n ** -0.125
            else:
                raise ParameterError('unknown loading rule %r' % rule)
            return np.full((n, self.p), value)
        matrix = np.asarray(rule, dtype=float)
        if matrix.ndim == 0:
            return np.full((n, self.p), float(matrix))
        if matrix.ndim == 1:
            matrix = matrix[:, None]
        if matrix.shape != (n, self.p):
            raise DimensionError('loadings have shape %s, expected (%d, %d)'
                                 % (matrix.shape, n, self.p))
        if not np.all(np.isfinite(matrix)):
            raise ParameterError('loadings must be finite')
        return matrix


@dataclass(frozen=True, eq=False)
class FactorDraw:
    """
    Realized factors and loadings, with the dependence diagnostics

    - ``lambda_bar = N**-0.5 * sum ||lambda_i||**2`` (tends to 0 under weak
      and to infinity under strong cross-sectional dependence),
    - ``q_hat = sum lambda_i lambda_i' / sum ||lambda_i||**2``.
    """
    factors: np.ndarray
    loadings: np.ndarray

    @property
    def lambda_bar(self):
        n = self.loadings.shape[0]
        return float(np.sum(self.loadings ** 2) / math.sqrt(n))

    @property
    def q_hat(self):
        total = np.sum(self.loadings ** 2)
        if total == 0:
            return np.zeros((self.loadings.shape[1],) * 2)
        return self.loadings.T @ self.loadings / total

    @property
    def max_loading_norm(self):
        if self.loadings.size == 0:
            return 0.0
        return float(np.max(np.linalg.norm(self.loadings, axis=1)))


def add_factors(panel, spec, seed=None):
    """
    Add ``lambda_i' f_t`` to every cell.

    OUTPUT: the new panel and the :class:`FactorDraw`.

    EXAMPLES::

        >>> p = PanelMatrix(np.zeros((16, 5)))
        >>> q, draw = add_factors(p, FactorSpec(1, 'weak'), seed=0)
        >>> draw.lambda_bar
        0.25
        >>> q2, draw2 = add_factors(p, FactorSpec(0), seed=0)
        >>> q2 is p, draw2.factors.shape
        (True, (5, 0))
    """
    n, t = panel.shape
    loadings = spec.loading_matrix(n)
    if spec.p == 0:
        return panel, FactorDraw(np.zeros((t, 0)), loadings)
    rng = np.random.Generator(np.random.PCG64(as_seed_sequence(seed)))
    factors = rng.standard_normal((t, spec.p))
    if spec.factor_ar:
        phi = spec.factor_ar
        innovations = factors * math.sqrt(1 - phi ** 2)
        # stationary start
        innovations[0] = factors[0]
        factors = signal.lfilter([1.0], [1.0, -phi], innovations, axis=0)
    draw = FactorDraw(factors, loadings)
    logger.debug('factors: p=%d lambda_bar=%.4g', spec.p, draw.lambda_bar)
    return PanelMatrix(panel.values + loadings @ factors.T), draw


def simulate_panel(model, n, t, breaks=None, factors=None, seed=None,
                   burn_in=BURN_IN):
    """
    Errors, then factors, then breaks, each from its own child of ``seed``.

    ``breaks`` is a :class:`~panelbreak.panel.BreakSpec` or ``None``;
    ``factors`` a :class:`FactorSpec` or ``None``.  Returns the panel and
    the :class:`FactorDraw` (``None`` without factors).
    """
    error_seed, factor_seed = as_seed_sequence(seed).spawn(2)
    panel = gen_errors(model, n, t, burn_in=burn_in, seed=error_seed)
    draw = None
    if factors is not None:
        panel, draw = add_factors(panel, factors, seed=factor_seed)
    if breaks is not None:
        panel = inject_break(panel, breaks)
    return panel, draw
