"""
Factor-model wild bootstrap for cross-sectionally dependent panels.

The demeaned panel ``eta[i, t] = Y[i, t] - mean_i`` is split by principal
components into common factors and idiosyncratic residuals,

    eta = lambda_hat f_hat' + e_hat,

with the number of factors chosen by the Bai-Ng ``IC_p2`` criterion.  Each
replicate then builds

    Y*[i, t] = lambda_hat_i' f*_t + xi[i, t] e_hat[i, t],

where ``xi`` are Gaussian multipliers with covariance
``K((u - v) / log T)``, ``K(s) = min(2 max(0, 1 - |s|), 1)``, and ``f*`` is
Gaussian with the Bartlett long-run covariance of ``f_hat``.  The test
statistic is recomputed on ``Y*`` exactly as on the data; factors are not
refit inside replicates.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .config import P_MAX, hac_bandwidth
from .dgp import FactorDraw
from .errors import ParameterError
from .panel import PanelMatrix
from .rng import as_seed_sequence
from .teststat import TestSpec, compute_statistics, parse_test

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FactorFit:
    """
    Principal-components estimates, normalized so that
    ``factors' factors / T`` is the identity.

    ``ic`` holds the criterion for ``0..p_max`` factors.
    """
    p_hat: int
    loadings: np.ndarray
    factors: np.ndarray
    residuals: np.ndarray
    ic: np.ndarray

    @property
    def draw(self):
        return FactorDraw(self.factors, self.loadings)


def estimate_factors(panel, p_max=P_MAX):
    """
    Estimate the number of factors and the factor model of the demeaned
    panel.

    EXAMPLES::

        >>> lam = np.arange(1.0, 7.0)[:, None]
        >>> f = np.array([[1.0], [-1.0], [2.0], [0.0], [-2.0]])
        >>> fit = estimate_factors(PanelMatrix(lam @ f.T), p_max=3)
        >>> fit.p_hat
        1
        >>> bool(np.abs(fit.residuals).max() < 1e-8)
        True
    """
    n, t = panel.shape
    if not 0 <= p_max < min(n, t):
        raise ParameterError('p_max must lie in 0..%d for N = %d, T = %d, got %r'
                             % (min(n, t) - 1, n, t, p_max))
    eta = panel.values - panel.values.mean(axis=1, keepdims=True)
    u, s, vt = scipy.linalg.svd(eta, full_matrices=False)
    s2 = s ** 2
    tail = np.append(np.cumsum(s2[::-1])[::-1], 0.0) / (n * t)
    penalty = (n + t) / float(n * t) * math.log(min(n, t))
    k = np.arange(p_max + 1)
    # residual variance below rounding level counts as zero
    floor = max(tail[0] * np.finfo(float).eps, np.finfo(float).tiny)
    ic = np.log(np.maximum(tail[k], floor)) + k * penalty
    p = int(np.argmin(ic))
    factors = math.sqrt(t) * vt[:p].T
    loadings = u[:, :p] * s[:p] / math.sqrt(t)
    residuals = eta - loadings @ factors.T
    logger.debug('IC_p2 over 0..%d: %s -> p_hat = %d', p_max, ic, p)
    return FactorFit(p, loadings, factors, residuals, ic)


def multiplier_kernel(s):
    """
    ``K(s) = min(2 max(0, 1 - |s|), 1)``.

        >>> multiplier_kernel(np.array([0.0, 0.5, 0.75, 1.0, 2.0])).tolist()
        [1.0, 1.0, 0.5, 0.0, 0.0]
    """
    s = np.abs(np.asarray(s, dtype=float))
    return np.minimum(2 * np.maximum(0.0, 1 - s), 1.0)


@dataclass(frozen=True)
class MultiplierSpec:
    """
    Stationary Gaussian multipliers of length ``t`` with autocovariance
    ``K(lag / log t)``.
    """
    t: int

    def __post_init__(self):
        if self.t < 2:
            raise ParameterError('multipliers need T >= 2, got %d' % self.t)

    @property
    def bandwidth(self):
        return math.log(self.t)

    def autocovariance(self):
        """
        ``K(lag / b_T)`` for lags ``0..T-1``.
        """
        return multiplier_kernel(np.arange(self.t) / self.bandwidth)

    @property
    def band(self):
        """
        The largest lag with nonzero covariance.
        """
        return int(np.count_nonzero(self.autocovariance()[1:]))


@functools.lru_cache(maxsize=32)
def _multiplier_factor(t):
    """
    A square root of the multiplier covariance: ``('banded', L)`` with ``L``
    the lower banded Cholesky factor, or ``('circulant', root, size)``.

    The truncated kernel is not positive definite for most ``T``.  Then the
    Toeplitz matrix is embedded in a circulant one, negative eigenvalues are
    set to zero and the result is rescaled to unit variance.
    """
    spec = MultiplierSpec(t)
    acov = spec.autocovariance()
    q = spec.band
    ab = np.zeros((q + 1, t))
    for d in range(q + 1):
        ab[d, :t - d] = acov[d]
    try:
        return ('banded', scipy.linalg.cholesky_banded(ab, lower=True))
    except scipy.linalg.LinAlgError:
        pass
    size = 1 << int(math.ceil(math.log2(2 * t)))
    c = np.zeros(size)
    c[:q + 1] = acov[:q + 1]
    if q:
        c[size - q:] = acov[1:q + 1][::-1]
    eig = np.fft.rfft(c).real
    logger.info('multiplier kernel for T = %d is not positive definite '
                '(min eigenvalue %.3g); using circulant embedding', t, eig.min())
    eig = np.clip(eig, 0.0, None)
    # mean over all size eigenvalues, from the half spectrum
    variance = (eig[0] + eig[-1] + 2 * eig[1:-1].sum()) / size
    return ('circulant', np.sqrt(eig / variance), size)


def _generator(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(as_seed_sequence(seed)))


def gen_multipliers(n, t, seed=None):
    """
    An ``n x t`` matrix of multipliers, rows independent.

    ``seed`` may also be a :class:`numpy.random.Generator`.

        >>> xi = gen_multipliers(3, 50, seed=1)
        >>> xi.shape, bool((xi == gen_multipliers(3, 50, seed=1)).all())
        ((3, 50), True)
    """
    if n < 1:
        raise ParameterError('need at least one multiplier sequence')
    rng = _generator(seed)
    factor = _multiplier_factor(int(t))
    if factor[0] == 'banded':
        chol = factor[1]
        z = rng.standard_normal((n, t))
        x = np.zeros((n, t))
        for d in range(chol.shape[0]):
            x[:, d:] += chol[d, :t - d] * z[:, :t - d]
        return x
    _, root, size = factor
    z = rng.standard_normal((n, size))
    return np.fft.irfft(root * np.fft.rfft(z, axis=1), n=size, axis=1)[:, :t]


def longrun_cov(f, bandwidth):
    """
    The Bartlett-kernel long-run covariance of the columns of ``f``,
    symmetrized and projected onto the positive semi-definite cone.

        >>> f = np.array([[1.0], [-1.0], [1.0], [-1.0]])
        >>> longrun_cov(f, 0).tolist(), longrun_cov(f, 1).tolist()
        ([[1.0]], [[0.25]])
    """
    f = np.asarray(f, dtype=float)
    if f.ndim == 1:
        f = f[:, None]
    t, p = f.shape
    if bandwidth < 0 or bandwidth >= t:
        raise ParameterError('bandwidth must lie in 0..%d, got %r' % (t - 1, bandwidth))
    if p == 0:
        return np.zeros((0, 0))
    z = f - f.mean(axis=0)
    cov = z.T @ z
    for j in range(1, int(bandwidth) + 1):
        weight = 1 - j / (bandwidth + 1.0)
        gamma = z[j:].T @ z[:-j]
        cov += weight * (gamma + gamma.T)
    cov = cov / t
    cov = (cov + cov.T) / 2
    vals, vecs = np.linalg.eigh(cov)
    if vals.min() >= 0:
        return cov
    return (vecs * np.clip(vals, 0.0, None)) @ vecs.T


def _covariance_root(cov):
    vals, vecs = np.linalg.eigh(cov)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


@dataclass(frozen=True, eq=False)
class BootstrapResult:
    """
    Observed and replicate normalized statistics for one or more tests, all
    computed on the same bootstrap draws.
    """
    specs: tuple
    observed: np.ndarray
    replicates: np.ndarray
    fit: FactorFit
    bandwidth: int
    seed: object

    @property
    def b_reps(self):
        return self.replicates.shape[0]

    @property
    def p_values(self):
        exceed = np.sum(self.replicates >= self.observed, axis=0)
        return (1.0 + exceed) / (self.b_reps + 1.0)

    @property
    def p_value(self):
        return float(self.p_values[0])

    def diagnostics(self):
        return {'p_hat': self.fit.p_hat,
                'lambda_bar': self.fit.draw.lambda_bar,
                'b_reps': self.b_reps,
                'hac_bandwidth': self.bandwidth,
                'ic': self.fit.ic.tolist()}


def bootstrap_distribution(panel, specs, b_reps=500, seed=None, p_max=P_MAX,
                           bandwidth=None, observed=None, schemes=None):
    """
    Run the bootstrap for several tests at once.

    INPUT:

    - ``specs`` -- test specifications or strings such as ``'check:ols'``.

    - ``seed`` -- the base seed; replicate ``b`` uses the ``b``-th child of
      its :class:`~numpy.random.SeedSequence`.

    - ``observed`` -- the normalized statistics of ``panel``, if already
      computed.

    OUTPUT: a :class:`BootstrapResult`.
    """
    if b_reps < 1:
        raise ParameterError('the bootstrap needs B >= 1, got %r' % b_reps)
    specs = tuple(parse_test(s) for s in specs)
    n, t = panel.shape
    if bandwidth is None:
        bandwidth = hac_bandwidth(t)
    schemes = {} if schemes is None else dict(schemes)
    for spec in specs:
        if spec.scheme not in schemes:
            schemes[spec.scheme] = spec.weights(t)
    if observed is None:
        observed = [r.normalized for r in compute_statistics(panel, specs, schemes)]
    observed = np.asarray(observed, dtype=float)
    fit = estimate_factors(panel, p_max)
    root = _covariance_root(longrun_cov(fit.factors, bandwidth))
    replicates = np.empty((b_reps, len(specs)))
    children = as_seed_sequence(seed).spawn(b_reps)
    for b, child in enumerate(children):
        rng = np.random.Generator(np.random.PCG64(child))
        xi = gen_multipliers(n, t, rng)
        fstar = rng.standard_normal((t, fit.p_hat)) @ root.T
        ystar = PanelMatrix(fit.loadings @ fstar.T + xi * fit.residuals)
        replicates[b] = [r.normalized
                         for r in compute_statistics(ystar, specs, schemes)]
    logger.info('bootstrap: B = %d, p_hat = %d, tests %s', b_reps, fit.p_hat,
                ', '.join(s.label for s in specs))
    return BootstrapResult(specs, observed, replicates, fit, bandwidth, seed)


def bootstrap_pvalue(panel, scheme='ols', functional='sup', estimator='hat',
                     b_reps=500, seed=None, p_max=P_MAX, bandwidth=None,
                     observed=None):
    """
    The bootstrap p-value ``(1 + #{V*_b >= V}) / (B + 1)`` of one test.

    ``observed`` may be a precomputed
    :class:`~panelbreak.teststat.StatResult`.
    """
    schemes = {}
    if not isinstance(scheme, str):
        schemes[scheme.name] = scheme
        scheme = scheme.name
    spec = TestSpec(scheme, estimator, functional)
    if observed is not None:
        observed = [observed.normalized]
    return bootstrap_distribution(panel, [spec], b_reps=b_reps, seed=seed,
                                  p_max=p_max, bandwidth=bandwidth,
                                  observed=observed, schemes=schemes)
