"""
The limit null distribution of the centred test process.

Under no change, ``V(s; sigma_hat(w)) / kappa`` converges to a zero-mean
Gaussian process ``G`` with covariance

    gamma(s, t | D, h) = 2 {g(s,t)**2 - h(s) m(t) - h(t) m(s) + D m(s) m(t)},

where the constant ``D`` and function ``h`` depend on the weights only:

    D_T = (m'Wm)**-2 m'W C W m,     h_T(s) = (m'Wm)**-1 sum_k g(s, k/T)**2 m_k w_k,

with ``C[k, l] = g(k/T, l/T)**2``.  Critical values are quantiles of
``sup |G|`` (or ``int G**2``) over sample paths drawn through a Cholesky
factor of the kernel on a grid of ``G`` points ``j / (G + 1)``.

The change-adjusted process has its own kernel, see :func:`check_covariance`.
"""

from __future__ import annotations

import json
import logging
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
from scipy.special import xlogy

from .config import ALPHA_LEVELS, CRIT_SEED, GRID, N_PATHS, Settings
from .cusum import g, g_matrix, m, m_grid
from .errors import (KernelNotPSDError, MissingTableError, ParameterError)
from .estimators import CUSTOM, OLS, TAU, WLS
from .rng import as_seed_sequence

logger = logging.getLogger(__name__)

ORACLE = 'oracle'
CHECK = 'check'
SUP = 'sup'
INTEGRAL = 'integral'
FUNCTIONALS = (SUP, INTEGRAL)
CACHE_SCHEMA = 2

_PATH_CHUNK = 1000
_ROW_BLOCK = 512


def dh_closed(kind, tau=None):
    """
    The limits ``D`` and ``h`` for the standard weight schemes.

    ``'oracle'`` (``D = 0``, ``h = 0``) is the kernel of ``V(.; sigma2)``
    with the true ``sigma2`` plugged in.

    EXAMPLES::

        >>> D, h = dh_closed('ols')
        >>> D == 13 / 28, float(h(0.5))
        (True, 0.140625)
        >>> D, h = dh_closed('wls')
        >>> round(D, 6), round(float(h(0.5)), 7)
        (0.289868, 0.0965736)
        >>> D, h = dh_closed('tau', 0.3)
        >>> D, bool(abs(h(0.3) - 0.21) < 1e-15)
        (1.0, True)
    """
    if kind == OLS:
        return 13.0 / 28.0, lambda s: 1.5 * m(s) ** 2 * (1 + 2 * m(s))
    if kind == WLS:
        def h_wls(s):
            s = np.asarray(s, dtype=float)
            return -(xlogy(s ** 2, s) + xlogy((1 - s) ** 2, 1 - s) + m(s))
        return math.pi ** 2 / 3 - 3, h_wls
    if kind == TAU:
        if tau is None or not 0 < tau < 1:
            raise ParameterError('a tau kernel needs tau in (0, 1)')
        return 1.0, lambda s: g(s, tau) ** 2 / m(tau)
    if kind == ORACLE:
        return 0.0, lambda s: np.zeros_like(np.asarray(s, dtype=float))
    raise ParameterError('no closed form for %r weights; use dh_finite' % kind)


def dh_finite(scheme):
    """
    ``D_T`` and ``h_T(k/T)``, ``k = 1..T-1``, for any weight scheme.

    The matrix ``C_T`` is never stored: a point mass needs one row of it,
    other schemes are accumulated in row blocks.

    EXAMPLES::

        >>> from panelbreak.estimators import make_weights
        >>> D, h = dh_finite(make_weights('tau', 10, tau=0.5))
        >>> D, bool(h[4] == m_grid(10)[4])
        (1.0, True)
    """
    t = scheme.t
    mv = m_grid(t)
    v = scheme.w * mv
    beta2 = scheme.beta2
    if scheme.kind == TAU:
        k = scheme.point_index
        cv = g_matrix(t, [k])[0] ** 2 * v[k - 1]
    else:
        cv = np.empty(t - 1)
        for start in range(0, t - 1, _ROW_BLOCK):
            rows = np.arange(start + 1, min(start + _ROW_BLOCK, t - 1) + 1)
            cv[rows - 1] = (g_matrix(t, rows) ** 2) @ v
    return float(np.dot(v, cv)) / beta2 ** 2, cv / beta2


def covariance_kernel(s, t, D, h):
    """
    ``gamma(s, t | D, h)`` on the grid ``s x t``; ``h`` is a callable.
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    hs, ht = h(s), h(t)
    ms, mt = m(s), m(t)
    return 2 * (g(s[:, None], t[None, :]) ** 2
                - np.outer(hs, mt) - np.outer(ms, ht) + D * np.outer(ms, mt))


def _projection_h(scheme):
    """
    ``h_T`` at arbitrary ``s``:  ``(m'Wm)**-1 sum_k g(s, k/T)**2 m_k w_k``.

    Using the same finite sum at every point keeps ``gamma`` the covariance
    of ``X(s) - m(s) L(X)`` for a fixed linear functional ``L``.
    """
    u = np.arange(1, scheme.t) / float(scheme.t)
    v = scheme.w * m_grid(scheme.t)
    beta2 = scheme.beta2

    def h(s):
        s = np.asarray(s, dtype=float)
        flat = s.reshape(-1, 1)
        return ((g(flat, u[None, :]) ** 2) @ v / beta2).reshape(s.shape)
    return h


def check_covariance(points, nodes, weights):
    """
    Covariance of the change-adjusted process at ``points``.

    At ``u`` the process is ``X(u) - m(u) L_u(X_u)``, where ``X_u`` is the
    square process of the paths with the shift at ``u`` removed and ``L_u``
    is the weighted regression on the ``nodes``.  Both parts are quadratic
    in the same Gaussian paths, so with ``A_u`` the matrix of that form

        gamma(u, v) = 2 tr(A_u C A_v C),

    which is expanded below into products of ``G x J`` matrices.  Rows of
    ``points`` whose regressor vanishes on the nodes must be removed first
    (see :func:`check_points`).

    EXAMPLES::

        >>> u = np.array([0.25, 0.5, 0.75])
        >>> gamma = check_covariance(u, u, np.ones(3))
        >>> bool(np.all(np.diag(gamma) > 2 * m(u) ** 2))
        True
    """
    points = np.asarray(points, dtype=float)
    nodes = np.asarray(nodes, dtype=float)
    weights = np.asarray(weights, dtype=float)
    mu = m(points)
    gp = g(points[:, None], nodes[None, :])
    x = m(nodes)[None, :] - gp ** 2 / mu[:, None]
    wx = weights * x
    a = wx / np.sum(wx * x, axis=1, keepdims=True)
    guv = g(points[:, None], points[None, :])
    ag = a * gp
    gp2 = gp ** 2
    # a_u . g(v, .)**2, a_u . g(u, .) g(v, .) and a_u . g(u, .)**2
    ax2 = a @ gp2.T
    axy = ag @ gp.T
    d = np.diag(ax2).copy()
    cn_ag = _node_gram(nodes, ag.T, 1).T                  # rows C_n (a_v g(v, .))
    t1 = a @ _node_gram(nodes, a.T, 2)
    t5 = a @ (gp * cn_ag).T
    t7 = cn_ag @ ag.T
    alpha = 1.0 / mu[None, :]
    beta = 1.0 / mu[:, None]
    c = guv * beta * alpha
    e2 = (t1 + alpha ** 2 * ax2 * d[None, :] + beta ** 2 * d[:, None] * ax2.T
          + c ** 2 * np.outer(d, d) - 2 * alpha * t5 - 2 * beta * t5.T
          + 2 * c * t7 + 2 * alpha * beta * axy * axy.T
          - 2 * alpha * c * axy * d[None, :] - 2 * beta * c * d[:, None] * axy.T)
    cross_v = ax2.T - 2 * guv * alpha * axy.T + (guv * alpha) ** 2 * d[None, :]
    cross_u = ax2 - 2 * guv * beta * axy + (guv * beta) ** 2 * d[:, None]
    gamma = 2 * (guv ** 2 - mu[None, :] * cross_v - mu[:, None] * cross_u
                 + np.outer(mu, mu) * e2)
    return (gamma + gamma.T) / 2


def _node_gram(nodes, right, power):
    """
    ``(g(nodes, nodes) ** power) @ right`` in row blocks.
    """
    out = np.empty((nodes.size, right.shape[1]))
    for start in range(0, nodes.size, _ROW_BLOCK):
        rows = slice(start, min(start + _ROW_BLOCK, nodes.size))
        out[rows] = (g(nodes[rows, None], nodes[None, :]) ** power) @ right
    return out


def check_nodes(kind, tau=None, points=None, scheme=None):
    """
    Regression nodes and weights of the change-adjusted estimator in the
    limit: the kernel grid itself for OLS (flat) and WLS (``m**-2``), the
    single point ``tau`` for a point mass, ``k/T`` with the scheme's own
    weights for custom schemes.
    """
    if kind == OLS:
        return points, np.ones(points.size)
    if kind == WLS:
        return points, m(points) ** -2
    if kind == TAU:
        if tau is None or not 0 < tau < 1:
            raise ParameterError('a tau kernel needs tau in (0, 1)')
        return np.array([float(tau)]), np.ones(1)
    if kind == CUSTOM and scheme is not None:
        return np.arange(1, scheme.t) / float(scheme.t), scheme.w
    raise ParameterError('no change-adjusted kernel for %r weights' % kind)


def check_points(points, nodes, weights):
    """
    The kernel points at which the change-adjusted regressor does not
    vanish on the nodes (for a point mass, every point but ``tau``).
    """
    x = m(nodes)[None, :] - g(points[:, None], nodes[None, :]) ** 2 / m(points)[:, None]
    denom = np.sum(weights * x * x, axis=1)
    return points[denom > 1e-12 * denom.max()]


def check_kind(kind):
    """
    The table kind of the change-adjusted test with ``kind`` weights.

        >>> check_kind('wls'), base_kind('check-wls'), base_kind('wls')
        ('check-wls', 'wls', None)
    """
    return '%s-%s' % (CHECK, kind)


def base_kind(kind):
    prefix = CHECK + '-'
    return kind[len(prefix):] if kind.startswith(prefix) else None


@dataclass(frozen=True, eq=False)
class LimitKernel:
    """
    The covariance kernel on the grid ``points`` with its lower Cholesky
    factor (of ``gamma + jitter I``).
    """
    kind: str
    tau: float
    D: float
    points: np.ndarray
    h: np.ndarray
    gamma: np.ndarray
    chol: np.ndarray
    jitter: float

    @property
    def grid(self):
        return self.points.size


def factor_kernel(gamma, retries=3):
    """
    Lower Cholesky factor of ``gamma`` with escalating diagonal jitter.

    Jitter starts at ``1e-13`` times the largest variance and grows tenfold
    per retry.  Returns ``(chol, jitter)``.
    """
    scale = float(np.max(np.diag(gamma)))
    if not scale > 0:
        raise KernelNotPSDError(float(np.min(np.linalg.eigvalsh(gamma))), 0.0)
    jitter = 1e-13 * scale
    eye = np.eye(gamma.shape[0])
    for attempt in range(retries + 1):
        try:
            chol = scipy.linalg.cholesky(gamma + jitter * eye, lower=True,
                                         check_finite=False)
            return chol, jitter
        except scipy.linalg.LinAlgError:
            logger.debug('Cholesky failed with jitter %.2e', jitter)
            if attempt < retries:
                jitter *= 10
    min_eig = float(scipy.linalg.eigvalsh(gamma)[0])
    raise KernelNotPSDError(min_eig, jitter)


def build_kernel(kind=OLS, tau=None, grid=GRID, scheme=None):
    """
    The kernel for a standard scheme (closed-form ``D``, ``h``), or for an
    arbitrary :class:`~panelbreak.estimators.WeightScheme` (finite-``T``
    ``D_T``, ``h_T``) when ``scheme`` is given.

    Kinds ``'check-<weights>'`` give the kernel of the change-adjusted
    process (:func:`check_covariance`); these have no ``D`` or ``h`` and
    leave out grid points at which the statistic is undefined.

    EXAMPLES::

        >>> k = build_kernel('oracle', grid=3)
        >>> k.points.tolist(), float(k.gamma[1, 1])
        ([0.25, 0.5, 0.75], 0.125)
        >>> build_kernel('check-tau', 0.5, grid=3).points.tolist()
        [0.25, 0.75]
    """
    points = np.arange(1, grid + 1) / float(grid + 1)
    base = base_kind(kind)
    if base is not None:
        if scheme is not None:
            base, tau = scheme.kind, scheme.tau
            kind = check_kind(base)
        nodes, weights = check_nodes(base, tau, points, scheme)
        points = check_points(points, nodes, weights)
        gamma = check_covariance(points, nodes, weights)
        D, hvals = float('nan'), np.full(points.size, np.nan)
    else:
        if scheme is not None and (scheme.kind == CUSTOM or kind == CUSTOM):
            D, _ = dh_finite(scheme)
            h = _projection_h(scheme)
            kind, tau = CUSTOM, None
        else:
            if scheme is not None:
                kind, tau = scheme.kind, scheme.tau
            D, h = dh_closed(kind, tau)
        gamma = covariance_kernel(points, points, D, h)
        gamma = (gamma + gamma.T) / 2
        hvals = h(points)
    chol, jitter = factor_kernel(gamma)
    logger.info('built %s kernel on %d points (jitter %.1e)', kind, points.size,
                jitter)
    return LimitKernel(kind, tau, D, points, hvals, gamma, chol, jitter)


def functional_values(paths, functional):
    """
    ``sup |path|`` or the quadrature ``sum path**2 / (G + 1)``, row-wise.
    """
    if functional == SUP:
        return np.max(np.abs(paths), axis=1)
    if functional == INTEGRAL:
        return np.sum(paths ** 2, axis=1) / (paths.shape[1] + 1)
    raise ParameterError('unknown functional %r' % functional)


def _functional_chunk(args):
    chol, functional, size, seed = args
    rng = np.random.Generator(np.random.PCG64(seed))
    z = rng.standard_normal((size, chol.shape[0]))
    return functional_values(z @ chol.T, functional)


def simulate_sup_distribution(kernel, functional=SUP, n_paths=N_PATHS, seed=None,
                              workers=1):
    """
    ``n_paths`` independent draws of the functional of ``G``.

    Chunk ``c`` of the paths is drawn from the ``c``-th child of ``seed``,
    so the sample depends on the seed only and not on ``workers``, and a
    sample of ``2 n`` paths starts with the sample of ``n`` paths (for
    ``n`` a multiple of the chunk size).  ``workers`` above one spreads
    the chunks over a process pool.
    """
    if functional not in FUNCTIONALS:
        raise ParameterError('unknown functional %r' % functional)
    if n_paths < 1:
        raise ParameterError('need at least one path, got %r' % n_paths)
    sizes = [min(_PATH_CHUNK, n_paths - start)
             for start in range(0, n_paths, _PATH_CHUNK)]
    children = as_seed_sequence(seed).spawn(len(sizes))
    tasks = [(kernel.chol, functional, size, child)
             for size, child in zip(sizes, children)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(min(workers, len(tasks))) as pool:
            parts = list(pool.map(_functional_chunk, tasks))
    else:
        parts = [_functional_chunk(task) for task in tasks]
    return np.concatenate(parts)


@dataclass(frozen=True, eq=False)
class CritTable:
    """
    Simulated quantiles of a limit functional.

    ``quantiles`` maps ``alpha`` to the ``1 - alpha`` quantile; ``sample`` is
    the sorted simulated sample, used for levels not tabulated.
    """
    kind: str
    tau: float
    functional: str
    grid: int
    n_paths: int
    seed: int
    quantiles: dict
    sample: np.ndarray = field(default=None, repr=False)

    @property
    def key(self):
        return table_key(self.kind, self.tau, self.functional, self.grid,
                         self.n_paths, self.seed)

    def to_dict(self):
        out = dict(self.key)
        out['schema'] = CACHE_SCHEMA
        out['quantiles'] = {repr(a): q for a, q in sorted(self.quantiles.items())}
        if self.sample is not None:
            out['sample'] = self.sample.tolist()
        return out

    @classmethod
    def from_dict(cls, data):
        sample = data.get('sample')
        return cls(data['kind'], data['tau'], data['functional'], data['grid'],
                   data['n_paths'], data['seed'],
                   {float(a): float(q) for a, q in data['quantiles'].items()},
                   None if sample is None else np.asarray(sample, dtype=float))


def table_key(kind, tau, functional, grid, n_paths, seed):
    return {'kind': kind, 'tau': None if tau is None else float(tau),
            'functional': functional, 'grid': int(grid),
            'n_paths': int(n_paths), 'seed': int(seed)}


def make_table(kind=OLS, tau=None, functional=SUP, grid=GRID, n_paths=N_PATHS,
               seed=CRIT_SEED, scheme=None, levels=ALPHA_LEVELS, workers=1):
    """
    Simulate a critical-value table.
    """
    kernel = build_kernel(kind, tau, grid, scheme=scheme)
    sample = np.sort(simulate_sup_distribution(kernel, functional, n_paths, seed,
                                               workers=workers))
    quantiles = {float(a): float(np.quantile(sample, 1 - a)) for a in levels}
    return CritTable(kernel.kind, kernel.tau, functional, grid, n_paths, seed,
                     quantiles, sample)


def critical_value(table, alpha):
    """
    The ``1 - alpha`` quantile of the simulated functional.

    EXAMPLES::

        >>> table = CritTable('ols', None, 'sup', 10, 5, 0, {0.05: 2.0},
        ...                   np.array([0.0, 1.0, 2.0, 3.0, 4.0]))
        >>> critical_value(table, 0.05), critical_value(table, 0.5)
        (2.0, 2.0)
        >>> critical_value(table, 1.5)
        Traceback (most recent call last):
        ...
        panelbreak.errors.ParameterError: alpha must lie in (0, 1), got 1.5
    """
    if not 0 < alpha < 1:
        raise ParameterError('alpha must lie in (0, 1), got %r' % alpha)
    for level, value in table.quantiles.items():
        if abs(level - alpha) < 1e-12:
            return value
    if table.sample is None:
        raise ParameterError('alpha = %g is not tabulated' % alpha)
    return float(np.quantile(table.sample, 1 - alpha))


class CritTableCache:
    """
    Critical-value tables stored as versioned JSON files, one per key.

    A file written by an older schema is treated as missing and rebuilt.
    Writes go to a temporary file that is renamed into place.
    """

    def __init__(self, directory=None):
        if directory is None:
            directory = Settings.from_env().cache_dir
        self.directory = Path(directory)

    def path(self, key):
        tau = '' if key['tau'] is None else '-%r' % key['tau']
        name = '%s%s-%s-G%d-n%d-s%d.json' % (
            key['kind'], tau, key['functional'], key['grid'], key['n_paths'],
            key['seed'])
        return self.directory / name

    def load(self, key):
        path = self.path(key)
        if not path.exists():
            return None
        with path.open('r', encoding='utf-8') as f:
            data = json.load(f)
        if data.get('schema') != CACHE_SCHEMA:
            logger.info('ignoring stale table %s', path)
            return None
        return CritTable.from_dict(data)

    def store(self, table):
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.path(table.key)
        handle, tmp = tempfile.mkstemp(dir=str(self.directory), suffix='.tmp')
        try:
            with os.fdopen(handle, 'w', encoding='utf-8') as f:
                json.dump(table.to_dict(), f)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return path

    def get(self, kind=OLS, tau=None, functional=SUP, grid=GRID,
            n_paths=N_PATHS, seed=CRIT_SEED, build=True, workers=1):
        key = table_key(kind, tau, functional, grid, n_paths, seed)
        table = self.load(key)
        if table is not None:
            logger.debug('cache hit %s', self.path(key))
            return table
        if not build:
            raise MissingTableError(key)
        logger.info('building critical values for %s', key)
        table = make_table(kind, tau, functional, grid, n_paths, seed,
                           workers=workers)
        self.store(table)
        return table


def table_for(scheme, estimator='hat', functional=SUP, grid=GRID,
              n_paths=N_PATHS, seed=CRIT_SEED, cache=None, build=True,
              workers=1):
    """
    The critical-value table matching a test.

    The change-adjusted statistic uses the kernel of its own process
    (kind ``'check-<weights>'``).  Custom weights use their finite-``T``
    kernel and are not cached.
    """
    kind, tau = scheme.kind, scheme.tau
    if estimator == CHECK:
        kind = check_kind(kind)
    if scheme.kind == CUSTOM:
        return make_table(kind, None, functional, grid, n_paths, seed,
                          scheme=scheme, workers=workers)
    if cache is None:
        cache = CritTableCache()
    return cache.get(kind, tau, functional, grid, n_paths, seed, build=build,
                     workers=workers)
