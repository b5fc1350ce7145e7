"""
Regression estimators of the nuisance parameters.

Under no change the cross-sectional mean of the squared CUSUM paths is close
to ``sigma2 * m_T(s)``, and the mean of the fourth powers to
``3 * kappa2 * m_T(s)**2``.  Both parameters are therefore slopes of a
one-regressor weighted least squares fit over the grid ``k/T``:

    sigma_hat(w) = (m' W m)**-1 m' W zbar,
    kappa_hat(w) = (1/3) (mm' W mm)**-1 mm' W zz,

with ``W = diag(w)``, ``mm = m**2`` and ``zz`` the mean fourth powers.  The
fits are closed-form dot products; no linear system is ever solved.

The change-adjusted estimator ``check_sigma(u)`` first removes an estimated
shift at ``floor(T u)`` from every panel and regresses on the matching
regressor ``m_T(k/T) - g_T(k/T, u)**2 / m_T(u)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .cusum import cusum_paths, g_matrix, m_grid
from .errors import DegenerateDataError, DimensionError, ParameterError
from .panel import PanelMatrix, grid_index

logger = logging.getLogger(__name__)

OLS = 'ols'
WLS = 'wls'
TAU = 'tau'
CUSTOM = 'custom'

_BLOCK_ENTRIES = 1 << 22


@dataclass(frozen=True, eq=False)
class WeightScheme:
    """
    Diagonal regression weights ``w_k``, ``k = 1..T-1``, and the quantities
    derived from them.

    EXAMPLES::

        >>> ws = make_weights('tau', 10, tau=0.5)
        >>> ws.w.tolist()
        [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]
        >>> ws.label, ws.name
        ('0.5', 'tau:0.5')
        >>> make_weights('ols', 4).beta2 == (9 + 16 + 9) / 256
        True
    """
    kind: str
    t: int
    w: np.ndarray
    tau: float = None

    def __post_init__(self):
        w = np.array(self.w, dtype=float)
        if w.shape != (self.t - 1,):
            raise DimensionError('weights have length %d, expected T - 1 = %d'
                                 % (w.size, self.t - 1))
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ParameterError('weights must be finite and nonnegative')
        w.setflags(write=False)
        object.__setattr__(self, 'w', w)
        if not self.beta2 > 0:
            raise ParameterError('weights give m\'Wm = 0')

    @property
    def m(self):
        return m_grid(self.t)

    @property
    def beta2(self):
        m = self.m
        return float(np.dot(self.w * m, m))

    @property
    def eta(self):
        """
        ``eta_T = m'w / m'Wm``; it must be ``o(T / sqrt(N))``.
        """
        return float(np.dot(self.m, self.w)) / self.beta2

    @property
    def eta_ddot(self):
        mm = self.m ** 2
        return float(np.dot(mm, self.w) / np.dot(self.w * mm, mm))

    @property
    def point_index(self):
        """
        The grid index ``floor(tau T)`` of a point-mass scheme.
        """
        if self.kind != TAU:
            return None
        return grid_index(self.tau, self.t)

    @property
    def label(self):
        if self.kind == TAU:
            return '%g' % self.tau
        return self.kind

    @property
    def name(self):
        if self.kind == TAU:
            return 'tau:%g' % self.tau
        return self.kind

    def admissibility(self, n):
        """
        ``(eta_T, eta_ddot_T)`` times ``sqrt(N)/T``; both should be small.
        """
        scale = math.sqrt(n) / self.t
        return self.eta * scale, self.eta_ddot * scale

    def __repr__(self):
        return 'WeightScheme(%s, T=%d)' % (self.name, self.t)


def make_weights(kind, t, tau=None, w=None):
    """
    Build one of the standard weight schemes.

    INPUT:

    - ``kind`` -- ``'ols'`` (all ones), ``'wls'`` (``m_T(k/T)**-2``),
      ``'tau'`` (a single one at ``k = floor(tau T)``) or ``'custom'``.

    - ``t`` -- the number of time points ``T``.

    - ``tau`` -- the anchor of a ``'tau'`` scheme.

    - ``w`` -- the weight vector of a ``'custom'`` scheme.

    EXAMPLES::

        >>> make_weights('ols', 5).w.tolist()
        [1.0, 1.0, 1.0, 1.0]
        >>> make_weights('tau', 10, tau=0.05)
        Traceback (most recent call last):
        ...
        panelbreak.errors.ParameterError: tau = 0.05 puts floor(tau T) = 0 outside 1..9
    """
    kind = str(kind).lower()
    if kind == OLS:
        return WeightScheme(OLS, t, np.ones(t - 1))
    if kind == WLS:
        return WeightScheme(WLS, t, m_grid(t) ** -2)
    if kind == TAU:
        if tau is None:
            raise ParameterError('a tau scheme needs tau')
        tau = float(tau)
        k = grid_index(tau, t)
        if not 1 <= k <= t - 1:
            raise ParameterError('tau = %g puts floor(tau T) = %d outside 1..%d'
                                 % (tau, k, t - 1))
        w = np.zeros(t - 1)
        w[k - 1] = 1.0
        return WeightScheme(TAU, t, w, tau)
    if kind == CUSTOM:
        if w is None:
            raise ParameterError('a custom scheme needs a weight vector')
        return WeightScheme(CUSTOM, t, w)
    raise ParameterError('unknown weight scheme %r' % kind)


def parse_scheme(text, t):
    """
    ``'ols'``, ``'wls'``, ``'tau:0.1'`` or just ``'0.1'``.

        >>> parse_scheme('tau:0.1', 200).point_index, parse_scheme('0.5', 200).point_index
        (20, 100)
    """
    text = str(text).strip().lower()
    if text in (OLS, WLS):
        return make_weights(text, t)
    if text.startswith(TAU + ':'):
        text = text[len(TAU) + 1:]
    try:
        tau = float(text)
    except ValueError:
        raise ParameterError('unknown weight scheme %r' % text)
    return make_weights(TAU, t, tau=tau)


def _check_scheme(panel, scheme):
    if scheme.t != panel.n_time:
        raise DimensionError('weights are for T = %d, panel has T = %d'
                             % (scheme.t, panel.n_time))


def _slope(x, y, w):
    return float(np.dot(w * x, y) / np.dot(w * x, x))


def sigma_from_squares(zbar, scheme):
    return _slope(scheme.m, zbar, scheme.w)


def kappa_from_fourths(zz, scheme):
    return _slope(scheme.m ** 2, zz, scheme.w) / 3.0


def sigma_hat(panel, scheme):
    """
    The weighted least squares estimate of the mean long-run variance.

    With a point-mass scheme it is ``zbar(tau) / m_T(tau)``.

    EXAMPLES::

        >>> p = PanelMatrix([[1, 2, 3, 4]])
        >>> sigma_hat(p, make_weights('tau', 4, tau=0.5))
        4.0
        >>> sigma_hat(PanelMatrix(np.ones((3, 6))), make_weights('wls', 6))
        0.0
    """
    _check_scheme(panel, scheme)
    z = cusum_paths(panel)
    return sigma_from_squares(np.mean(z ** 2, axis=0), scheme)


def kappa_hat(panel, scheme):
    """
    The weighted least squares estimate of ``kappa2 = N**-1 sum sigma_i**4``.
    """
    _check_scheme(panel, scheme)
    z = cusum_paths(panel)
    return kappa_from_fourths(np.mean(z ** 4, axis=0), scheme)


@dataclass(frozen=True)
class VarianceEstimate:
    sigma2: float
    kappa2: float
    scheme: WeightScheme


def estimate_variance(panel, scheme):
    """
    ``sigma_hat`` and ``kappa_hat`` from one pass over the CUSUM paths.
    """
    _check_scheme(panel, scheme)
    z2 = cusum_paths(panel) ** 2
    return VarianceEstimate(sigma_from_squares(z2.mean(axis=0), scheme),
                            kappa_from_fourths((z2 ** 2).mean(axis=0), scheme),
                            scheme)


def _split_index(panel, u):
    k = grid_index(u, panel.n_time)
    if not 0 < u < 1 or not 1 <= k <= panel.n_time - 1:
        raise ParameterError('u = %r gives floor(T u) = %d outside 1..%d'
                             % (u, k, panel.n_time - 1))
    return k


def delta_hats(panel, u):
    """
    For every panel, the mean after ``floor(T u)`` minus the mean up to it.
    """
    k = _split_index(panel, u)
    y = panel.values
    return y[:, k:].mean(axis=1) - y[:, :k].mean(axis=1)


def delta_hat(panel, i, u):
    """
    Estimated size of a shift in panel ``i`` at ``floor(T u)``.

        >>> delta_hat(PanelMatrix([[0, 0, 1, 1]]), 0, 0.5)
        1.0
    """
    if not 0 <= i < panel.n_panels:
        raise ParameterError('panel index %d out of range' % i)
    return float(delta_hats(panel, u)[i])


def check_regressor(t, k):
    """
    ``m_T(j/T) - g_T(j/T, k/T)**2 / m_T(k/T)`` for ``j = 1..T-1``; exactly
    zero at ``j = k``.
    """
    m = m_grid(t)
    col = g_matrix(t, [k])[0]
    out = m - col ** 2 / m[k - 1]
    out[k - 1] = 0.0
    return out


def check_sigma(panel, u, scheme=None):
    """
    The change-adjusted estimate of the mean long-run variance at ``u``.

    Each panel is centred by its estimated shift at ``floor(T u)`` before the
    CUSUM paths are formed.  ``scheme`` defaults to OLS; other schemes weight
    both quadratic forms of the regression.

    EXAMPLES::

        >>> check_sigma(PanelMatrix([[2, 2, 5, 5], [0, 0, 0, 0]]), 0.5)
        0.0
    """
    k = _split_index(panel, u)
    t = panel.n_time
    if scheme is None:
        scheme = make_weights(OLS, t)
    _check_scheme(panel, scheme)
    step = (np.arange(1, t + 1) > k).astype(float)
    centred = PanelMatrix(panel.values - np.outer(delta_hats(panel, u), step))
    zc = np.mean(cusum_paths(centred) ** 2, axis=0)
    x = check_regressor(t, k)
    denom = float(np.dot(scheme.w * x, x))
    if denom == 0.0:
        raise DegenerateDataError('the %s regressor vanishes at u = %g'
                                  % (scheme.name, u))
    return float(np.dot(scheme.w * x, zc)) / denom


def check_sigma_grid(panel, scheme=None, paths=None):
    """
    ``check_sigma(k/T)`` for every ``k = 1..T-1``.

    Removing the estimated shift at ``k`` changes the CUSUM paths to

        Z(j/T) - Z(k/T) g(j/T, k/T) / m(k/T),

    so the whole sweep needs only the cross moments ``Z'Z / N``.  Grid points
    at which the weighted regressor vanishes are NaN.

    EXAMPLES::

        >>> p = PanelMatrix([[0.3, -1.2, 0.8, 2.0, -0.4]])
        >>> grid = check_sigma_grid(p)
        >>> bool(abs(grid[1] - check_sigma(p, 0.4)) < 1e-12)
        True
    """
    t = panel.n_time
    if scheme is None:
        scheme = make_weights(OLS, t)
    _check_scheme(panel, scheme)
    z = cusum_paths(panel) if paths is None else paths
    n = z.shape[0]
    m = m_grid(t)
    w = scheme.w
    zbar = np.mean(z ** 2, axis=0)
    out = np.empty(t - 1)
    block = max(1, _BLOCK_ENTRIES // (t - 1))
    for start in range(0, t - 1, block):
        cols = np.arange(start, min(start + block, t - 1))
        gk = g_matrix(t, cols + 1).T                 # (T-1) x b, column k
        a = gk / m[cols]
        cross = z.T @ z[:, cols] / n
        zc = zbar[:, None] - 2 * a * cross + a ** 2 * zbar[cols]
        x = m[:, None] - a * gk
        x[cols, np.arange(cols.size)] = 0.0
        wx = w[:, None] * x
        denom = np.sum(wx * x, axis=0)
        num = np.sum(wx * zc, axis=0)
        with np.errstate(invalid='ignore', divide='ignore'):
            out[cols] = np.where(denom > 0, num / denom, np.nan)
    return out
