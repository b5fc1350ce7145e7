"""
Grid functions and CUSUM processes.

Every process lives on the grid ``s = k/T``, ``k = 1, ..., T-1``; vectors
indexed by the grid have length ``T - 1`` and entry ``k - 1`` belongs to
``k/T``.  The basic functions are

- ``m(s) = s (1 - s)`` and ``m_T(s) = m(floor(T s)/T)``,
- ``g(s, t) = min(s, t) (1 - max(s, t))``, so ``g(s, s) = m(s)``,
- ``Z_i(s) = T**-0.5 * sum_{t <= T s} (Y[i, t] - mean_i)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .panel import MIN_T

try:
    from ._kahan import compensated_cumsum
except ImportError:
    compensated_cumsum = None

EXTENDED_PRECISION_T = 10000


def m_grid(t):
    """
    The vector ``(m_T(k/T))_{k=1..T-1}``.

    Computed as ``k (T - k) / T**2`` so that ``m[k] == m[T - k]`` exactly.

    EXAMPLES::

        >>> m_grid(4).tolist()
        [0.1875, 0.25, 0.1875]
    """
    if t < MIN_T:
        raise ParameterError('the grid needs T >= %d, got %d' % (MIN_T, t))
    k = np.arange(1, t, dtype=float)
    return k * (t - k) / float(t) ** 2


def m(s):
    s = np.asarray(s, dtype=float)
    return s * (1 - s)


def g(s, t):
    """
    ``g(s, t) = (s ^ t)(1 - s v t)``.

        >>> float(g(0.25, 0.5)), float(g(0.5, 0.5))
        (0.125, 0.25)
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    return np.minimum(s, t) * (1 - np.maximum(s, t))


def g_T(s, u, t):
    """
    ``g`` evaluated at the grid points ``floor(T s)/T`` and ``floor(T u)/T``.
    """
    fs = np.floor(np.asarray(s, dtype=float) * t + 1e-9) / t
    fu = np.floor(np.asarray(u, dtype=float) * t + 1e-9) / t
    return g(fs, fu)


def g_matrix(t, rows=None):
    """
    ``g(k/T, l/T)`` for ``k`` in ``rows`` (default ``1..T-1``) and
    ``l = 1..T-1``.  Entry ``(a, b)`` belongs to ``k = rows[a]``,
    ``l = b + 1``.

        >>> (g_matrix(4) * 16).tolist()
        [[3.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 3.0]]
    """
    if rows is None:
        rows = np.arange(1, t)
    k = np.asarray(rows, dtype=float)[:, None]
    l = np.arange(1, t, dtype=float)[None, :]
    return np.minimum(k, l) * (t - np.maximum(k, l)) / float(t) ** 2


@dataclass(frozen=True, eq=False)
class CusumPath:
    """
    ``Z_i(k/T)`` for ``k = 1..T-1``.  The endpoint ``Z_i(1)`` is zero.
    """
    panel: int
    values: np.ndarray

    @property
    def n_time(self):
        return self.values.size + 1

    def __len__(self):
        return self.values.size


def _partial_sums(dev):
    if dev.shape[1] < EXTENDED_PRECISION_T:
        return np.cumsum(dev, axis=1)
    if compensated_cumsum is not None:
        return compensated_cumsum(np.ascontiguousarray(dev, dtype=float))
    return np.cumsum(dev, axis=1, dtype=np.longdouble).astype(float)


def cusum_paths(panel):
    """
    All CUSUM paths as an N x (T-1) matrix.

        >>> from panelbreak.panel import PanelMatrix
        >>> cusum_paths(PanelMatrix([[1, 2, 3, 4], [5, 5, 5, 5]])).tolist()
        [[-0.75, -1.0, -0.75], [0.0, 0.0, 0.0]]
    """
    y = panel.values
    dev = y - y.mean(axis=1, keepdims=True)
    return _partial_sums(dev)[:, :-1] / np.sqrt(y.shape[1])


def cusum(panel, i):
    """
    The CUSUM path of panel ``i`` (0-based row index).

        >>> from panelbreak.panel import PanelMatrix
        >>> cusum(PanelMatrix([[1, 2, 3, 4]]), 0).values.tolist()
        [-0.75, -1.0, -0.75]
    """
    if not 0 <= i < panel.n_panels:
        raise ParameterError('panel index %d out of range 0..%d'
                             % (i, panel.n_panels - 1))
    y = panel.values[i:i + 1]
    dev = y - y.mean(axis=1, keepdims=True)
    return CusumPath(i, _partial_sums(dev)[0, :-1] / np.sqrt(y.shape[1]))


def cusum_squares_mean(panel):
    """
    ``zbar[k] = N**-1 sum_i Z_i(k/T)**2``.

        >>> from panelbreak.panel import PanelMatrix
        >>> cusum_squares_mean(PanelMatrix([[1, 2, 3, 4], [4, 3, 2, 1]])).tolist()
        [0.5625, 1.0, 0.5625]
    """
    return np.mean(cusum_paths(panel) ** 2, axis=0)


def cusum_fourth_mean(panel):
    """
    ``N**-1 sum_i Z_i(k/T)**4``, the response of the kappa regression.
    """
    return np.mean(cusum_paths(panel) ** 4, axis=0)
