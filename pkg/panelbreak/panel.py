"""
Panel observations: the N x T matrix every statistic consumes.

Panel ``i`` is row ``i`` and time ``t`` is column ``t - 1``; every public
contract speaks of times ``t = 1, ..., T`` as in the model

    Y[i, t] = mu[i] + delta[i] * 1(t > t0) + e[i, t].
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, PanelParseError, ParameterError

logger = logging.getLogger(__name__)

MIN_T = 3


def grid_index(u, t):
    """
    The grid point ``floor(T u)`` of a real ``u``.

    A small tolerance absorbs representation error, so that ``0.29`` with
    ``T = 100`` gives 29 rather than 28.

        >>> grid_index(0.29, 100), grid_index(0.5, 5), grid_index(0.1, 200)
        (29, 2, 20)
    """
    return int(math.floor(u * t + 1e-9))


@dataclass(frozen=True, eq=False)
class PanelMatrix:
    """
    An immutable N x T panel.

    EXAMPLES::

        >>> p = PanelMatrix([[1, 2, 3, 4], [5, 6, 7, 8]])
        >>> p.n_panels, p.n_time
        (2, 4)
        >>> p.values[0, 0] = 9
        Traceback (most recent call last):
        ...
        ValueError: assignment destination is read-only
        >>> PanelMatrix([[1, 2]])
        Traceback (most recent call last):
        ...
        panelbreak.errors.DimensionError: a panel needs T >= 3 time points, got T = 2
    """
    values: np.ndarray

    def __init__(self, values):
        array = np.array(values, dtype=float, ndmin=2, copy=True)
        if array.ndim != 2:
            raise DimensionError('panel values must be a matrix, got %d dimensions'
                                 % array.ndim)
        n, t = array.shape
        if n < 1:
            raise DimensionError('a panel needs at least one series')
        if t < MIN_T:
            raise DimensionError('a panel needs T >= %d time points, got T = %d'
                                 % (MIN_T, t))
        if not np.all(np.isfinite(array)):
            raise ParameterError('panel values must be finite')
        array.setflags(write=False)
        object.__setattr__(self, 'values', array)

    @property
    def n_panels(self):
        return self.values.shape[0]

    @property
    def n_time(self):
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    def __repr__(self):
        return 'PanelMatrix(N=%d, T=%d)' % self.shape

    def __add__(self, other):
        if isinstance(other, PanelMatrix):
            other = other.values
        return PanelMatrix(self.values + other)

    def __mul__(self, c):
        return PanelMatrix(self.values * c)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class BreakSpec:
    """
    A mean shift of ``deltas[i]`` in panel ``i`` after time ``change_time``.

        >>> spec = BreakSpec.from_theta(0.5, 4, [1.0])
        >>> spec.change_time, spec.is_null
        (2, False)
    """
    theta: float
    change_time: int
    deltas: np.ndarray

    def __post_init__(self):
        deltas = np.array(self.deltas, dtype=float, ndmin=1)
        deltas.setflags(write=False)
        object.__setattr__(self, 'deltas', deltas)
        if not 0 < self.theta < 1:
            raise ParameterError('theta must lie in (0, 1), got %r' % self.theta)

    @classmethod
    def from_theta(cls, theta, t, deltas):
        if not 0 < theta < 1:
            raise ParameterError('theta must lie in (0, 1), got %r' % theta)
        return cls(theta, grid_index(theta, t), deltas)

    @property
    def is_null(self):
        return float(np.sum(self.deltas ** 2)) == 0.0

    def validate(self, panel):
        if self.deltas.shape != (panel.n_panels,):
            raise DimensionError('break has %d deltas for %d panels'
                                 % (self.deltas.size, panel.n_panels))
        if not 1 <= self.change_time <= panel.n_time - 1:
            raise ParameterError('change time %d outside 1..%d'
                                 % (self.change_time, panel.n_time - 1))


def _is_number(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_panel(path, layout='rows'):
    """
    Read a comma-separated panel file.

    INPUT:

    - ``path`` -- a text file, one record per line, optionally starting with
      a non-numeric header row.

    - ``layout`` -- ``'rows'`` if each record is a panel, ``'columns'`` if
      each record is a time point.

    OUTPUT: a :class:`PanelMatrix`.

    EXAMPLES::

        >>> import os, tempfile
        >>> handle, name = tempfile.mkstemp(suffix='.csv', text=True)
        >>> with os.fdopen(handle, 'w') as f:
        ...     n = f.write('1,2,3,4\\n5,6,7,8\\n')
        >>> load_panel(name)
        PanelMatrix(N=2, T=4)
        >>> load_panel(name, layout='columns')
        Traceback (most recent call last):
        ...
        panelbreak.errors.DimensionError: a panel needs T >= 3 time points, got T = 2
        >>> os.unlink(name)
    """
    if layout not in ('rows', 'columns'):
        raise ParameterError("layout must be 'rows' or 'columns', got %r" % layout)
    path = Path(path)
    rows = []
    width = None
    with path.open('r', newline='', encoding='utf-8') as f:
        for lineno, record in enumerate(csv.reader(f), start=1):
            cells = [c.strip() for c in record]
            if not cells or all(c == '' for c in cells):
                continue
            if (not rows and width is None
                    and not any(c == '' or _is_number(c) for c in cells)):
                # header row
                width = len(cells)
                logger.debug('%s: skipping header %r', path, cells)
                continue
            if width is None:
                width = len(cells)
            if len(cells) != width:
                raise PanelParseError(path, lineno, 'expected %d fields, found %d'
                                      % (width, len(cells)))
            for column, c in enumerate(cells, start=1):
                if not _is_number(c):
                    raise PanelParseError(path, lineno, 'non-numeric cell %r in column %d'
                                          % (c, column))
            numbers = [float(c) for c in cells]
            if not all(math.isfinite(x) for x in numbers):
                raise PanelParseError(path, lineno, 'non-finite cell')
            rows.append(numbers)
    if not rows:
        raise PanelParseError(path, 0, 'no numeric records')
    values = np.array(rows)
    if layout == 'columns':
        values = values.T
    panel = PanelMatrix(values)
    logger.info('loaded %s from %s', panel, path)
    return panel


def write_panel(panel, path, layout='rows'):
    """
    Write a panel as comma-separated text that :func:`load_panel` reads back
    bit for bit.
    """
    if layout not in ('rows', 'columns'):
        raise ParameterError("layout must be 'rows' or 'columns', got %r" % layout)
    values = panel.values if layout == 'rows' else panel.values.T
    with Path(path).open('w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        for row in values:
            writer.writerow([repr(float(x)) for x in row])


def column_means(panel):
    """
    Time average of every panel.

        >>> column_means(PanelMatrix([[1, 2, 3, 4], [-1, 1, -1, 1]])).tolist()
        [2.5, 0.0]
    """
    return panel.values.mean(axis=1)
