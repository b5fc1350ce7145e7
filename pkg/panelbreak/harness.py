"""
Monte Carlo experiments: rejection percentages of the tests over grids of
error models, panel sizes and hypotheses.

An experiment is described by a YAML (or JSON) file, for instance::

    name: table1
    models: [ar1:0, ar1:0.3, arma21]
    n: [50, 100, 200]
    t: [50, 100, 200]
    hypotheses: [null, alternative]
    tests: [hat:ols, hat:wls, hat:tau:0.1, hat:tau:0.5]
    calibration: asymptotic
    replications: 1000
    seed: 1
    scales:
      paper: {replications: 5000}

Replicate ``r`` of the cell ``(model, hypothesis, N, T)`` is simulated from
``derive_seed(seed, model, hypothesis, N, T, r)``, and every test of the
cell sees the same panels, so any single cell can be rerun on its own.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import pandas as pd

from .config import (BURN_IN, CRIT_SEED, GRID, N_PATHS, P_MAX, Settings,
                     load_mapping)
from .dgp import ErrorModel, FactorSpec, draw_break, simulate_panel
from .errors import ParameterError, ReplicateError
from .panel import MIN_T
from .rng import derive_seed
from .teststat import (ASYMPTOTIC, BOOTSTRAP, FUNCTIONALS, SUP,
                       compute_statistics, parse_test)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
NULL = 'null'
ALTERNATIVE = 'alternative'
FORMATS = ('text', 'json', 'csv')
# YAML reads a bare null as None
_HYPOTHESES = {None: NULL, 'h0': NULL, 'h1': ALTERNATIVE, 'ha': ALTERNATIVE}


@dataclass(frozen=True)
class ExperimentConfig:
    """
    A complete, validated experiment description.

    ``factors`` is ``'none'``, ``'weak'`` (loadings ``N**-0.5``) or
    ``'strong'`` (``N**-0.125``); ``n_factors`` iid standard normal factors
    are used.  ``b_reps`` only matters for bootstrap calibration.

    EXAMPLES::

        >>> cfg = ExperimentConfig.from_mapping({'name': 'x', 'n': [50, 100],
        ...                                      't': [50], 'replications': 10})
        >>> cfg.sizes
        ((50, 50), (100, 50))
        >>> [s.label for s in cfg.tests]
        ['hat:ols']
        >>> ExperimentConfig.from_mapping({'name': 'x', 'replications': 0})
        Traceback (most recent call last):
        ...
        panelbreak.errors.ParameterError: replications must be at least 1
    """
    name: str = 'experiment'
    models: tuple = ('ar1:0',)
    sizes: tuple = ((200, 200),)
    hypotheses: tuple = (NULL,)
    tests: tuple = ('hat:ols',)
    functional: str = SUP
    calibration: str = ASYMPTOTIC
    alpha: float = 0.05
    replications: int = 1000
    b_reps: int = 200
    theta: float = 0.5
    delta_low: float = -0.4
    delta_high: float = 0.4
    change_fraction: float = 0.5
    factors: str = 'none'
    n_factors: int = 1
    p_max: int = P_MAX
    hac_bandwidth: int = None
    crit_grid: int = GRID
    crit_paths: int = N_PATHS
    crit_seed: int = CRIT_SEED
    burn_in: int = BURN_IN
    seed: int = 0
    out_dir: str = 'results'
    formats: tuple = FORMATS

    def __post_init__(self):
        def put(name, value):
            object.__setattr__(self, name, value)

        put('models', tuple(m if isinstance(m, ErrorModel) else ErrorModel.parse(m)
                            for m in _as_list(self.models)))
        put('sizes', tuple((int(n), int(t)) for n, t in self.sizes))
        put('hypotheses', tuple(_HYPOTHESES.get(h, h)
                                for h in _as_list(self.hypotheses)))
        put('tests', tuple(parse_test(s, self.functional)
                           for s in _as_list(self.tests)))
        put('formats', tuple(_as_list(self.formats)))
        if self.replications < 1:
            raise ParameterError('replications must be at least 1')
        if self.calibration == BOOTSTRAP and self.b_reps < 1:
            raise ParameterError('b_reps must be at least 1')
        if self.calibration not in (ASYMPTOTIC, BOOTSTRAP):
            raise ParameterError('unknown calibration %r' % self.calibration)
        if self.functional not in FUNCTIONALS:
            raise ParameterError('unknown functional %r' % self.functional)
        if not 0 < self.alpha < 1:
            raise ParameterError('alpha must lie in (0, 1), got %r' % self.alpha)
        if self.factors not in ('none', 'weak', 'strong'):
            raise ParameterError('factors must be none, weak or strong, got %r'
                                 % self.factors)
        for h in self.hypotheses:
            if h not in (NULL, ALTERNATIVE):
                raise ParameterError('unknown hypothesis %r' % h)
        for n, t in self.sizes:
            if n < 1 or t < MIN_T:
                raise ParameterError('cell N = %d, T = %d is too small' % (n, t))
        for fmt in self.formats:
            if fmt not in FORMATS:
                raise ParameterError('unknown output format %r' % fmt)
        if not (self.models and self.sizes and self.hypotheses and self.tests):
            raise ParameterError('an experiment needs models, sizes, '
                                 'hypotheses and tests')

    @classmethod
    def from_mapping(cls, data, scale=None):
        """
        Build a config from a mapping, applying the overrides listed under
        ``scales: {scale: {...}}``.
        """
        data = dict(data)
        scales = data.pop('scales', None) or {}
        if scale is not None:
            if scale not in scales:
                raise ParameterError('config has no %r scale (has %s)'
                                     % (scale, ', '.join(sorted(scales)) or 'none'))
            data.update(scales[scale])
        if 'n' in data or 't' in data:
            if 'sizes' in data:
                raise ParameterError('give either sizes or n and t lists')
            ns = _as_list(data.pop('n', [200]))
            ts = _as_list(data.pop('t', [200]))
            data['sizes'] = tuple(itertools.product(ns, ts))
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ParameterError('unknown config keys: %s' % ', '.join(unknown))
        return cls(**data)

    @classmethod
    def load(cls, path, scale=None):
        data = load_mapping(path)
        data.setdefault('name', Path(path).stem)
        return cls.from_mapping(data, scale)

    @property
    def factor_spec(self):
        if self.factors == 'none':
            return None
        return FactorSpec(self.n_factors, self.factors)

    @property
    def cells(self):
        """
        ``(model, hypothesis, N, T)`` in table order.
        """
        return [(m, h, n, t) for m in self.models for h in self.hypotheses
                for n, t in self.sizes]

    def work_units(self):
        per_rep = self.b_reps + 1 if self.calibration == BOOTSTRAP else 1
        total = sum(n * t for _, _, n, t in self.cells)
        return self.replications * per_rep * total * len(self.tests)


def _as_list(value):
    if isinstance(value, (str, bytes)) or not hasattr(value, '__iter__'):
        return [value]
    return list(value)


@dataclass(frozen=True)
class CellResult:
    """
    Rejections of one test in one cell.
    """
    model: str
    hypothesis: str
    n: int
    t: int
    test: str
    rejections: int
    replications: int
    wall_time: float = 0.0

    @property
    def percent(self):
        return 100.0 * self.rejections / self.replications

    @property
    def se(self):
        p = self.rejections / self.replications
        return 100.0 * math.sqrt(p * (1 - p) / self.replications)


@dataclass
class RejectionTable:
    """
    Rejection percentages with Monte Carlo standard errors
    ``100 sqrt(p (1 - p) / R)``.

    EXAMPLES::

        >>> table = RejectionTable('demo', 0.05, 'asymptotic', ['hat:ols'],
        ...     [CellResult('AR(0)', 'null', 50, 50, 'hat:ols', 5, 100)])
        >>> round(table.cell('AR(0)', 'null', 50, 50, 'hat:ols').se, 6)
        2.179449
        >>> RejectionTable.from_json(table.to_json()) == table
        True
    """
    name: str
    alpha: float
    calibration: str
    tests: list
    cells: list = field(default_factory=list)

    def cell(self, model, hypothesis, n, t, test):
        for c in self.cells:
            if (c.model, c.hypothesis, c.n, c.t, c.test) == (model, hypothesis, n, t, test):
                return c
        raise KeyError((model, hypothesis, n, t, test))

    def to_dict(self):
        out = asdict(self)
        out['schema'] = SCHEMA_VERSION
        return out

    @classmethod
    def from_dict(cls, data):
        if data.get('schema') != SCHEMA_VERSION:
            raise ParameterError('unsupported rejection table schema %r'
                                 % data.get('schema'))
        return cls(data['name'], data['alpha'], data['calibration'],
                   list(data['tests']), [CellResult(**c) for c in data['cells']])

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def to_frame(self):
        """
        One row per cell.
        """
        rows = [dict(asdict(c), percent=c.percent, se=c.se) for c in self.cells]
        columns = ['model', 'hypothesis', 'n', 't', 'test', 'rejections',
                   'replications', 'percent', 'se', 'wall_time']
        return pd.DataFrame(rows, columns=columns)

    def to_text(self):
        """
        Model blocks of ``N``/``T`` rows, one column per hypothesis and test.

        Percentages are printed with one decimal; a cell not run shows ``-``.
        """
        frame = self.to_frame()
        if frame.empty:
            return '%s: no cells\n' % self.name
        models = list(dict.fromkeys(frame['model']))
        hypotheses = list(dict.fromkeys(frame['hypothesis']))
        wide = frame.pivot_table(index=['model', 'n', 't'],
                                 columns=['hypothesis', 'test'],
                                 values='percent', aggfunc='mean')
        groups = [(h, [s for s in self.tests if (h, s) in wide.columns])
                  for h in hypotheses]
        model_width = max(len('Model'), *(len(m) for m in models))
        widths = {s: max(len(s), 6) + 2 for s in self.tests}

        def prefix(model, n, t):
            return model.ljust(model_width) + str(n).rjust(5) + str(t).rjust(5)

        reps = sorted({c.replications for c in self.cells})
        lines = ['%s: rejection percentages at the %g%% level, %s calibration, '
                 'R = %s' % (self.name, 100 * self.alpha, self.calibration,
                             '/'.join(str(r) for r in reps))]
        lines.append(' ' * len(prefix('', '', '')) + ''.join(
            ('  ' + h).ljust(sum(widths[s] for s in tests)) for h, tests in groups))
        lines.append(prefix('Model', 'N', 'T') + ''.join(
            s.rjust(widths[s]) for _, tests in groups for s in tests))
        for model in models:
            if model != models[0]:
                lines.append('')
            block = wide.xs(model, level='model').sort_index()
            for row, ((n, t), values) in enumerate(block.iterrows()):
                cells = []
                for h, tests in groups:
                    for s in tests:
                        x = values[(h, s)]
                        cells.append(('-' if np.isnan(x) else '%.1f' % x).rjust(widths[s]))
                lines.append(prefix(model if row == 0 else '', n, t) + ''.join(cells))
        return '\n'.join(line.rstrip() for line in lines) + '\n'


def estimate_cost(cfg, settings=None):
    """
    Work units ``R x (B + 1) x N x T x tests`` summed over cells; warns
    above ``settings.cost_warning``.
    """
    settings = settings or Settings.from_env()
    units = cfg.work_units()
    if units > settings.cost_warning:
        logger.warning('experiment %s needs about %.2g work units (threshold %.2g);'
                       ' this may take a long time', cfg.name, units,
                       settings.cost_warning)
    return units


def _critical_values(cfg, t, cache, workers=1):
    from .limitdist import CritTableCache, critical_value, table_for
    cache = cache if cache is not None else CritTableCache()
    out = []
    for spec in cfg.tests:
        table = table_for(spec.weights(t), spec.estimator, spec.functional,
                          grid=cfg.crit_grid, n_paths=cfg.crit_paths,
                          seed=cfg.crit_seed, cache=cache, workers=workers)
        out.append(critical_value(table, cfg.alpha))
    return out


def run_replicate(cfg, model, hypothesis, n, t, seed, critical=None):
    """
    Simulate one panel of a cell and return the decision of every test.

    ``critical`` lists the critical values under asymptotic calibration.
    """
    data_seed, break_seed, boot_seed = np.random.SeedSequence(seed).spawn(3)
    breaks = None
    if hypothesis == ALTERNATIVE:
        breaks = draw_break(n, t, cfg.theta, cfg.delta_low, cfg.delta_high,
                            cfg.change_fraction, seed=break_seed)
    panel, _ = simulate_panel(model, n, t, breaks=breaks,
                              factors=cfg.factor_spec, seed=data_seed,
                              burn_in=cfg.burn_in)
    if cfg.calibration == ASYMPTOTIC:
        results = compute_statistics(panel, cfg.tests)
        return [bool(r.normalized > cv) for r, cv in zip(results, critical)]
    from .bootstrap import bootstrap_distribution
    boot = bootstrap_distribution(panel, cfg.tests, b_reps=cfg.b_reps,
                                  seed=boot_seed, p_max=cfg.p_max,
                                  bandwidth=cfg.hac_bandwidth)
    return [bool(p < cfg.alpha) for p in boot.p_values]


def _replicate_task(args):
    cfg, model, hypothesis, n, t, r, seed, critical = args
    try:
        return r, seed, run_replicate(cfg, model, hypothesis, n, t, seed,
                                      critical), None
    except Exception as exc:
        return r, seed, None, '%s: %s' % (type(exc).__name__, exc)


def _cell_label(model, hypothesis, n, t):
    return '%s/%s/N=%d/T=%d' % (model.label, hypothesis, n, t)


def run_experiment(cfg, workers=None, cache=None, settings=None):
    """
    Run every cell of ``cfg`` and tabulate rejection percentages.

    ``workers`` (default ``PANELBREAK_WORKERS``) above one runs replicates
    in a process pool; results are reduced in replicate order, so the
    table does not depend on the schedule.  A failing replicate raises
    :class:`~panelbreak.errors.ReplicateError` with its seed.
    """
    settings = settings or Settings.from_env()
    workers = settings.workers if workers is None else workers
    estimate_cost(cfg, settings)
    table = RejectionTable(cfg.name, cfg.alpha, cfg.calibration,
                           [s.label for s in cfg.tests])
    critical = {}
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        for model, hypothesis, n, t in cfg.cells:
            label = _cell_label(model, hypothesis, n, t)
            if cfg.calibration == ASYMPTOTIC and t not in critical:
                critical[t] = _critical_values(cfg, t, cache, workers)
            tasks = [(cfg, model, hypothesis, n, t, r,
                      derive_seed(cfg.seed, model.label, hypothesis, n, t, r),
                      critical.get(t)) for r in range(cfg.replications)]
            start = time.perf_counter()
            if pool is None:
                results = map(_replicate_task, tasks)
            else:
                chunk = max(1, cfg.replications // (4 * workers))
                results = pool.map(_replicate_task, tasks, chunksize=chunk)
            counts = np.zeros(len(cfg.tests), dtype=int)
            for r, seed, decisions, error in results:
                if error is not None:
                    raise ReplicateError(label, r, seed, error)
                counts += decisions
            elapsed = time.perf_counter() - start
            for spec, count in zip(cfg.tests, counts):
                table.cells.append(CellResult(model.label, hypothesis, n, t,
                                              spec.label, int(count),
                                              cfg.replications, elapsed))
            logger.info('%s: %s (%.1fs)', label, ', '.join(
                '%s %.1f%%' % (s.label, 100.0 * c / cfg.replications)
                for s, c in zip(cfg.tests, counts)), elapsed)
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    return table


def emit_outputs(table, formats=FORMATS, out_dir='.'):
    """
    Write ``<name>.txt``, ``<name>.json`` and/or ``<name>.csv``; returns
    the paths written.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for fmt in formats:
        if fmt == 'text':
            path = out_dir / (table.name + '.txt')
            path.write_text(table.to_text(), encoding='utf-8')
        elif fmt == 'json':
            path = out_dir / (table.name + '.json')
            path.write_text(table.to_json(), encoding='utf-8')
        elif fmt == 'csv':
            path = out_dir / (table.name + '.csv')
            table.to_frame().to_csv(path, index=False)
        else:
            raise ParameterError('unknown output format %r' % fmt)
        logger.info('wrote %s', path)
        paths.append(path)
    return paths
