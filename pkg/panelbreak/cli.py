"""
Command line interface::

    panelbreak simulate --model ar1:0.3 -n 100 -t 200 --seed 1 --out panel.csv
    panelbreak test panel.csv --weights wls --estimator check
    panelbreak bootstrap-test panel.csv --reps 500 --pmax 8
    panelbreak critvals --kind tau --tau 0.1
    panelbreak montecarlo --config configs/table1.yaml --scale desk

Exit status is 0 on success, 1 when the computation fails and 2 on usage
errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .config import (CRIT_SEED, GRID, N_PATHS, P_MAX, Settings,
                     configure_logging)
from .dgp import ErrorModel, FactorSpec, draw_break, simulate_panel
from .errors import PanelBreakError, ParameterError
from .harness import ExperimentConfig, emit_outputs, run_experiment
from .limitdist import CritTableCache, FUNCTIONALS
from .panel import load_panel, write_panel
from .teststat import ASYMPTOTIC, BOOTSTRAP, ESTIMATORS, run_test
from .version import __version__

logger = logging.getLogger(__name__)


def _parse_delta_law(text):
    """
    ``'none'`` or ``'uniform:a:b'``.
    """
    parts = text.lower().split(':')
    if parts == ['none']:
        return None
    if parts[0] == 'uniform' and len(parts) == 3:
        try:
            return float(parts[1]), float(parts[2])
        except ValueError:
            pass
    raise ParameterError("delta law must be 'none' or 'uniform:a:b', got %r" % text)


def cmd_simulate(args):
    model = ErrorModel.parse(args.model)
    if args.rho is not None:
        model = ErrorModel.ar1(args.rho)
    law = _parse_delta_law(args.delta_law)
    data_seed, break_seed = np.random.SeedSequence(args.seed).spawn(2)
    breaks = None
    if law is not None:
        breaks = draw_break(args.n, args.t, args.theta, law[0], law[1],
                            args.change_fraction, seed=break_seed)
    factors = None
    if args.factors != 'none':
        factors = FactorSpec(args.p, args.factors)
    panel, _ = simulate_panel(model, args.n, args.t, breaks=breaks,
                                 factors=factors, seed=data_seed)
    if args.out is None:
        out = sys.stdout
        values = panel.values if args.layout == 'rows' else panel.values.T
        for row in values:
            out.write(','.join(repr(float(x)) for x in row) + '\n')
    else:
        write_panel(panel, args.out, args.layout)
        logger.info('wrote %s to %s', panel, args.out)
    return 0


def _print_outcome(outcome, as_json):
    record = outcome.to_dict()
    if as_json:
        print(json.dumps(record, indent=1, default=str))
        return
    rows = [('test', outcome.test), ('calibration', outcome.calibration),
            ('N, T', '%d, %d' % (outcome.n_panels, outcome.n_time)),
            ('statistic', '%.6g' % outcome.statistic),
            ('kappa', '%.6g' % outcome.kappa),
            ('normalized', '%.6g' % outcome.normalized)]
    if outcome.critical_value is not None:
        rows.append(('critical value', '%.6g' % outcome.critical_value))
    if outcome.p_value is not None:
        rows.append(('p-value', '%.4g' % outcome.p_value))
    for key in ('p_hat', 'lambda_bar'):
        if key in outcome.extra:
            rows.append((key, '%.6g' % outcome.extra[key]))
    if outcome.argmax_u is not None:
        rows.append(('argmax u', '%.4g' % outcome.argmax_u))
    rows.append(('alpha', '%g' % outcome.alpha))
    rows.append(('decision', 'reject' if outcome.reject else 'do not reject'))
    width = max(len(k) for k, _ in rows)
    for key, value in rows:
        print('%s  %s' % (key.ljust(width), value))


def cmd_test(args, calibration=None):
    panel = load_panel(args.panel, args.layout)
    cache = CritTableCache(args.cache_dir) if args.cache_dir else None
    outcome = run_test(panel, args.weights, args.estimator, args.functional,
                       calibration or args.calibration, args.alpha,
                       seed=args.seed, cache=cache, build=not args.no_build,
                       grid=args.grid, n_paths=args.paths,
                       crit_seed=args.crit_seed, b_reps=args.reps,
                       p_max=args.pmax, bandwidth=args.hac_bandwidth)
    _print_outcome(outcome, args.json)
    return 0


def cmd_bootstrap_test(args):
    return cmd_test(args, calibration=BOOTSTRAP)


def cmd_critvals(args):
    cache = CritTableCache(args.cache_dir) if args.cache_dir else CritTableCache()
    workers = Settings.from_env().workers if args.workers is None else args.workers
    table = cache.get(args.kind, args.tau, args.functional, args.grid,
                      args.paths, args.seed, build=not args.no_build,
                      workers=workers)
    if args.json:
        data = table.to_dict()
        data.pop('sample', None)
        print(json.dumps(data, indent=1))
    else:
        print('%s%s %s, G = %d, %d paths, seed %d' % (
            table.kind, '' if table.tau is None else ' tau=%g' % table.tau,
            table.functional, table.grid, table.n_paths, table.seed))
        for alpha, value in sorted(table.quantiles.items(), reverse=True):
            print('  alpha %-6g %.4f' % (alpha, value))
    return 0


def cmd_montecarlo(args):
    cfg = ExperimentConfig.load(args.config, args.scale)
    settings = Settings.from_env()
    cache = CritTableCache(args.cache_dir) if args.cache_dir else None
    table = run_experiment(cfg, workers=args.workers, cache=cache,
                           settings=settings)
    out_dir = args.out or cfg.out_dir
    for path in emit_outputs(table, cfg.formats, out_dir):
        print(path)
    if 'text' in cfg.formats:
        print(table.to_text(), end='')
    return 0


def _add_test_options(parser):
    parser.add_argument('panel', help='comma-separated panel file')
    parser.add_argument('--layout', choices=('rows', 'columns'), default='rows')
    parser.add_argument('--weights', default='ols',
                        help="ols, wls or tau:<value> (default: ols)")
    parser.add_argument('--estimator', choices=ESTIMATORS, default='hat')
    parser.add_argument('--functional', choices=FUNCTIONALS, default='sup')
    parser.add_argument('--alpha', type=float, default=0.05)
    parser.add_argument('--seed', type=int, default=None)
    parser.add_argument('--reps', type=int, default=500,
                        help='bootstrap replications B')
    parser.add_argument('--pmax', type=int, default=P_MAX)
    parser.add_argument('--hac-bandwidth', type=int, default=None)
    parser.add_argument('--grid', type=int, default=GRID)
    parser.add_argument('--paths', type=int, default=N_PATHS)
    parser.add_argument('--crit-seed', type=int, default=CRIT_SEED)
    parser.add_argument('--cache-dir', default=None)
    parser.add_argument('--no-build', action='store_true',
                        help='fail instead of simulating a missing table')
    parser.add_argument('--json', action='store_true',
                        help='print the outcome as JSON')


def build_parser():
    parser = argparse.ArgumentParser(
        prog='panelbreak',
        description='Tests for a change in the cross-sectional mean of panel data.')
    parser.add_argument('--version', action='version',
                        version='%(prog)s ' + __version__)
    parser.add_argument('-v', '--verbose', action='count', default=0)
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('simulate', help='write a simulated panel as CSV')
    p.add_argument('--model', default='ar1:0', help='ar1:<rho> or arma21')
    p.add_argument('--rho', type=float, default=None)
    p.add_argument('-n', type=int, required=True, help='number of panels N')
    p.add_argument('-t', type=int, required=True, help='number of time points T')
    p.add_argument('--theta', type=float, default=0.5)
    p.add_argument('--delta-law', default='none', help="none or uniform:a:b")
    p.add_argument('--change-fraction', type=float, default=0.5)
    p.add_argument('--factors', choices=('none', 'weak', 'strong'), default='none')
    p.add_argument('--p', type=int, default=1, help='number of factors')
    p.add_argument('--seed', type=int, default=None)
    p.add_argument('--layout', choices=('rows', 'columns'), default='rows')
    p.add_argument('--out', default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser('test', help='test a panel file for a change in mean')
    _add_test_options(p)
    p.add_argument('--calibration', choices=(ASYMPTOTIC, BOOTSTRAP),
                   default=ASYMPTOTIC)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser('bootstrap-test', help='factor-model wild bootstrap test')
    _add_test_options(p)
    p.set_defaults(func=cmd_bootstrap_test)

    p = sub.add_parser('critvals', help='build or show a critical-value table')
    p.add_argument('--kind', default='ols', choices=(
        'ols', 'wls', 'tau', 'oracle', 'check-ols', 'check-wls', 'check-tau'))
    p.add_argument('--tau', type=float, default=None)
    p.add_argument('--functional', choices=FUNCTIONALS, default='sup')
    p.add_argument('--grid', type=int, default=GRID)
    p.add_argument('--paths', type=int, default=N_PATHS)
    p.add_argument('--seed', type=int, default=CRIT_SEED)
    p.add_argument('--cache-dir', default=None)
    p.add_argument('--workers', type=int, default=None)
    p.add_argument('--no-build', action='store_true')
    p.add_argument('--json', action='store_true')
    p.set_defaults(func=cmd_critvals)

    p = sub.add_parser('montecarlo', help='run a Monte Carlo experiment')
    p.add_argument('--config', required=True, help='YAML or JSON experiment file')
    p.add_argument('--scale', choices=('desk', 'paper'), default=None)
    p.add_argument('--out', default=None, help='output directory')
    p.add_argument('--workers', type=int, default=None)
    p.add_argument('--cache-dir', default=None)
    p.set_defaults(func=cmd_montecarlo)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    try:
        return args.func(args)
    except (PanelBreakError, OSError) as exc:
        print('panelbreak: error: %s' % exc, file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
