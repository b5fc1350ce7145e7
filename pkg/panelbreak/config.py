"""
Settings, defaults and configuration files.

Run-time settings come from the environment:

- ``PANELBREAK_WORKERS`` -- number of worker processes for Monte Carlo
  experiments (default 1, i.e. run in-process).
- ``PANELBREAK_CACHE_DIR`` -- where critical-value tables are cached
  (default ``~/.cache/panelbreak``).
- ``PANELBREAK_COST_WARNING`` -- work units above which the experiment
  runner warns before starting (default ``5e10``).
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path

import yaml

from .errors import ParameterError

BURN_IN = 200
GRID = 1000
N_PATHS = 10000
CRIT_SEED = 20240601
P_MAX = 8
ALPHA_LEVELS = (0.10, 0.05, 0.025, 0.01)
KAPPA_FLOOR = 1e-12


@dataclass(frozen=True)
class Settings:
    workers: int = 1
    cache_dir: Path = Path('~/.cache/panelbreak').expanduser()
    cost_warning: float = 5e10

    @classmethod
    def from_env(cls, environ=None):
        env = os.environ if environ is None else environ
        try:
            workers = int(env.get('PANELBREAK_WORKERS', 1))
            cost = float(env.get('PANELBREAK_COST_WARNING', 5e10))
        except ValueError as exc:
            raise ParameterError('bad panelbreak environment setting: %s' % exc)
        if workers < 1:
            raise ParameterError('PANELBREAK_WORKERS must be at least 1')
        cache = env.get('PANELBREAK_CACHE_DIR')
        cache_dir = Path(cache) if cache else cls.cache_dir
        return cls(workers=workers, cache_dir=cache_dir.expanduser(),
                   cost_warning=cost)


def hac_bandwidth(t):
    """
    Default Bartlett bandwidth for the factor long-run covariance.

        >>> hac_bandwidth(200), hac_bandwidth(1000)
        (5, 10)
    """
    # T**(1/3) is not exact for perfect cubes
    b = int(round(t ** (1.0 / 3)))
    return b if b ** 3 <= t else b - 1


def load_mapping(path):
    """
    Read a YAML or JSON file into a dict.
    """
    path = Path(path)
    with path.open('r', encoding='utf-8') as f:
        if path.suffix.lower() == '.json':
            data = json.load(f)
        else:
            data = yaml.safe_load(f)
    if not isinstance(data, dict):
        raise ParameterError('%s does not contain a mapping' % path)
    return data


def configure_logging(verbosity=0):
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(
        level=level,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    logging.getLogger('panelbreak').setLevel(level)
