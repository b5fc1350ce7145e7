# These should be sufficient for most people.
from .panel import PanelMatrix, BreakSpec, load_panel, write_panel
from .estimators import make_weights, sigma_hat, kappa_hat, check_sigma
from .teststat import TestSpec, parse_test, compute_statistic, run_test
from .errors import PanelBreakError
__all__ = ['PanelMatrix', 'BreakSpec', 'load_panel', 'write_panel',
           'make_weights', 'sigma_hat', 'kappa_hat', 'check_sigma',
           'TestSpec', 'parse_test', 'compute_statistic', 'run_test',
           'PanelBreakError']
# Also, we should make the version available.
from .version import version_info, __version__
