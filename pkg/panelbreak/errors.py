"""
Exceptions raised by panelbreak.

Everything derives from :class:`PanelBreakError`, and each subclass also
derives from the builtin it refines, so ``except ValueError`` keeps working
for callers that do not know about this package.

EXAMPLES::

    >>> from panelbreak.errors import PanelParseError, PanelBreakError
    >>> err = PanelParseError('data.csv', 3, 'expected 4 fields, found 5')
    >>> print(err)
    data.csv, line 3: expected 4 fields, found 5
    >>> isinstance(err, PanelBreakError) and isinstance(err, ValueError)
    True
"""


class PanelBreakError(Exception):
    """
    Base class of all errors raised by this package.
    """


class PanelParseError(PanelBreakError, ValueError):
    """
    A panel file could not be read.  ``line`` is 1-based.
    """
    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        self.message = message
        PanelBreakError.__init__(self, '%s, line %s: %s' % (self.path, line, message))


class DimensionError(PanelBreakError, ValueError):
    pass


class ParameterError(PanelBreakError, ValueError):
    pass


class DegenerateDataError(PanelBreakError, ArithmeticError):
    pass


class KernelNotPSDError(PanelBreakError, ArithmeticError):
    """
    A covariance kernel could not be factored, even with jitter.
    """
    def __init__(self, min_eigenvalue, jitter):
        self.min_eigenvalue = min_eigenvalue
        self.jitter = jitter
        PanelBreakError.__init__(
            self, 'kernel is not positive semi-definite: minimum eigenvalue '
            '%.3e (last jitter %.3e)' % (min_eigenvalue, jitter))


class MissingTableError(PanelBreakError, LookupError):
    """
    A critical-value table is not cached and building it was disabled.
    """
    def __init__(self, key):
        self.key = key
        PanelBreakError.__init__(
            self, 'no critical-value table for %s' % ', '.join(
                '%s=%s' % item for item in sorted(key.items())))


class ReplicateError(PanelBreakError, RuntimeError):
    """
    A Monte Carlo replicate failed.  ``seed`` replays it.
    """
    def __init__(self, cell, replicate, seed, cause):
        self.cell = cell
        self.replicate = replicate
        self.seed = seed
        self.cause = cause
        PanelBreakError.__init__(
            self, 'replicate %d of cell %s failed (seed %s): %s'
            % (replicate, cell, seed, cause))
