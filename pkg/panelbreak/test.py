"""
Run the doctests of every module, then the pytest suite if the ``tests``
directory is next to the package.

    python -m panelbreak.test [-v]
"""

import doctest
import getopt
import os
import re
import sys

import numpy as np

from . import (bootstrap, cli, config, cusum, dgp, errors, estimators,
               harness, limitdist, panel, rng, teststat, tests, version)

try:
    from . import _kahan
except ImportError:
    _kahan = None


class DocTestParser(doctest.DocTestParser):

    def parse(self, string, name='<string>'):
        # Remove tests with random results
        regex_random = re.compile('\n[^#^\n]*# random.*\n[^\n]*[^\n]*',
                                  re.MULTILINE)
        string = regex_random.sub('', string)
        # Remove lines containing :: which confuse doctests
        string = re.sub(' ::', '                  ', string)
        return doctest.DocTestParser.parse(self, string, name)


extra_globals = {'np': np}
modules_to_test = [
    (tests, extra_globals),
    (errors, extra_globals),
    (config, extra_globals),
    (rng, extra_globals),
    (panel, extra_globals),
    (dgp, extra_globals),
    (cusum, extra_globals),
    (estimators, extra_globals),
    (teststat, extra_globals),
    (limitdist, extra_globals),
    (bootstrap, extra_globals),
    (harness, extra_globals),
    (cli, extra_globals),
    (version, extra_globals),
]
if _kahan is not None:
    modules_to_test.append((_kahan, extra_globals))


def runtests(verbose=False):
    parser = DocTestParser()
    finder = doctest.DocTestFinder(parser=parser)
    failed, attempted = 0, 0
    for module, extra_globals in modules_to_test:
        print('Running doctests in %s:' % module.__name__)
        runner = doctest.DocTestRunner(
            verbose=verbose,
            optionflags=(doctest.ELLIPSIS | doctest.NORMALIZE_WHITESPACE |
                         doctest.IGNORE_EXCEPTION_DETAIL))
        for test in finder.find(module, extraglobs=extra_globals):
            runner.run(test)
        result = runner.summarize()
        failed += result.failed
        attempted += result.attempted
        print(result)
        print()
    print('\nAll doctests:\n   %s failures out of %s tests.' % (failed, attempted))
    return failed


def run_pytest(verbose=False):
    suite = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
                         'tests')
    if not os.path.isdir(suite):
        return 0
    import pytest
    return pytest.main([suite] + (['-v'] if verbose else ['-q']))


if __name__ == '__main__':
    try:
        optlist, args = getopt.getopt(sys.argv[1:], 'v', ['verbose'])
        opts = [o[0] for o in optlist]
        verbose = '-v' in opts or '--verbose' in opts
    except getopt.GetoptError:
        verbose = False
    failed = runtests(verbose)
    failed += run_pytest(verbose)
    sys.exit(failed)
