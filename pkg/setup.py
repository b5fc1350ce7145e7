long_description = """\
The package *panelbreak* tests for a structural break in the
cross-sectional mean of panel data.  The long-run variance of the panels is
estimated by weighted least squares regressions of the CUSUM-square paths,
critical values come from simulated Gaussian limits, and a factor-model
wild bootstrap handles cross-sectional dependence.  A Monte Carlo harness
reproduces rejection tables from checked-in experiment files.
"""

no_cython_message = """
Cython is not available; panelbreak will use its pure numpy code paths.
"""

import sys
if sys.version_info < (3, 9):
    print("Python 3.9 or higher is required")
    sys.exit()

import os
import shutil
import sysconfig
from glob import glob
from setuptools import setup, Command, Extension
from setuptools.command.build_ext import build_ext


class PanelBreakClean(Command):
    user_options = []
    def initialize_options(self):
        pass
    def finalize_options(self):
        pass
    def run(self):
        junkdirs = (glob('build/lib*') +
                    glob('build/bdist*') +
                    glob('build/temp*') +
                    glob('panelbreak*.egg-info')
        )
        for dir in junkdirs:
            try:
                shutil.rmtree(dir)
            except OSError:
                pass
        junkfiles = (glob('panelbreak/*.so*') +
                     glob('panelbreak/*.pyd') +
                     glob('panelbreak/*.pyc') +
                     glob('panelbreak/_kahan.c')
        )
        for file in junkfiles:
            try:
                os.remove(file)
            except OSError:
                pass

class PanelBreakTest(Command):
    user_options = []
    def initialize_options(self):
        pass
    def finalize_options(self):
        pass
    def run(self):
        build_lib_dir = os.path.join(
            'build',
            'lib.{platform}-cpython-{version_info[0]}{version_info[1]}'.format(
                platform=sysconfig.get_platform(),
                version_info=sys.version_info)
            )
        if os.path.exists(build_lib_dir):
            sys.path.insert(0, os.path.abspath(build_lib_dir))
        from panelbreak.test import runtests, run_pytest
        sys.exit(runtests() + run_pytest())

class PanelBreakBuildExt(build_ext):
    """
    The compiled module is an accelerator only; a failed build leaves the
    package fully usable.
    """
    def run(self):
        try:
            build_ext.run(self)
        except Exception as exc:
            print('*** skipping panelbreak._kahan: %s' % exc)

    def build_extension(self, ext):
        try:
            build_ext.build_extension(self, ext)
        except Exception as exc:
            print('*** skipping %s: %s' % (ext.name, exc))


try:
    from Cython.Build import cythonize
    ext_modules = cythonize(
        [Extension(name='panelbreak._kahan',
                   sources=[os.path.join('panelbreak', '_kahan.pyx')],
                   optional=True)],
        compiler_directives={'language_level': 3})
except ImportError:
    print(no_cython_message)
    ext_modules = []

# Load the version number.
sys.path.insert(0, 'panelbreak')
from version import __version__
sys.path.pop(0)

setup(
    name = 'panelbreak',
    version = __version__,
    description = 'Tests for a change in the cross-sectional mean of panel data.',
    packages = ['panelbreak'],
    package_dir = {'panelbreak':'panelbreak'},
    package_data = {'panelbreak': ['_kahan.pyx']},
    cmdclass = {
        'build_ext': PanelBreakBuildExt,
        'clean': PanelBreakClean,
        'test': PanelBreakTest,
    },
    ext_modules = ext_modules,
    python_requires = '>=3.9',
    install_requires = ['numpy>=1.22', 'scipy>=1.8', 'pandas>=1.4', 'PyYAML>=6.0'],
    extras_require = {'test': ['pytest>=7', 'hypothesis>=6']},
    entry_points = {'console_scripts': ['panelbreak = panelbreak.cli:main']},
    zip_safe = False,
    long_description = long_description,
    license = 'GPL-2.0-or-later',
    classifiers = [
        'Development Status :: 4 - Beta',
        'Intended Audience :: Science/Research',
        'Operating System :: OS Independent',
        'Programming Language :: Cython',
        'Programming Language :: Python :: 3',
        'Topic :: Scientific/Engineering :: Mathematics',
        ],
    keywords = 'change point, structural break, panel data, CUSUM, bootstrap',
)
