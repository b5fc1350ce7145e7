"""
The package version, as a tuple and as a string.

    >>> version_info >= (0, 3), Version(1, 0, 0, 'rc1').__str__()
    (True, '1.0.0rc1')
"""

from collections import namedtuple


class Version(namedtuple('Version', ['major', 'minor', 'micro', 'tag'])):
    def __str__(self):
        return '%d.%d.%d%s' % self


version_info = Version(0, 3, 0, '')
__version__ = str(version_info)
