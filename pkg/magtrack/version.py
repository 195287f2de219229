import os.path
import sys

import numpy
import scipy
import simpy

with open(os.path.join(os.path.dirname(__file__), 'VERSION')) as version_file:
    __version__ = version_file.read().strip()


def componentVersions():
    """
    (name, version) of magtrack and of everything its numbers depend on.
    """
    return [
        ('Magtrack', __version__),
        ('NumPy', numpy.__version__),
        ('SciPy', scipy.__version__),
        ('SimPy', getattr(simpy, '__version__', 'unknown')),
        ('Python', '.'.join(str(x) for x in sys.version_info[0:3])),
    ]


def pretty_version():
    return ', '.join('{} {}'.format(*c) for c in componentVersions())
