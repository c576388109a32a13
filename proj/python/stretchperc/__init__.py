"""Percolation on a randomly stretched square lattice.

Thin wrapper over the compiled extension. Installed wheels carry the
extension inside this package; in a plain CMake build tree it sits on
PYTHONPATH next to the sources instead.
"""

try:
    from ._stretchperc import *  # noqa: F401,F403
    from ._stretchperc import __version__, __doc__  # noqa: F401
except ImportError:  # build-tree layout
    from _stretchperc import *  # noqa: F401,F403
    from _stretchperc import __version__, __doc__  # noqa: F401
