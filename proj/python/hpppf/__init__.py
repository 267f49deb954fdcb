"""Hierarchical point-pair features and 9DoF pose estimation."""

try:
    from ._hpppf import *  # noqa: F401,F403
    from ._hpppf import __version__  # noqa: F401
except ImportError:  # build-tree layout: extension on sys.path, not in the package
    from _hpppf import *  # noqa: F401,F403
    from _hpppf import __version__  # noqa: F401
