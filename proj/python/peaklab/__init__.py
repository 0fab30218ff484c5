"""Lattice coagulation-fragmentation toolkit.

Thin wrapper over the compiled core: stationary peak profiles, linearized
and nonlinear amplitude dynamics, fundamental solutions of the simplified
system, and the measure-valued mild solver.
"""

try:
    # installed layout: the extension sits inside the package
    from ._peaklab import *  # noqa: F401,F403
    from ._peaklab import __doc__ as _core_doc  # noqa: F401
except ImportError:
    # build-tree layout: the extension sits next to the package on sys.path
    from _peaklab import *  # noqa: F401,F403
    from _peaklab import __doc__ as _core_doc  # noqa: F401

__version__ = "0.1.0"
