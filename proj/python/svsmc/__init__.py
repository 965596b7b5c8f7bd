"""Satisfaction-probability learning for parametric CTMCs.

Thin wrapper over the C++ core: SSA simulation, STL monitoring, SVI-GP and
SVI-BNN inference of the satisfaction function, and conformal / Chernoff /
PAC-Bayes guarantees.
"""

try:
    from ._svsmc import *  # noqa: F401,F403
    from ._svsmc import __doc__ as _core_doc  # noqa: F401
except ImportError:  # development tree: extension built out-of-package
    from _svsmc import *  # noqa: F401,F403

__version__ = "0.1.0"
