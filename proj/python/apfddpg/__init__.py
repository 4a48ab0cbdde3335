"""APF-DDPG: adaptive potential-function reward shaping on DDPG for a
kinematic 3-DoF reaching arm.

The heavy lifting lives in the compiled extension; this package re-exports
its public surface.
"""

from apfddpg._core import *  # noqa: F401,F403
from apfddpg._core import __doc__ as _core_doc

__all__ = [name for name in dir() if not name.startswith("_")]
