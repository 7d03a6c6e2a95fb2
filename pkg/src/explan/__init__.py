"""explan: sampling-based 2D exploration planning.

Procedurally generated worlds, a simulated range-sensing robot, a classical
uniform-sampling next-best-view planner, and learned planners (a CVAE over
informative viewpoints plus optional learned gain estimators) with a
benchmark harness to compare them.
"""

__version__ = "0.1.0"

from .kernels import BACKEND as KERNEL_BACKEND

__all__ = ["KERNEL_BACKEND", "__version__"]
