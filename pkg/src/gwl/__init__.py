"""Density-of-states estimation over discrete inputs.

Classic Wang-Landau sampling with uniform single-site proposals, and the
gradient variant that draws moves from a Gibbs-with-gradients proposal aimed
at the inverted, interpolated entropy.  Exact enumeration provides ground
truth on small spaces.
"""

__version__ = "0.1.0"

from .engine import RunResult, WalkerState, run, wl_step  # noqa: E402
from .histogram import BinSpec, DosHistogram  # noqa: E402
from .models import IsingModel, NetworkModel, make_model  # noqa: E402
from .oracle import enumerate_dos, histogram_error  # noqa: E402

__all__ = [
    "BinSpec",
    "DosHistogram",
    "IsingModel",
    "NetworkModel",
    "RunResult",
    "WalkerState",
    "enumerate_dos",
    "histogram_error",
    "make_model",
    "run",
    "wl_step",
]
