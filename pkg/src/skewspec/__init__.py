"""Certified spectral bounds and Lyapunov exponents for 1D discrete Schrodinger operators."""
import os

# numba otherwise probes for TBB first and warns when the installed one is too old
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

__version__ = "0.1.0"

from .potentials import Family, Frequency, PhasePoint, PotentialSpec, constant, harper, skew_shift  # noqa: E402
from .tridiag import EigenPair, TridiagonalOperator, build_restriction  # noqa: E402

__all__ = [
    "EigenPair",
    "Family",
    "Frequency",
    "PhasePoint",
    "PotentialSpec",
    "TridiagonalOperator",
    "build_restriction",
    "constant",
    "harper",
    "skew_shift",
]
