"""Finite restrictions H_I and a bisection / inverse-iteration eigensolver.

H_I is the Dirichlet truncation of V + Delta to I = [n0, n0 + N - 1]: the
sampled potential on the diagonal and ones on both off-diagonals.  Eigenvalues
come from Sturm-count bisection, so every value carries a certified bracket;
eigenvectors come from inverse iteration at the bisected value.

All tolerances are relative to ``scale = max|diag| + 2`` (the Gershgorin
radius).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels as K
from .potentials import PotentialSpec, potential_window

BISECT_RTOL = 1e-14
CLUSTER_RTOL = 1e-8
RESIDUAL_RTOL = 1e-10
MAX_RESTARTS = 3


class EigenSolverError(RuntimeError):
    """Inverse iteration did not reach the residual tolerance."""


@dataclass(frozen=True, eq=False)
class TridiagonalOperator:
    diag: np.ndarray
    n0: int = 0

    def __post_init__(self):
        d = np.ascontiguousarray(self.diag, dtype=np.float64)
        if d.ndim != 1 or d.size < 1:
            raise ValueError("diag must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(d)):
            raise ValueError("diag entries must be finite")
        d.setflags(write=False)
        object.__setattr__(self, "diag", d)

    @property
    def N(self) -> int:
        return self.diag.size

    @property
    def scale(self) -> float:
        return float(np.max(np.abs(self.diag))) + 2.0

    def dense(self) -> np.ndarray:
        n = self.N
        return np.diag(self.diag) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[:-1] += x[1:]
        y[1:] += x[:-1]
        return y

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "diag"])
            for i, v in enumerate(self.diag):
                w.writerow([self.n0 + i, f"{v:.17g}"])

    @classmethod
    def from_csv(cls, path) -> "TridiagonalOperator":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError(f"{path}: no rows")
        return cls(np.array([float(r["diag"]) for r in rows]), n0=int(rows[0]["n"]))


@dataclass(frozen=True, eq=False)
class EigenPair:
    value: float
    vector: np.ndarray
    bracket: float = 0.0
    residual: float = 0.0
    index: int = 0
    boundary_weight: float = field(init=False)

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=np.float64)
        object.__setattr__(self, "vector", v)
        object.__setattr__(self, "boundary_weight", float(abs(v[0]) + abs(v[-1])))


def build_restriction(spec: PotentialSpec, n0: int, N: int) -> TridiagonalOperator:
    return TridiagonalOperator(potential_window(spec, n0, N), n0=n0)


def _diag(op) -> np.ndarray:
    return op.diag if isinstance(op, TridiagonalOperator) else np.ascontiguousarray(op, dtype=np.float64)


def sturm_count(op: TridiagonalOperator, E: float) -> int:
    """Number of eigenvalues strictly below E."""
    return int(K.sturm_count(_diag(op), float(E)))


def _tol(op, tol):
    return BISECT_RTOL * max(1.0, op.scale) if tol is None else tol


def eigenvalue_brackets(op: TridiagonalOperator, tol: float | None = None):
    """(lo, hi) arrays with lo[k] <= lambda_k <= hi[k], ascending."""
    return K.all_brackets(op.diag, _tol(op, tol))


def all_eigenvalues(op: TridiagonalOperator, tol: float | None = None) -> np.ndarray:
    lo, hi = eigenvalue_brackets(op, tol)
    return 0.5 * (lo + hi)


def extreme_eigenvalues(op: TridiagonalOperator, tol: float | None = None) -> tuple[float, float]:
    a, b, c, d = K.extreme_brackets(op.diag, _tol(op, tol))
    return 0.5 * (a + b), 0.5 * (c + d)


def _solve_vectors(op: TridiagonalOperator, values: np.ndarray, widths: np.ndarray, indices) -> list[EigenPair]:
    want = np.array(sorted(set(int(j) for j in indices)), dtype=np.int64)
    scale = op.scale
    vecs, res, failed = K.eigenvectors(
        op.diag, values, want, scale, RESIDUAL_RTOL * scale, CLUSTER_RTOL * scale, MAX_RESTARTS
    )
    if failed >= 0:
        raise EigenSolverError(
            f"inverse iteration stagnated for eigenvalue index {failed} (value {values[failed]:.17g})"
        )
    return [
        EigenPair(float(values[j]), vecs[t], bracket=float(widths[j]), residual=float(res[t]), index=int(j))
        for t, j in enumerate(want)
    ]


def eigenpair(op: TridiagonalOperator, j: int) -> EigenPair:
    """The j-th eigenpair, 1 <= j <= N, ascending order."""
    if not 1 <= j <= op.N:
        raise IndexError(f"eigenpair index {j} outside 1..{op.N}")
    lo, hi = eigenvalue_brackets(op)
    values = 0.5 * (lo + hi)
    (pair,) = _solve_vectors(op, values, hi - lo, [j - 1])
    return pair


def eigenpairs(op: TridiagonalOperator, indices=None) -> list[EigenPair]:
    """Eigenpairs for 0-based ``indices`` (default: all), ascending."""
    lo, hi = eigenvalue_brackets(op)
    values = 0.5 * (lo + hi)
    idx = range(op.N) if indices is None else indices
    return _solve_vectors(op, values, hi - lo, idx)


def spectral_data(op: TridiagonalOperator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(values, boundary weights, certification slack) for every eigenpair.

    The slack is bracket width plus residual norm, i.e. the epsilon of the
    approximate-eigenvector distance bound realised numerically.
    """
    scale = op.scale
    values, weights, slack, failed = K.spectral_data(
        op.diag, _tol(op, None), RESIDUAL_RTOL * scale, CLUSTER_RTOL * scale, MAX_RESTARTS
    )
    if failed >= 0:
        raise EigenSolverError(f"inverse iteration stagnated for eigenvalue index {failed}")
    return values, weights, slack


def dump_eigenvalues(path: Path, values) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "lambda"])
        for j, v in enumerate(values, start=1):
            w.writerow([j, f"{v:.17g}"])
