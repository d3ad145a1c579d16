"""Finite-volume Lyapunov exponents from 2x2 transfer-matrix products.

L_N(E) = (1/N) log ||M_N(E)||,  M_N = T_{N-1} ... T_0,  T_j = [[V_j - E, -1], [1, 0]].

Products are kept as (A, log_scale) with M = exp(log_scale) * A; A is divided
by its Frobenius norm whenever an entry exceeds ``cap``, so nothing overflows
for N in the millions.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K
from .potentials import Family, PhasePoint, PotentialSpec, potential_window, spec_to_config

NORM_CAP = 2.0**50
# families whose potential does not depend on the phase point
PHASELESS = (Family.CONSTANT, Family.POWER_BETA, Family.IID_RANDOM)


@dataclass(frozen=True, eq=False)
class TransferState:
    matrix: np.ndarray
    log_scale: float = 0.0

    @classmethod
    def identity(cls) -> "TransferState":
        return cls(np.eye(2), 0.0)

    def log_norm(self) -> float:
        """log of the Frobenius norm of the represented product."""
        return self.log_scale + math.log(float(np.linalg.norm(self.matrix)))

    def determinant(self) -> float:
        """det of the stored factor A (the product itself has det exp(2 log_scale) * det A)."""
        a = self.matrix
        return float(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0])

    def det_defect(self) -> float:
        """|det A - exp(-2 log_scale)| / ||A||_F^2; zero in exact arithmetic.

        Normalising by ||A||^2 measures the defect relative to the size of the
        terms whose cancellation produces det A, which is what rounding can
        actually preserve once the product is hyperbolic.
        """
        a = self.matrix
        target = math.exp(-2.0 * self.log_scale)
        return abs(self.determinant() - target) / float(np.sum(a * a))


def transfer_step(state: TransferState, v: float, E: float, cap: float = NORM_CAP) -> TransferState:
    t = v - E
    a = state.matrix
    new = np.array([[t * a[0, 0] - a[1, 0], t * a[0, 1] - a[1, 1]], [a[0, 0], a[0, 1]]])
    log_scale = state.log_scale
    if np.max(np.abs(new)) > cap:
        s = float(np.linalg.norm(new))
        new = new / s
        log_scale += math.log(s)
    return TransferState(new, log_scale)


def transfer_product(spec: PotentialSpec, E: float, N: int, cap: float = NORM_CAP, n0: int = 0) -> TransferState:
    """The rescaled product over sites n0 .. n0 + N - 1 (reference implementation, Python loop)."""
    state = TransferState.identity()
    for v in potential_window(spec, n0, N):
        state = transfer_step(state, float(v), E, cap)
    return state


def finite_lyapunov(spec: PotentialSpec, E: float, N: int, cap: float = NORM_CAP) -> float:
    if N < 1:
        raise ValueError("N must be >= 1")
    v = potential_window(spec, 0, N)
    return float(K.transfer_log_norm(v, float(E), float(cap))) / N


@dataclass(frozen=True, eq=False)
class LyapunovCurve:
    energies: np.ndarray
    values: np.ndarray
    N: int
    num_phases: int
    seed: int
    phases: tuple = ()
    provenance: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["E", "L"])
            for e, v in zip(self.energies, self.values):
                w.writerow([f"{e:.17g}", f"{v:.17g}"])

    def metadata(self) -> dict:
        return {
            "N": self.N,
            "num_phases": self.num_phases,
            "seed": self.seed,
            "phases": [[p.x, p.y] for p in self.phases],
            **self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(self.metadata(), indent=2, sort_keys=True)


def sample_phases(spec: PotentialSpec, num_phases: int, seed: int) -> tuple:
    """num_phases == 1 keeps the potential's own phase; otherwise draw uniform phases from the seed."""
    if num_phases < 1:
        raise ValueError("num_phases must be >= 1")
    if num_phases == 1 or spec.family in PHASELESS:
        return (spec.phase,)
    rng = np.random.default_rng(seed)
    xy = rng.random((num_phases, 2))
    return tuple(PhasePoint.from_reals(float(x), float(y)) for x, y in xy)


def lyapunov_curve(
    spec: PotentialSpec,
    energies,
    N: int,
    num_phases: int = 32,
    seed: int = 0,
    cap: float = NORM_CAP,
) -> LyapunovCurve:
    """Phase-averaged L_N(E) on an energy grid; phases are summed in a fixed order."""
    energies = np.ascontiguousarray(energies, dtype=np.float64)
    if energies.ndim != 1 or energies.size == 0:
        raise ValueError("energies must be a non-empty 1-D array")
    if N < 1:
        raise ValueError("N must be >= 1")
    phases = sample_phases(spec, num_phases, seed)
    v = np.stack([potential_window(replace(spec, phase=p), 0, N) for p in phases])
    logs = K.transfer_log_norm_grid(v, energies, float(cap))
    values = logs.mean(axis=1) / N
    return LyapunovCurve(
        energies=energies,
        values=values,
        N=N,
        num_phases=len(phases),
        seed=seed,
        phases=phases,
        provenance={"potential": spec_to_config(spec), "cap": cap},
    )
