"""Certified enclosures of Spec H from finite restrictions.

Two directions:

* distance bounds: a unit vector xi on a window with small residual and small
  end components puts E close to Spec H (``approx_eigenvector_bound``);
* endpoint bounds: sup Spec H <= max over phases of the top window eigenvalue
  plus 2/N (``sigma_plus_bound``), where the max over the phase torus is
  taken on a uniform grid and completed by a Lipschitz term.

The grid completion uses Weyl's inequality: moving the phase by (dx, dy)
changes every diagonal entry by at most 4*pi*|lam|*(|dx| + n_max*|dy|), and
the top eigenvalue moves by no more than the sup-norm of the diagonal change.
Every grid point is within half a spacing of the torus point it stands for.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import _kernels as K
from .potentials import Family, PhasePoint, PotentialSpec, phase_window, spec_to_config
from .tridiag import (
    BISECT_RTOL,
    EigenPair,
    TridiagonalOperator,
    build_restriction,
    eigenpairs,
    extreme_eigenvalues,
)

SWEEP_FAMILIES = (Family.HARPER, Family.SKEW_SHIFT, Family.CONSTANT)
# potentials with V(x + 1/2, y) = -V(x, y): spectra of the flipped windows are negated
SIGN_SYMMETRIC = (Family.HARPER, Family.SKEW_SHIFT)
MAX_GRID = 1 << 16


@dataclass(frozen=True)
class SpectrumBound:
    sigma_plus_upper: float
    sigma_minus_lower: float
    N: int
    grid_nx: int
    grid_ny: int
    slack: float
    argmax_phase: PhasePoint
    grid_max: float
    sigma_plus_lower: float
    slack_terms: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["argmax_phase"] = {"x": self.argmax_phase.x, "y": self.argmax_phase.y}
        return out


def default_grids(spec: PotentialSpec, N: int) -> tuple[int, int]:
    """Phase grid with the x and y Lipschitz terms roughly balanced."""
    if spec.family is Family.HARPER:
        return 4096, 1
    if spec.family is Family.CONSTANT:
        return 1, 1
    nx = 256
    ny = 1 << max(0, math.ceil(math.log2(max(1, (N - 1) * nx))))
    return nx, min(ny, MAX_GRID)


def lipschitz_slack(spec: PotentialSpec, N: int, grid_nx: int, grid_ny: int) -> float:
    """Sup over the torus of lambda_+ minus its max over the grid, bounded above."""
    if spec.family is Family.CONSTANT:
        return 0.0
    hx = 0.5 / grid_nx
    hy = 0.5 / grid_ny
    ymax = N - 1 if spec.family is Family.SKEW_SHIFT else 0
    return 4.0 * math.pi * abs(spec.lam) * (hx + ymax * hy)


def _sweep_inputs(spec: PotentialSpec, N: int):
    origin = replace(spec, phase=PhasePoint(0, 0))
    theta = phase_window(origin, 0, N)
    base = theta.view(np.int64).astype(np.float64) * 2.0**-64
    if spec.family is Family.SKEW_SHIFT:
        ycoef = np.arange(N, dtype=np.int64)
    else:
        ycoef = np.zeros(N, dtype=np.int64)
    return base, ycoef


def _largest_divisor_at_most(n: int, cap: int) -> int:
    return max(s for s in range(1, min(n, cap) + 1) if n % s == 0)


def grid_lambda_max(spec: PotentialSpec, N: int, grid_nx: int, grid_ny: int, sign: float = 1.0):
    """(max over grid of lambda_+, bracket width, ix, iy) for the potential sign*V.

    A coarse sub-grid supplies a starting threshold; each fine grid point is
    then screened with a single Sturm count and bisected only if its top
    eigenvalue reaches the running row maximum.  Ties go to the smallest
    (ix, iy).
    """
    if spec.family is Family.CONSTANT:
        tol = BISECT_RTOL * (abs(spec.c) + 2.0)
        value, width = K.max_eigenvalue_above(np.full(N, sign * spec.c), -np.inf, tol)
        return value, width, 0, 0, tol
    tol = BISECT_RTOL * (2.0 * abs(spec.lam) + 2.0)
    base, ycoef = _sweep_inputs(spec, N)
    lam2 = sign * 2.0 * spec.lam
    sx = _largest_divisor_at_most(grid_nx, 8)
    sy = _largest_divisor_at_most(grid_ny, 64)
    cbest, cidx, cw = K.sweep_lambda_max(base, ycoef, lam2, grid_nx // sx, grid_ny // sy, -np.inf, tol)
    cj = int(np.argmax(cbest))  # first maximal row = smallest iy among ties
    best = (float(cbest[cj]), int(cidx[cj]) * sx, cj * sy, float(cw[cj]))
    rows, idx, widths = K.sweep_lambda_max(base, ycoef, lam2, grid_nx, grid_ny, best[0], tol)
    for j in range(grid_ny):
        if idx[j] < 0:
            continue
        cand = (float(rows[j]), int(idx[j]), j, float(widths[j]))
        if cand[0] > best[0] or (cand[0] == best[0] and (cand[1], cand[2]) < (best[1], best[2])):
            best = cand
    value, ix, iy, width = best
    return value, width, ix, iy, tol


def sigma_plus_bound(
    spec: PotentialSpec,
    N: int,
    grid_nx: int | None = None,
    grid_ny: int | None = None,
) -> SpectrumBound:
    """Certified upper bound on sup Spec H (and lower bound on inf Spec H)."""
    if N < 2:
        raise ValueError("N must be >= 2")
    if spec.family not in SWEEP_FAMILIES:
        raise ValueError(f"no phase-torus sweep for family {spec.family.value}")
    dnx, dny = default_grids(spec, N)
    nx = dnx if grid_nx is None else int(grid_nx)
    ny = dny if grid_ny is None else int(grid_ny)
    if spec.family is Family.HARPER:
        ny = 1
    if spec.family is Family.CONSTANT:
        nx = ny = 1
    if nx < 1 or ny < 1:
        raise ValueError("grid sizes must be >= 1")

    value, width, ix, iy, tol = grid_lambda_max(spec, N, nx, ny)
    lip = lipschitz_slack(spec, N, nx, ny)
    terms = {"two_over_n": 2.0 / N, "lipschitz": lip, "bisection": tol}
    slack = terms["two_over_n"] + terms["lipschitz"] + terms["bisection"]
    upper = value + slack
    argmax = PhasePoint((ix << 64) // nx, (iy << 64) // ny)

    if spec.family in SIGN_SYMMETRIC and nx % 2 == 0:
        lower_minus = -upper
    else:
        mvalue, _, _, _, _ = grid_lambda_max(spec, N, nx, ny, sign=-1.0)
        lower_minus = -(mvalue + slack)

    top = eigenpairs(build_restriction(replace(spec, phase=argmax), 0, N), [N - 1])[0]
    inner = top.value - eigenpair_distance_bound(top)
    provenance = {
        "potential": spec_to_config(spec),
        "N": N,
        "grid": [nx, ny],
        "argmax_index": [ix, iy],
        "symmetry": spec.family in SIGN_SYMMETRIC and nx % 2 == 0,
    }
    return SpectrumBound(
        sigma_plus_upper=upper,
        sigma_minus_lower=lower_minus,
        N=N,
        grid_nx=nx,
        grid_ny=ny,
        slack=slack,
        argmax_phase=argmax,
        grid_max=value,
        sigma_plus_lower=inner,
        slack_terms=terms,
        provenance=provenance,
    )


def eigenpair_distance_bound(pair: EigenPair) -> float:
    """Upper bound on dist(lambda_j, Spec H): boundary weight + bracket + residual."""
    return pair.boundary_weight + pair.bracket + pair.residual


def approx_eigenvector_bound(op: TridiagonalOperator, xi, E: float) -> float:
    """||H_I xi - E xi|| + |xi_first| + |xi_last|, an upper bound on dist(E, Spec H)."""
    xi = np.asarray(xi, dtype=np.float64)
    if xi.shape != (op.N,):
        raise ValueError(f"vector length {xi.shape} does not match N={op.N}")
    norm = float(np.linalg.norm(xi))
    if abs(norm - 1.0) > 1e-12:
        raise ValueError(f"xi must be normalized (norm {norm!r})")
    r = op.matvec(xi) - E * xi
    return float(np.linalg.norm(r)) + abs(xi[0]) + abs(xi[-1])


def verify_sign_flip_symmetry(spec: PotentialSpec, N: int, phases=None) -> float:
    """max over phases of |lambda_-(x, y) + lambda_+(x + 1/2, y)|."""
    if spec.family not in SIGN_SYMMETRIC:
        raise ValueError(f"{spec.family.value} has no x -> x + 1/2 sign symmetry")
    phases = [spec.phase] if phases is None else phases
    worst = 0.0
    for p in phases:
        lo, _ = extreme_eigenvalues(build_restriction(replace(spec, phase=p), 0, N))
        _, hi = extreme_eigenvalues(build_restriction(replace(spec, phase=p.flipped()), 0, N))
        worst = max(worst, abs(lo + hi))
    return worst
