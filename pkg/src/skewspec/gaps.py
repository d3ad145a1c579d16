"""Gap-length upper bounds from the eigenpair distance profile, and gap certificates.

Every eigenpair (lambda_j, xi_j) of a window carries a certified radius
c_j = boundary weight + bracket + residual with dist(lambda_j, Spec H) <= c_j.
Pooling the pairs of many phases gives the 1-Lipschitz upper envelope

    d(t) = min_j (|t - lambda_j| + c_j)  >=  dist(t, Spec H),

so no gap of Spec H whose midpoint m lies in the covered range can be longer
than 2 d(m).  ``gap_upper_bound`` returns 2 max d on a t-grid, completed
between grid points with the Lipschitz constant.

``certify_gap`` works the other way round: if every window misses an interval
by more than sqrt(2/N), so does Spec H.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K
from .bounds import SIGN_SYMMETRIC, SpectrumBound, _sweep_inputs, lipschitz_slack
from .potentials import Family, PhasePoint, PotentialSpec, spec_to_config
from .tridiag import BISECT_RTOL, build_restriction, spectral_data

CERTIFY_FAMILIES = (Family.HARPER, Family.SKEW_SHIFT, Family.CONSTANT)


@dataclass(frozen=True, eq=False)
class DistanceProfile:
    t_grid: np.ndarray
    d_values: np.ndarray
    N: int
    phase_set: tuple
    witness_phase: np.ndarray
    witness_j: np.ndarray
    # bracket + residual of each witness pair (the part of c beyond the boundary weight)
    witness_eps: np.ndarray = field(default_factory=lambda: np.zeros(0))
    # certified window-spectrum reach: max(lambda - c) and min(lambda + c) over the pool
    reach_upper: float = math.nan
    reach_lower: float = math.nan

    def lipschitz_violation(self) -> float:
        """max over consecutive grid points of |d(t_i+1) - d(t_i)| - (t_i+1 - t_i); <= 0 when 1-Lipschitz."""
        if self.t_grid.size < 2:
            return -math.inf
        return float(np.max(np.abs(np.diff(self.d_values)) - np.diff(self.t_grid)))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "d", "witness_x", "witness_y", "witness_j"])
            for t, d, p, j in zip(self.t_grid, self.d_values, self.witness_phase, self.witness_j):
                ph = self.phase_set[p]
                w.writerow([f"{t:.17g}", f"{d:.17g}", f"{ph.x:.17g}", f"{ph.y:.17g}", int(j) + 1])


@dataclass(frozen=True)
class GapBound:
    gamma_upper: float
    t_star: float
    N: int
    t_grid_step: float
    # Lipschitz completion (one grid step) plus twice the largest bracket + residual among witnesses
    rigor_slack: float
    t_range: tuple
    max_certification_eps: float
    edge_band: float = 0.0
    largest_window_gap: float = math.nan
    provenance: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True)


@dataclass(frozen=True)
class GapCertificate:
    interval: tuple
    N: int
    certified: bool
    margin: float
    method: str
    min_distance: float
    radius: float
    lipschitz: float
    witness_phase: tuple = ()

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True)


def _running_argmin(a):
    """Index of the first minimum of a[:k+1] for every k."""
    prev = np.concatenate(([np.inf], np.minimum.accumulate(a)[:-1]))
    idx = np.where(a < prev, np.arange(a.size), 0)
    return np.maximum.accumulate(idx)


def cone_envelope(t, centers, radii):
    """min_j (|t - centers_j| + radii_j) for every t, with the minimizing j.

    Exact and O((n + m) log n): for t >= lambda the cone is t + (c - lambda),
    so sort by lambda and take prefix minima of c - lambda; symmetrically
    suffix minima of c + lambda for t <= lambda.
    """
    t = np.asarray(t, dtype=np.float64)
    lam = np.asarray(centers, dtype=np.float64)
    c = np.asarray(radii, dtype=np.float64)
    order = np.argsort(lam, kind="stable")
    lam, c = lam[order], c[order]
    left = c - lam
    right = c + lam
    n = lam.size
    pre = np.minimum.accumulate(left)
    pre_arg = _running_argmin(left)
    suf = np.minimum.accumulate(right[::-1])[::-1]
    suf_arg = n - 1 - _running_argmin(right[::-1])[::-1]
    k = np.searchsorted(lam, t, side="right")  # lam[:k] <= t < lam[k:]
    has_left = k > 0
    kl = np.maximum(k - 1, 0)
    vl = np.where(has_left, t + pre[kl], np.inf)
    has_right = k < n
    kr = np.minimum(k, n - 1)
    vr = np.where(has_right, suf[kr] - t, np.inf)
    use_left = vl <= vr
    out = np.where(use_left, vl, vr)
    arg = np.where(use_left, pre_arg[kl], suf_arg[kr])
    return out, order[arg]


def pooled_spectral_data(spec: PotentialSpec, N: int, phase_set):
    """Concatenated (lambda, c, eps, phase index, j) over the windows of phase_set."""
    lams, cs, es, ps, js = [], [], [], [], []
    for p, phase in enumerate(phase_set):
        values, weights, slack = spectral_data(build_restriction(replace(spec, phase=phase), 0, N))
        lams.append(values)
        cs.append(weights + slack)
        es.append(slack)
        ps.append(np.full(N, p, dtype=np.int64))
        js.append(np.arange(N, dtype=np.int64))
    return tuple(np.concatenate(a) for a in (lams, cs, es, ps, js))


def distance_profile(spec: PotentialSpec, N: int, phase_set, t_grid) -> DistanceProfile:
    phase_set = tuple(phase_set)
    if not phase_set:
        raise ValueError("phase_set is empty")
    t_grid = np.asarray(t_grid, dtype=np.float64)
    if t_grid.ndim != 1 or t_grid.size < 1 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be a strictly increasing 1-D array")
    lam, c, eps, ph, js = pooled_spectral_data(spec, N, phase_set)
    d, w = cone_envelope(t_grid, lam, c)
    return DistanceProfile(
        t_grid=t_grid,
        d_values=d,
        N=N,
        phase_set=phase_set,
        witness_phase=ph[w],
        witness_j=js[w],
        witness_eps=eps[w],
        reach_upper=float(np.max(lam - c)),
        reach_lower=float(np.min(lam + c)),
    )


def largest_window_gap(profile_values, lo: float, hi: float) -> tuple[float, float, float]:
    """Widest gap between consecutive sorted values inside [lo, hi]: (width, left, right)."""
    v = np.sort(np.asarray(profile_values, dtype=np.float64))
    v = v[(v >= lo) & (v <= hi)]
    if v.size < 2:
        return 0.0, lo, hi
    g = np.diff(v)
    k = int(np.argmax(g))
    return float(g[k]), float(v[k]), float(v[k + 1])


def gap_upper_bound(
    profile: DistanceProfile,
    enclosure: tuple[float, float] | SpectrumBound | None = None,
    *,
    edge_band: float = 0.0,
) -> GapBound:
    """Gamma_N upper bound 2 (max d + h/2) over the enclosure range of midpoints.

    ``enclosure`` is the (lo, hi) range of gap midpoints to cover; a
    SpectrumBound means [-sigma_plus_lower, sigma_plus_lower].  The profile's
    t_grid must reach both ends.
    """
    if enclosure is None:
        lo, hi = profile.reach_lower, profile.reach_upper
    elif isinstance(enclosure, SpectrumBound):
        lo, hi = -enclosure.sigma_plus_lower, enclosure.sigma_plus_lower
    else:
        lo, hi = map(float, enclosure)
    if not lo <= hi:
        raise ValueError(f"empty enclosure [{lo}, {hi}]")
    t = profile.t_grid
    if t[0] > lo or t[-1] < hi:
        raise ValueError(f"t_grid [{t[0]}, {t[-1]}] does not cover the enclosure [{lo}, {hi}]")
    # the grid points that matter plus one neighbour each side, so every point of
    # [lo, hi] lies between two used grid points
    i0 = max(0, int(np.searchsorted(t, lo, side="right")) - 1)
    i1 = min(t.size, int(np.searchsorted(t, hi, side="left")) + 1)
    tt = t[i0:i1]
    dd = profile.d_values[i0:i1]
    h = float(np.max(np.diff(tt))) if tt.size > 1 else 0.0
    k = int(np.argmax(dd))
    eps = float(np.max(profile.witness_eps[i0:i1])) if profile.witness_eps.size else math.nan
    return GapBound(
        gamma_upper=2.0 * (float(dd[k]) + 0.5 * h),
        t_star=float(tt[k]),
        N=profile.N,
        t_grid_step=h,
        rigor_slack=h + 2.0 * eps,
        t_range=(lo, hi),
        max_certification_eps=eps,
        edge_band=edge_band,
    )


def default_phase_set(spec: PotentialSpec, nx: int, ny: int, extra=()) -> tuple:
    """Uniform grid (i/nx, j/ny) plus ``extra`` phases and their x + 1/2 flips, deduplicated."""
    if spec.family is Family.HARPER:
        ny = 1
    if spec.family in (Family.CONSTANT, Family.IID_RANDOM, Family.POWER_BETA):
        nx = ny = 1
    pts = [PhasePoint((i << 64) // nx, (j << 64) // ny) for j in range(ny) for i in range(nx)]
    for p in extra:
        pts.append(p)
        if spec.family in SIGN_SYMMETRIC:
            pts.append(p.flipped())
    seen, out = set(), []
    for p in pts:
        key = p.as_tuple()
        if key not in seen:
            seen.add(key)
            out.append(p)
    return tuple(out)


def gap_bound_pipeline(
    spec: PotentialSpec,
    N: int,
    phase_nx: int = 64,
    phase_ny: int = 64,
    nt: int = 1 << 14,
    sigma: SpectrumBound | None = None,
) -> tuple[GapBound, DistanceProfile]:
    """Phase grid -> pooled profile -> Gamma upper bound over the certified reach.

    The covered midpoint range is the wider of the profile's own certified
    reach and [-sigma_plus_lower, sigma_plus_lower] when a SpectrumBound is
    supplied; its argmax phase is added to the phase set.
    """
    extra = () if sigma is None else (sigma.argmax_phase,)
    phases = default_phase_set(spec, phase_nx, phase_ny, extra)
    lam, c, eps, ph, js = pooled_spectral_data(spec, N, phases)
    hi = float(np.max(lam - c))
    lo = float(np.min(lam + c))
    if sigma is not None:
        hi = max(hi, sigma.sigma_plus_lower)
        lo = min(lo, -sigma.sigma_plus_lower) if spec.family in SIGN_SYMMETRIC else lo
    t_grid = np.linspace(lo, hi, nt)
    d, w = cone_envelope(t_grid, lam, c)
    profile = DistanceProfile(t_grid, d, N, phases, ph[w], js[w], eps[w], reach_upper=hi, reach_lower=lo)
    band = 0.0 if sigma is None else max(0.0, sigma.sigma_plus_upper - hi)
    gb = gap_upper_bound(profile, (lo, hi), edge_band=band)
    width = max(largest_window_gap(row, lo, hi)[0] for row in lam.reshape(len(phases), N))
    gb = replace(
        gb,
        largest_window_gap=width,
        provenance={"potential": spec_to_config(spec), "N": N, "phase_grid": [phase_nx, phase_ny], "nt": nt},
    )
    return gb, profile


def certify_gap(
    spec: PotentialSpec,
    N: int,
    interval: tuple[float, float],
    grid: tuple[int, int] = (4096, 1),
) -> GapCertificate:
    """Try to certify that ``interval`` misses Spec H.

    Two independent certificates, the better margin wins:

    * ``grid``: min over grid phases of dist(interval, Spec H_I), minus
      sqrt(2/N) and the phase Lipschitz slack;
    * ``gershgorin``: distance from the interval to [min V - 2, max V + 2],
      which contains Spec H for every phase, minus sqrt(2/N).
    """
    if spec.family not in CERTIFY_FAMILIES:
        raise ValueError(f"no phase-torus sweep for family {spec.family.value}")
    a, b = map(float, interval)
    if not a <= b:
        raise ValueError(f"empty interval [{a}, {b}]")
    r0 = math.sqrt(2.0 / N)
    nx, ny = grid
    if spec.family is Family.HARPER:
        ny = 1
    if spec.family is Family.CONSTANT:
        nx = ny = 1
    if spec.family is Family.CONSTANT:
        d = np.full(N, float(spec.c))
        dist = K.interval_distance(d, a, b, BISECT_RTOL * (abs(spec.c) + 2.0))
        arg = (0.0, 0.0)
    else:
        base, ycoef = _sweep_inputs(spec, N)
        tol = BISECT_RTOL * (2.0 * abs(spec.lam) + 2.0)
        rows, idx = K.sweep_interval_distance(base, ycoef, 2.0 * spec.lam, nx, ny, a, b, tol)
        j = int(np.argmin(rows))
        dist = float(rows[j])
        arg = (int(idx[j]) / nx, j / ny)
    lip = lipschitz_slack(spec, N, nx, ny)
    grid_margin = dist - r0 - lip

    vmax = spec.bound
    if spec.family is Family.CONSTANT:
        vlo, vhi = spec.c - 2.0, spec.c + 2.0
    else:
        vlo, vhi = -vmax - 2.0, vmax + 2.0
    gdist = max(vlo - b, a - vhi, 0.0)
    gersh_margin = gdist - r0 if gdist > 0 else -math.inf

    if gersh_margin > grid_margin:
        margin, method = gersh_margin, "gershgorin"
    else:
        margin, method = grid_margin, "grid"
    return GapCertificate(
        interval=(a, b),
        N=N,
        certified=bool(margin > 0),
        margin=float(margin),
        method=method,
        min_distance=float(dist),
        radius=r0,
        lipschitz=float(lip),
        witness_phase=arg,
    )
