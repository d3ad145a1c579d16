import json
from dataclasses import replace

import numpy as np
import pytest

from skewspec.bounds import (
    approx_eigenvector_bound,
    eigenpair_distance_bound,
    grid_lambda_max,
    lipschitz_slack,
    sigma_plus_bound,
    verify_sign_flip_symmetry,
)
from skewspec.potentials import Family, Frequency, PhasePoint, PotentialSpec, constant, harper, skew_shift
from skewspec.tridiag import EigenPair, TridiagonalOperator, build_restriction, eigenpair


def test_interior_unit_vector_bound_is_sqrt2():
    op = build_restriction(harper(1.0, 0.3), 0, 20)
    xi = np.zeros(20)
    xi[7] = 1.0
    assert approx_eigenvector_bound(op, xi, op.diag[7]) == pytest.approx(np.sqrt(2), abs=1e-15)


def test_approx_bound_rejects_unnormalized():
    op = build_restriction(constant(0.0), 0, 5)
    with pytest.raises(ValueError):
        approx_eigenvector_bound(op, np.ones(5), 0.0)
    with pytest.raises(ValueError):
        approx_eigenvector_bound(op, np.ones(4) / 2, 0.0)


def test_exact_interior_eigenpair_has_zero_distance_bound():
    pair = EigenPair(1.0, np.array([0.0, 1.0, 0.0]), bracket=0.0, residual=0.0)
    assert eigenpair_distance_bound(pair) == 0.0


def test_distance_bound_contains_free_spectrum():
    # constant 0: Spec H = [-2, 2]; every window eigenvalue is inside, so the bound holds trivially,
    # and the centre eigenvector of N=3 gives bound sqrt(2)
    pair = eigenpair(build_restriction(constant(0.0), 0, 3), 2)
    assert eigenpair_distance_bound(pair) == pytest.approx(np.sqrt(2), abs=1e-9)


def test_distance_bound_dominates_true_distance_periodic():
    # omega = 1/2: V = a, -a, a, ... with a = 2 lam cos(2 pi x); Spec H = {E : E^2 - a^2 in [0, 4]}
    lam, x = 1.0, 0.1
    spec = PotentialSpec(Family.HARPER, lam=lam, omega=Frequency.from_real(0.5), phase=PhasePoint.from_reals(x))
    a = 2 * lam * np.cos(2 * np.pi * x)
    lo, hi = abs(a), np.sqrt(a * a + 4)

    def dist(E):
        e = abs(E)
        return 0.0 if lo <= e <= hi else min(abs(e - lo), abs(e - hi))

    op = build_restriction(spec, 0, 60)
    for j in range(1, 61):
        p = eigenpair(op, j)
        assert dist(p.value) <= eigenpair_distance_bound(p) + 1e-12


def test_sigma_constant_brackets_true_edge():
    for c in (0.0, 0.7):
        sb = sigma_plus_bound(constant(c), 50)
        assert sb.sigma_plus_upper >= c + 2.0
        assert sb.sigma_plus_upper <= c + 2.0 + 2.0 / 50 + 1e-9
        assert sb.sigma_minus_lower <= c - 2.0
        assert sb.sigma_plus_lower <= c + 2.0


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_sigma_periodic_harper_oracle(lam):
    spec = PotentialSpec(Family.HARPER, lam=lam, omega=Frequency.from_real(0.5))
    true_top = np.sqrt(4 * lam * lam + 4)
    sb = sigma_plus_bound(spec, 40, 64)
    assert sb.sigma_plus_upper >= true_top
    assert sb.grid_max <= true_top + 1e-12
    assert sb.sigma_plus_lower <= true_top + 1e-12
    assert sb.sigma_minus_lower <= -true_top


def test_slack_identity_and_fields():
    sb = sigma_plus_bound(skew_shift(1.0), 16, 8, 32)
    assert sb.sigma_plus_upper - sb.grid_max == pytest.approx(sb.slack, abs=1e-15)
    assert sb.slack == pytest.approx(sum(sb.slack_terms.values()), abs=1e-15)
    assert sb.slack_terms["lipschitz"] == pytest.approx(4 * np.pi * (1 / 16 + 15 / 64))
    assert sb.sigma_minus_lower == -sb.sigma_plus_upper
    assert sb.sigma_plus_lower <= sb.grid_max <= sb.sigma_plus_upper
    back = json.loads(sb.to_json())
    assert back["grid_nx"] == 8 and back["grid_ny"] == 32


def _brute_grid(spec, N, nx, ny):
    best, arg = -np.inf, None
    for i in range(nx):
        for j in range(ny):
            s = replace(spec, phase=PhasePoint((i << 64) // nx, (j << 64) // ny))
            top = np.linalg.eigvalsh(build_restriction(s, 0, N).dense())[-1]
            if top > best + 1e-13:
                best, arg = top, (i, j)
    return best, arg


@pytest.mark.parametrize("spec,nx,ny", [(skew_shift(1.0), 12, 20), (harper(1.5), 64, 1), (skew_shift(0.4), 7, 9)])
def test_grid_max_matches_brute_force(spec, nx, ny):
    N = 14
    value, width, ix, iy, _ = grid_lambda_max(spec, N, nx, ny)
    best, arg = _brute_grid(spec, N, nx, ny)
    assert value == pytest.approx(best, abs=1e-12)
    assert width <= 1e-12
    s = replace(spec, phase=PhasePoint((ix << 64) // nx, (iy << 64) // ny))
    assert np.linalg.eigvalsh(build_restriction(s, 0, N).dense())[-1] == pytest.approx(best, abs=1e-12)


def test_negative_sweep_matches_symmetry():
    spec = skew_shift(1.0)
    plus, *_ = grid_lambda_max(spec, 20, 16, 64)
    minus, *_ = grid_lambda_max(spec, 20, 16, 64, sign=-1.0)
    assert minus == pytest.approx(plus, abs=1e-12)


def test_bound_dominates_random_phases():
    # every phase of the torus, not just grid points, must respect the bound
    spec = skew_shift(1.0)
    N = 30
    sb = sigma_plus_bound(spec, N, 16, 512)
    rng = np.random.default_rng(11)
    for x, y in rng.random((300, 2)):
        s = replace(spec, phase=PhasePoint.from_reals(x, y))
        ev = np.linalg.eigvalsh(build_restriction(s, 0, N).dense())
        assert ev[-1] <= sb.grid_max + sb.slack_terms["lipschitz"] + 1e-12
        assert ev[0] >= sb.sigma_minus_lower


def test_lipschitz_slack_formula():
    assert lipschitz_slack(harper(2.0), 100, 1000, 1) == pytest.approx(4 * np.pi * 2 * 0.5 / 1000)
    assert lipschitz_slack(constant(1.0), 10, 3, 3) == 0.0


def test_sigma_rejects_unsupported_family():
    with pytest.raises(ValueError):
        sigma_plus_bound(PotentialSpec(Family.IID_RANDOM), 10)
    with pytest.raises(ValueError):
        sigma_plus_bound(harper(), 1)


def test_sign_flip_symmetry_random_instances():
    rng = np.random.default_rng(5)
    for _ in range(20):
        x, y, lam = rng.random(3)
        N = int(rng.integers(2, 60))
        spec = skew_shift(2 * lam, x, y)
        assert verify_sign_flip_symmetry(spec, N) <= 1e-12
    assert verify_sign_flip_symmetry(harper(1.3, 0.2), 50) <= 1e-12


def test_sign_flip_rejects_constant():
    with pytest.raises(ValueError):
        verify_sign_flip_symmetry(constant(1.0), 5)


def test_operator_from_diag_works_with_bound():
    op = TridiagonalOperator(np.array([0.0, 0.0]))
    xi = np.array([1.0, 1.0]) / np.sqrt(2)
    # (H - 1) xi = 0, but both entries sit on the boundary
    assert approx_eigenvector_bound(op, xi, 1.0) == pytest.approx(np.sqrt(2), abs=1e-15)


def test_nested_grids_improve_monotonically():
    # the fine grid contains the coarse one, and its maximum is at most the true supremum
    spec = skew_shift(1.0)
    N = 12
    coarse = sigma_plus_bound(spec, N, 8, 64)
    fine = sigma_plus_bound(spec, N, 16, 128)
    assert fine.grid_max >= coarse.grid_max - 1e-12
    assert fine.sigma_plus_upper <= coarse.sigma_plus_upper + fine.slack_terms["lipschitz"] + 1e-12


def test_sign_flip_full_spectrum():
    rng = np.random.default_rng(7)
    for spec in (harper(1.3), skew_shift(0.8)):
        for _ in range(5):
            x, y = rng.random(2)
            s = replace(spec, phase=PhasePoint.from_reals(x, y))
            a = np.linalg.eigvalsh(build_restriction(s, 0, 25).dense())
            b = np.linalg.eigvalsh(build_restriction(replace(s, phase=s.phase.flipped()), 0, 25).dense())
            np.testing.assert_allclose(a, -b[::-1], atol=1e-12)


def test_localized_mid_spectrum_eigenpair():
    op = build_restriction(skew_shift(1.0, 0.1, 0.2), 0, 200)
    bounds = [eigenpair_distance_bound(eigenpair(op, j)) for j in range(80, 121)]
    assert min(bounds) < 1e-3


def test_approx_bound_dominates_distance_for_larger_box():
    # xi lives on a six-site window inside a sixty-site box; the boundary weight covers the coupling
    spec = skew_shift(1.0, 0.37, 0.11)
    big = build_restriction(spec, 0, 60)
    ev = np.linalg.eigvalsh(big.dense())
    small = build_restriction(spec, 27, 6)
    rng = np.random.default_rng(0)
    for _ in range(50):
        xi = rng.normal(size=6)
        xi /= np.linalg.norm(xi)
        E = rng.uniform(-3, 3)
        assert approx_eigenvector_bound(small, xi, E) >= np.min(np.abs(ev - E)) - 1e-12
