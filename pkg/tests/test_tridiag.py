from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skewspec.potentials import constant, harper, skew_shift
from skewspec.tridiag import (
    TridiagonalOperator,
    all_eigenvalues,
    build_restriction,
    dump_eigenvalues,
    eigenpair,
    eigenpairs,
    eigenvalue_brackets,
    extreme_eigenvalues,
    spectral_data,
    sturm_count,
)


def charpoly_roots(d):
    """Roots of det(T - E) from the exact three-term recurrence."""
    # coefficient lists, lowest degree first, in exact rationals
    p_prev = [Fraction(1)]
    p = [Fraction(d[0]), Fraction(-1)]
    for di in d[1:]:
        nxt = [Fraction(0)] * (len(p) + 1)
        for k, c in enumerate(p):
            nxt[k] += Fraction(di) * c
            nxt[k + 1] -= c
        for k, c in enumerate(p_prev):
            nxt[k] -= c
        p_prev, p = p, nxt
    with mpmath.workdps(60):
        coeffs = [mpmath.mpf(c.numerator) / c.denominator for c in reversed(p)]
        roots = mpmath.polyroots(coeffs, maxsteps=200, extraprec=200)
        return np.sort([float(mpmath.re(r)) for r in roots])


@pytest.mark.parametrize("N", [1, 2, 3, 10, 100])
def test_free_laplacian_closed_form(N):
    op = build_restriction(constant(0.0), 0, N)
    k = np.arange(1, N + 1)
    want = np.sort(2 * np.cos(k * np.pi / (N + 1)))
    np.testing.assert_allclose(all_eigenvalues(op), want, atol=1e-12)


def test_free_laplacian_n3_middle_vector():
    pair = eigenpair(build_restriction(constant(0.0), 0, 3), 2)
    assert abs(pair.value) < 1e-14
    v = pair.vector * np.sign(pair.vector[0])
    np.testing.assert_allclose(v, np.array([1, 0, -1]) / np.sqrt(2), atol=1e-12)
    assert pair.boundary_weight == pytest.approx(np.sqrt(2), abs=1e-12)


def test_sturm_counts_free_laplacian():
    op = build_restriction(constant(0.0), 0, 3)
    assert sturm_count(op, 0.0) == 1
    assert sturm_count(op, 1.5) == 3
    assert sturm_count(op, -5) == 0
    # exact eigenvalue counts as not strictly below
    assert sturm_count(TridiagonalOperator(np.zeros(1)), 0.0) == 0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=8))
def test_eigenvalues_match_charpoly_roots(d):
    op = TridiagonalOperator(np.array(d))
    np.testing.assert_allclose(all_eigenvalues(op), charpoly_roots(d), atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=2, max_size=60), st.floats(-6, 6))
def test_sturm_count_matches_dense(d, E):
    op = TridiagonalOperator(np.array(d))
    ev = np.linalg.eigvalsh(op.dense())
    c = sturm_count(op, E)
    # allow ambiguity only for eigenvalues within rounding of E
    lo = int(np.sum(ev < E - 1e-12))
    hi = int(np.sum(ev < E + 1e-12))
    assert lo <= c <= hi


def test_brackets_contain_dense_eigenvalues():
    rng = np.random.default_rng(3)
    for _ in range(20):
        op = TridiagonalOperator(rng.normal(size=rng.integers(2, 80)) * 3)
        lo, hi = eigenvalue_brackets(op)
        ev = np.linalg.eigvalsh(op.dense())
        assert np.all(lo <= ev + 1e-12) and np.all(ev <= hi + 1e-12)
        assert np.max(hi - lo) < 1e-12


def _check_pairs(op, pairs):
    V = np.array([p.vector for p in pairs])
    np.testing.assert_allclose(V @ V.T, np.eye(len(pairs)), atol=1e-9)
    H = op.dense()
    for p in pairs:
        assert np.linalg.norm(H @ p.vector - p.value * p.vector) <= p.residual + 1e-12
        assert p.residual < 1e-9


@pytest.mark.parametrize("spec", [harper(1.0, 0.2), skew_shift(1.0, 0.3, 0.7), harper(3.0)], ids=str)
def test_eigenvectors_against_dense(spec):
    op = build_restriction(spec, 0, 120)
    pairs = eigenpairs(op)
    _check_pairs(op, pairs)
    w, U = np.linalg.eigh(op.dense())
    np.testing.assert_allclose([p.value for p in pairs], w, atol=1e-11)
    # compare up to sign where the eigenvalue is well separated
    gaps = np.minimum(np.diff(w, prepend=-np.inf), np.diff(w, append=np.inf))
    for p in pairs:
        if gaps[p.index] > 1e-6:
            u = U[:, p.index]
            assert min(np.linalg.norm(u - p.vector), np.linalg.norm(u + p.vector)) < 1e-7


def test_near_degenerate_cluster_stays_orthogonal():
    # two wells separated by a high barrier give pairs split by ~1e-12
    d = np.zeros(41)
    d[15:26] = 40.0
    op = TridiagonalOperator(d)
    pairs = eigenpairs(op)
    _check_pairs(op, pairs)
    w = np.linalg.eigvalsh(op.dense())
    assert np.min(np.diff(w)) < 1e-8


def test_constant_potential_vectors_are_sines():
    N = 30
    pairs = eigenpairs(build_restriction(constant(0.0), 0, N))
    n = np.arange(1, N + 1)
    for p in pairs:
        k = N - p.index  # ascending order: largest k first
        s = np.sin(n * k * np.pi / (N + 1))
        s /= np.linalg.norm(s)
        assert min(np.linalg.norm(s - p.vector), np.linalg.norm(s + p.vector)) < 1e-8


def test_extreme_eigenvalues():
    op = build_restriction(skew_shift(1.0, 0.4, 0.1), 0, 200)
    ev = np.linalg.eigvalsh(op.dense())
    lo, hi = extreme_eigenvalues(op)
    assert lo == pytest.approx(ev[0], abs=1e-12)
    assert hi == pytest.approx(ev[-1], abs=1e-12)


def test_spectral_data_consistent_with_eigenpairs():
    op = build_restriction(harper(1.0, 0.37), 0, 80)
    values, weights, slack = spectral_data(op)
    pairs = eigenpairs(op)
    np.testing.assert_allclose(values, [p.value for p in pairs], atol=1e-14)
    np.testing.assert_allclose(weights, [p.boundary_weight for p in pairs], atol=1e-8)
    assert np.all(slack < 1e-9) and np.all(slack >= 0)


def test_eigenpair_index_range():
    op = build_restriction(constant(0.0), 0, 4)
    with pytest.raises(IndexError):
        eigenpair(op, 0)
    with pytest.raises(IndexError):
        eigenpair(op, 5)


def test_operator_validation():
    with pytest.raises(ValueError):
        TridiagonalOperator(np.array([]))
    with pytest.raises(ValueError):
        TridiagonalOperator(np.array([1.0, np.nan]))
    op = TridiagonalOperator([1.0, 2.0])
    with pytest.raises(ValueError):
        op.diag[0] = 5.0


def test_matvec_matches_dense():
    rng = np.random.default_rng(0)
    op = TridiagonalOperator(rng.normal(size=17))
    x = rng.normal(size=17)
    np.testing.assert_allclose(op.matvec(x), op.dense() @ x, atol=1e-14)


def test_csv_round_trip(tmp_path):
    op = build_restriction(skew_shift(1.0, 0.1, 0.2), 5, 25)
    op.to_csv(tmp_path / "op.csv")
    back = TridiagonalOperator.from_csv(tmp_path / "op.csv")
    assert back.n0 == 5
    assert np.array_equal(back.diag, op.diag)
    dump_eigenvalues(tmp_path / "ev.csv", all_eigenvalues(op))
    rows = (tmp_path / "ev.csv").read_text().splitlines()
    assert rows[0] == "j,lambda" and len(rows) == 26
    assert float(rows[1].split(",")[1]) == all_eigenvalues(op)[0]
