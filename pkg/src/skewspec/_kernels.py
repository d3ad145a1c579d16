"""Compiled inner loops for unit-off-diagonal symmetric tridiagonal matrices."""
import math

import numpy as np
from numba import njit, prange

# |pivot| floor in the Sturm recurrence; 1/PIVMIN stays finite
PIVMIN = 2.0 ** -1000
EPS = np.finfo(np.float64).eps


@njit(cache=True)
def sturm_count(d, e):
    """Number of eigenvalues strictly below e."""
    count = 0
    q = d[0] - e
    if q == 0.0:
        q = PIVMIN
    elif abs(q) < PIVMIN:
        q = math.copysign(PIVMIN, q)
    if q < 0.0:
        count += 1
    for i in range(1, d.shape[0]):
        q = d[i] - e - 1.0 / q
        # an exact zero pivot means e is an eigenvalue of the leading block;
        # +PIVMIN evaluates the count at e - 0, i.e. strictly below
        if q == 0.0:
            q = PIVMIN
        elif abs(q) < PIVMIN:
            q = math.copysign(PIVMIN, q)
        if q < 0.0:
            count += 1
    return count


@njit(cache=True)
def gershgorin(d):
    lo = d[0]
    hi = d[0]
    for i in range(d.shape[0]):
        lo = min(lo, d[i])
        hi = max(hi, d[i])
    if d.shape[0] == 1:
        return lo, hi
    scale = max(abs(lo), abs(hi)) + 2.0
    pad = 4.0 * EPS * scale
    return lo - 2.0 - pad, hi + 2.0 + pad


@njit(cache=True)
def bisect_index(d, k, lo, hi, tol):
    """Bracket of the k-th (0-based, ascending) eigenvalue given count(lo) <= k < count(hi)."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if sturm_count(d, mid) > k:
            hi = mid
        else:
            lo = mid
    return lo, hi


@njit(cache=True)
def all_brackets(d, tol):
    """Simultaneous bisection for every eigenvalue; returns (lo, hi) arrays.

    The inner loop runs across eigenvalue indices so the divisions vectorize.
    """
    n = d.shape[0]
    glo, ghi = gershgorin(d)
    lo = np.full(n, glo)
    hi = np.full(n, ghi)
    if n == 1:
        return lo, hi
    mid = np.empty(n)
    q = np.empty(n)
    cnt = np.empty(n, dtype=np.int64)
    while True:
        width = 0.0
        for k in range(n):
            width = max(width, hi[k] - lo[k])
        if width <= tol:
            break
        moved = False
        for k in range(n):
            mid[k] = 0.5 * (lo[k] + hi[k])
            if mid[k] > lo[k] and mid[k] < hi[k] and hi[k] - lo[k] > tol:
                moved = True
            q[k] = 1.0
            cnt[k] = 0
        if not moved:
            break
        for i in range(n):
            di = d[i]
            for k in range(n):
                if i == 0:
                    qk = di - mid[k]
                else:
                    qk = di - mid[k] - 1.0 / q[k]
                if qk == 0.0:
                    qk = PIVMIN
                elif abs(qk) < PIVMIN:
                    qk = math.copysign(PIVMIN, qk)
                q[k] = qk
                cnt[k] += qk < 0.0
        for k in range(n):
            if hi[k] - lo[k] <= tol or not (lo[k] < mid[k] < hi[k]):
                continue
            if cnt[k] > k:
                hi[k] = mid[k]
            else:
                lo[k] = mid[k]
    return lo, hi


@njit(cache=True)
def extreme_brackets(d, tol):
    n = d.shape[0]
    glo, ghi = gershgorin(d)
    if n == 1:
        return glo, ghi, glo, ghi
    a, b = bisect_index(d, 0, glo, ghi, tol)
    c, e = bisect_index(d, n - 1, glo, ghi, tol)
    return a, b, c, e


@njit(cache=True)
def max_eigenvalue_above(d, threshold, tol):
    """Largest eigenvalue if it is >= threshold, else -inf (one Sturm pass screens)."""
    n = d.shape[0]
    glo, ghi = gershgorin(d)
    if threshold > ghi:
        return -np.inf, 0.0
    lo = max(glo, threshold)
    if sturm_count(d, lo) >= n:
        return -np.inf, 0.0
    a, b = bisect_index(d, n - 1, lo, ghi, tol)
    return 0.5 * (a + b), b - a


# ---------------------------------------------------------------------------
# inverse iteration


@njit(cache=True)
def _lu_factor(d, shift, floor):
    """Partial-pivoting LU of T - shift*I (unit off-diagonals), LAPACK gttrf layout."""
    n = d.shape[0]
    dd = d - shift
    dl = np.ones(max(n - 1, 0))
    du = np.ones(max(n - 1, 0))
    du2 = np.zeros(max(n - 2, 0))
    piv = np.zeros(max(n - 1, 0), dtype=np.bool_)
    for i in range(n - 1):
        if abs(dd[i]) >= abs(dl[i]):
            if dd[i] != 0.0:
                fact = dl[i] / dd[i]
                dl[i] = fact
                dd[i + 1] -= fact * du[i]
        else:
            fact = dd[i] / dl[i]
            dd[i] = dl[i]
            dl[i] = fact
            temp = du[i]
            du[i] = dd[i + 1]
            dd[i + 1] = temp - fact * dd[i + 1]
            if i < n - 2:
                du2[i] = du[i + 1]
                du[i + 1] = -fact * du[i + 1]
            piv[i] = True
    for i in range(n):
        if abs(dd[i]) < floor:
            dd[i] = floor if dd[i] >= 0.0 else -floor
    return dd, dl, du, du2, piv


@njit(cache=True)
def _lu_solve(dd, dl, du, du2, piv, b):
    n = dd.shape[0]
    for i in range(n - 1):
        if not piv[i]:
            b[i + 1] -= dl[i] * b[i]
        else:
            temp = b[i]
            b[i] = b[i + 1]
            b[i + 1] = temp - dl[i] * b[i]
    b[n - 1] /= dd[n - 1]
    if n > 1:
        b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / dd[n - 2]
    for i in range(n - 3, -1, -1):
        b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / dd[i]


@njit(cache=True)
def residual_norm(d, lam, x):
    n = d.shape[0]
    s = 0.0
    for i in range(n):
        r = (d[i] - lam) * x[i]
        if i > 0:
            r += x[i - 1]
        if i < n - 1:
            r += x[i + 1]
        s += r * r
    return math.sqrt(s)


@njit(cache=True)
def _normalize(x):
    s = 0.0
    for i in range(x.shape[0]):
        s += x[i] * x[i]
    s = math.sqrt(s)
    if s == 0.0 or not np.isfinite(s):
        return False
    for i in range(x.shape[0]):
        x[i] /= s
    return True


@njit(cache=True)
def inverse_iteration(d, lam, start, basis, nbasis, scale, res_tol, max_iter):
    """Eigenvector at shift lam, orthogonalized against basis[:nbasis].

    Returns (vector, residual, iterations); residual is +inf on stagnation.
    """
    n = d.shape[0]
    x = start.copy()
    if n == 1:
        x[0] = 1.0
        return x, abs(d[0] - lam), 0
    dd, dl, du, du2, piv = _lu_factor(d, lam, EPS * scale)
    _normalize(x)
    res = np.inf
    for it in range(1, max_iter + 1):
        _lu_solve(dd, dl, du, du2, piv, x)
        for m in range(nbasis):
            dot = 0.0
            for i in range(n):
                dot += basis[m, i] * x[i]
            for i in range(n):
                x[i] -= dot * basis[m, i]
        if not _normalize(x):
            return x, np.inf, it
        res = residual_norm(d, lam, x)
        if res <= res_tol and it >= 2:
            return x, res, it
    return x, res, max_iter


# ---------------------------------------------------------------------------
# grid sweeps


@njit(cache=True)
def _row_max(cb, sb, cx, sx, lam2, ix0, threshold, tol, diag):
    """Max of lambda_max over the points of one grid row at or above threshold."""
    n = cb.shape[0]
    best = -np.inf
    best_i = -1
    best_w = 0.0
    thr = threshold
    for i in range(ix0, cx.shape[0]):
        for k in range(n):
            diag[k] = lam2 * (cb[k] * cx[i] - sb[k] * sx[i])
        val, w = max_eigenvalue_above(diag, thr, tol)
        if val > best:
            best = val
            best_i = i
            best_w = w
            thr = val
    return best, best_i, best_w


@njit(cache=True, parallel=True)
def sweep_lambda_max(base_turns, ycoef, lam2, nx, ny, threshold, tol):
    """Per-row maxima of the largest eigenvalue over the grid (i/nx, j/ny).

    The potential at site k is lam2*cos(2*pi*(base_turns[k] + ycoef[k]*j/ny + i/nx)).
    Rows are independent, so the result does not depend on scheduling.
    """
    n = base_turns.shape[0]
    row_best = np.full(ny, -np.inf)
    row_arg = np.full(ny, -1, dtype=np.int64)
    row_w = np.zeros(ny)
    cx = np.empty(nx)
    sx = np.empty(nx)
    for i in range(nx):
        cx[i] = math.cos(2.0 * math.pi * i / nx)
        sx[i] = math.sin(2.0 * math.pi * i / nx)
    for j in prange(ny):
        cb = np.empty(n)
        sb = np.empty(n)
        diag = np.empty(n)
        for k in range(n):
            # exact reduction of ycoef*j/ny mod 1 through integers
            frac = ((ycoef[k] % ny) * j) % ny
            t = base_turns[k] + frac / ny
            cb[k] = math.cos(2.0 * math.pi * t)
            sb[k] = math.sin(2.0 * math.pi * t)
        b, bi, bw = _row_max(cb, sb, cx, sx, lam2, 0, threshold, tol, diag)
        row_best[j] = b
        row_arg[j] = bi
        row_w[j] = bw
    return row_best, row_arg, row_w


@njit(cache=True)
def interval_distance(d, a, b, tol):
    """Lower bound on the distance from [a, b] to the eigenvalues of d (0 if any lie inside)."""
    n = d.shape[0]
    glo, ghi = gershgorin(d)
    ca = sturm_count(d, a)
    cb = sturm_count(d, np.nextafter(b, np.inf))
    if cb > ca:
        return 0.0
    dist = np.inf
    if ca > 0:
        lo, hi = bisect_index(d, ca - 1, min(glo, a), a, tol)
        dist = min(dist, a - hi)
    if cb < n:
        lo, hi = bisect_index(d, cb, b, max(ghi, b), tol)
        dist = min(dist, lo - b)
    return max(dist, 0.0)


@njit(cache=True, parallel=True)
def sweep_interval_distance(base_turns, ycoef, lam2, nx, ny, a, b, tol):
    """Per-row minima over the grid (i/nx, j/ny) of interval_distance; same layout as sweep_lambda_max."""
    n = base_turns.shape[0]
    row_min = np.full(ny, np.inf)
    row_arg = np.full(ny, -1, dtype=np.int64)
    cx = np.empty(nx)
    sx = np.empty(nx)
    for i in range(nx):
        cx[i] = math.cos(2.0 * math.pi * i / nx)
        sx[i] = math.sin(2.0 * math.pi * i / nx)
    for j in prange(ny):
        cb = np.empty(n)
        sb = np.empty(n)
        diag = np.empty(n)
        for k in range(n):
            frac = ((ycoef[k] % ny) * j) % ny
            t = base_turns[k] + frac / ny
            cb[k] = math.cos(2.0 * math.pi * t)
            sb[k] = math.sin(2.0 * math.pi * t)
        for i in range(nx):
            for k in range(n):
                diag[k] = lam2 * (cb[k] * cx[i] - sb[k] * sx[i])
            dist = interval_distance(diag, a, b, tol)
            if dist < row_min[j]:
                row_min[j] = dist
                row_arg[j] = i
    return row_min, row_arg


# ---------------------------------------------------------------------------
# transfer matrices


@njit(cache=True)
def transfer_log_norm(v, energy, cap):
    """log ||prod_{j=N-1..0} [[v_j - E, -1], [1, 0]]||_F with norm-cap rescaling."""
    a, b, c, d = 1.0, 0.0, 0.0, 1.0
    log_scale = 0.0
    for j in range(v.shape[0]):
        t = v[j] - energy
        a, b, c, d = t * a - c, t * b - d, a, b
        m = max(abs(a), abs(b), abs(c), abs(d))
        if m > cap:
            s = math.sqrt(a * a + b * b + c * c + d * d)
            a /= s
            b /= s
            c /= s
            d /= s
            log_scale += math.log(s)
    return log_scale + 0.5 * math.log(a * a + b * b + c * c + d * d)


@njit(cache=True, parallel=True)
def transfer_log_norm_grid(v, energies, cap):
    """out[e, p] = transfer_log_norm(v[p], energies[e])."""
    ne = energies.shape[0]
    nph = v.shape[0]
    out = np.empty((ne, nph))
    for idx in prange(ne * nph):
        e = idx // nph
        p = idx % nph
        out[e, p] = transfer_log_norm(v[p], energies[e], cap)
    return out


@njit(cache=True)
def _start(n, attempt, j):
    # xorshift64* stream keyed by (attempt, j): deterministic start vectors
    s = np.uint64(0x9E3779B97F4A7C15) ^ (np.uint64(j + 1) * np.uint64(0xBF58476D1CE4E5B9))
    s ^= np.uint64(attempt + 1) * np.uint64(0x94D049BB133111EB)
    x = np.empty(n)
    for i in range(n):
        s ^= s >> np.uint64(12)
        s ^= s << np.uint64(25)
        s ^= s >> np.uint64(27)
        r = s * np.uint64(0x2545F4914F6CDD1D)
        x[i] = (r >> np.uint64(11)) * (2.0 ** -53) * 2.0 - 1.0
    return x


@njit(cache=True)
def eigenvectors(d, values, indices, scale, res_tol, cluster_tol, max_restarts):
    """Inverse-iteration eigenvectors for sorted 0-based ``indices``.

    Members of a cluster (neighbours closer than cluster_tol) are
    Gram-Schmidt orthogonalized against the lower members.  Returns
    (vectors, residuals, failed_index); failed_index is -1 on success.
    """
    n = d.shape[0]
    needed = np.zeros(n, dtype=np.bool_)
    for t in range(indices.shape[0]):
        k = indices[t]
        needed[k] = True
        while k > 0 and values[k] - values[k - 1] <= cluster_tol:
            k -= 1
            needed[k] = True
    pos = np.full(n, -1, dtype=np.int64)
    m = 0
    for k in range(n):
        if needed[k]:
            pos[k] = m
            m += 1
    store = np.zeros((m, n))
    resid = np.zeros(m)
    basis = np.zeros((n if n < 64 else 64, n))
    for j in range(n):
        if not needed[j]:
            continue
        nb = 0
        k = j
        while k > 0 and values[k] - values[k - 1] <= cluster_tol and nb < basis.shape[0]:
            k -= 1
            basis[nb, :] = store[pos[k]]
            nb += 1
        ok = False
        x = np.empty(n)
        res = np.inf
        for attempt in range(max_restarts + 1):
            shift = values[j]
            if attempt > 0:
                sign = 1.0 if attempt % 2 == 1 else -1.0
                shift = values[j] + sign * 1e-11 * scale * attempt
            x, res, _ = inverse_iteration(d, shift, _start(n, attempt, j), basis, nb, scale, res_tol, 4)
            res = residual_norm(d, values[j], x)
            if res <= res_tol:
                ok = True
                break
        if not ok:
            return store, resid, j
        store[pos[j], :] = x
        resid[pos[j]] = res
    out = np.empty((indices.shape[0], n))
    out_res = np.empty(indices.shape[0])
    for t in range(indices.shape[0]):
        out[t, :] = store[pos[indices[t]]]
        out_res[t] = resid[pos[indices[t]]]
    return out, out_res, -1


@njit(cache=True)
def spectral_data(d, tol, res_tol, cluster_tol, max_restarts):
    """(values, boundary weights, bracket + residual, failed_index) for every eigenpair."""
    n = d.shape[0]
    lo, hi = all_brackets(d, tol)
    values = 0.5 * (lo + hi)
    scale = 0.0
    for i in range(n):
        scale = max(scale, abs(d[i]))
    scale += 2.0
    idx = np.arange(n)
    vecs, res, failed = eigenvectors(d, values, idx, scale, res_tol, cluster_tol, max_restarts)
    weights = np.empty(n)
    slack = np.empty(n)
    if failed >= 0:
        return values, weights, slack, failed
    for k in range(n):
        weights[k] = abs(vecs[k, 0]) + abs(vecs[k, n - 1])
        slack[k] = (hi[k] - lo[k]) + res[k]
    return values, weights, slack, -1
