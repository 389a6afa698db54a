"""Compiled inner loops for the hybrid-norm coder.

Kept free of Python objects so numba can compile them in nopython mode;
the public wrappers live in :mod:`dlroc.coding`.

Objective: ``alpha*||y - Dx||^2 + (1-alpha)*||y - Dx||_1 + gamma*||x||_1``.
"""

import numpy as np
from numba import njit

_ZERO_RESIDUAL = 1e-10
_MAX_SET_CHANGES = 64


@njit(cache=True)
def pq_argmin(quad, lin, b, w, n):
    """Exact minimiser of ``quad*t^2 + lin*t + sum_k w_k |t - b_k|`` (first ``n`` terms).

    ``quad >= 0`` and ``w >= 0``. The derivative is non-decreasing and
    piecewise linear with jumps ``2 w_k`` at ``b_k``; it is scanned over the
    sorted breakpoints. Returns the leftmost minimiser when the minimum is flat.
    """
    order = np.argsort(b[:n], kind="mergesort")
    W = 0.0
    for k in range(n):
        W += w[k]
    q = 2.0 * quad
    C = 0.0
    for t in range(n):
        p = order[t]
        bp = b[p]
        left = q * bp + lin + 2.0 * C - W
        if left > 0.0:
            if q > 0.0:
                return -(lin + 2.0 * C - W) / q
            return bp
        C += w[p]
        if q * bp + lin + 2.0 * C - W >= 0.0:
            return bp
    if q > 0.0:
        return -(lin + W) / q
    return b[order[n - 1]] if n > 0 else 0.0


@njit(cache=True)
def scalar_argmin(r, a, alpha, gamma):
    """Exact minimiser over s of
    ``alpha*||r - s a||^2 + (1-alpha)*||r - s a||_1 + gamma*|s|``.

    Breakpoints sit at ``s = r_i / a_i`` (weight ``(1-alpha)|a_i|``) and at
    ``s = 0`` (weight ``gamma``).
    """
    m = r.shape[0]
    A = 0.0
    ar = 0.0
    b = np.empty(m + 1)
    w = np.empty(m + 1)
    n = 0
    beta = 1.0 - alpha
    for i in range(m):
        A += a[i] * a[i]
        ar += a[i] * r[i]
        if a[i] != 0.0:
            b[n] = r[i] / a[i]
            w[n] = beta * abs(a[i])
            n += 1
    b[n] = 0.0
    w[n] = gamma
    n += 1
    return pq_argmin(alpha * A, -2.0 * alpha * ar, b, w, n)


@njit(cache=True)
def line_argmin(r, v, x, delta, alpha, gamma):
    """Exact minimiser over t of the objective at ``x + t*delta``.

    ``r`` is the residual at ``x`` and ``v = D @ delta``.
    """
    m = r.shape[0]
    L = x.shape[0]
    b = np.empty(m + L)
    w = np.empty(m + L)
    n = 0
    vv = 0.0
    vr = 0.0
    beta = 1.0 - alpha
    for i in range(m):
        vv += v[i] * v[i]
        vr += v[i] * r[i]
        if v[i] != 0.0 and beta > 0.0:
            b[n] = r[i] / v[i]
            w[n] = beta * abs(v[i])
            n += 1
    for j in range(L):
        if delta[j] != 0.0 and gamma > 0.0:
            b[n] = -x[j] / delta[j]
            w[n] = gamma * abs(delta[j])
            n += 1
    return pq_argmin(alpha * vv, -2.0 * alpha * vr, b, w, n)


@njit(cache=True)
def _zero_is_optimal(r, a, alpha, gamma):
    # subdifferential test at s = 0, O(m) and sort-free
    ar = 0.0
    signed = 0.0
    flat = 0.0
    for i in range(r.shape[0]):
        ar += a[i] * r[i]
        if r[i] > 0.0:
            signed += a[i]
        elif r[i] < 0.0:
            signed -= a[i]
        else:
            flat += abs(a[i])
    beta = 1.0 - alpha
    base = -2.0 * alpha * ar - beta * signed
    return base + beta * flat + gamma >= 0.0 and base - beta * flat - gamma <= 0.0


@njit(cache=True)
def residual(y, D, x):
    m, L = D.shape
    r = y.copy()
    for j in range(L):
        xj = x[j]
        if xj != 0.0:
            for i in range(m):
                r[i] -= D[i, j] * xj
    return r


@njit(cache=True)
def objective(r, x, alpha, gamma):
    """Return ``(objective, ||r||_2)``."""
    sq = 0.0
    ab = 0.0
    for i in range(r.shape[0]):
        sq += r[i] * r[i]
        ab += abs(r[i])
    l1 = 0.0
    for j in range(x.shape[0]):
        l1 += abs(x[j])
    return alpha * sq + (1.0 - alpha) * ab + gamma * l1, np.sqrt(sq)


@njit(cache=True)
def _sweep(y, D, x, alpha, gamma):
    m, L = D.shape
    r = residual(y, D, x)
    for j in range(L):
        a = D[:, j]
        xj = x[j]
        if xj != 0.0:
            for i in range(m):
                r[i] += xj * a[i]
        elif _zero_is_optimal(r, a, alpha, gamma):
            continue
        s = scalar_argmin(r, a, alpha, gamma)
        if s != 0.0:
            for i in range(m):
                r[i] -= s * a[i]
        x[j] = s


@njit(cache=True)
def _restricted_direction(D, r, alpha, gamma, S, nS, Z, nZ, sig_r, sig_x):
    """Regularised Newton direction for the objective restricted to the
    support ``S`` with the residuals in ``Z`` held at zero and all other
    signs frozen.

    Solves ``(H + rho I) d + grad + A^T mu = 0, A d = 0`` with
    ``A = D[Z, S]``. The small ``rho`` keeps the system solvable where the
    restricted objective is linear; the exact line search that follows makes
    the step length irrelevant. Returns ``(d_S, mu)``.
    """
    m = D.shape[0]
    beta = 1.0 - alpha
    rho = 1e-9 * (1.0 + 2.0 * alpha)
    size = nS + nZ
    K = np.zeros((size, size))
    rhs = np.zeros(size)
    for p in range(nS):
        jp = S[p]
        g = gamma * sig_x[jp]
        for i in range(m):
            g -= 2.0 * alpha * D[i, jp] * r[i] + beta * sig_r[i] * D[i, jp]
        rhs[p] = -g
        for q in range(p, nS):
            jq = S[q]
            h = 0.0
            for i in range(m):
                h += D[i, jp] * D[i, jq]
            K[p, q] = 2.0 * alpha * h
            K[q, p] = K[p, q]
        K[p, p] += rho
        for c in range(nZ):
            K[p, nS + c] = D[Z[c], jp]
            K[nS + c, p] = D[Z[c], jp]
    # LU is much cheaper than an SVD; fall back when K is (near) singular.
    ok = True
    sol = np.zeros(size)
    try:
        sol = np.linalg.solve(K, rhs)
    except Exception:
        ok = False
    if ok:
        kn = 0.0
        for p in range(size):
            for q in range(size):
                kn = max(kn, abs(K[p, q]))
        err = 0.0
        bn = 0.0
        for p in range(size):
            acc = -rhs[p]
            for q in range(size):
                acc += K[p, q] * sol[q]
            err = max(err, abs(acc))
            bn = max(bn, abs(rhs[p]))
        xn = 0.0
        for p in range(size):
            xn = max(xn, abs(sol[p]))
        ok = np.isfinite(err) and err <= 1e-9 * (bn + kn * xn)
    if not ok:
        sol = np.linalg.lstsq(K, rhs, rcond=1e-13)[0]
    return sol[:nS], sol[nS:]


@njit(cache=True)
def _active_set_step(y, D, x, alpha, gamma, obj):
    """Escape a coordinate-descent stall.

    Single-coordinate moves cannot leave an intersection of kinks of the
    l1 loss, so a direction is computed on the current piece (support,
    zero residuals, frozen signs) and followed by an exact line search.
    When the point is already stationary on its piece, the support or the
    zero-residual set is changed along the largest multiplier violation.
    Returns the new objective; ``obj`` is returned unchanged when no descent
    direction exists, i.e. ``x`` is optimal up to tolerance.
    """
    m, L = D.shape
    beta = 1.0 - alpha
    scale = 1.0
    for i in range(m):
        scale = max(scale, abs(y[i]))
    S = np.empty(L, dtype=np.int64)
    Z = np.empty(m, dtype=np.int64)
    sig_x = np.zeros(L)
    sig_r = np.zeros(m)
    delta = np.zeros(L)
    v = np.zeros(m)
    r = residual(y, D, x)
    nS = 0
    nZ = 0
    stale = True
    for it in range(4 * (m + L) + 16):
        if stale:
            r = residual(y, D, x)
            xmax = 0.0
            for j in range(L):
                xmax = max(xmax, abs(x[j]))
            nS = 0
            nZ = 0
            for j in range(L):
                sig_x[j] = 0.0
                if abs(x[j]) > _ZERO_RESIDUAL * 1e-4 * max(1.0, xmax):
                    S[nS] = j
                    nS += 1
                    sig_x[j] = 1.0 if x[j] > 0.0 else -1.0
            for i in range(m):
                sig_r[i] = 0.0
                if abs(r[i]) <= _ZERO_RESIDUAL * scale and beta > 0.0:
                    Z[nZ] = i
                    nZ += 1
                else:
                    sig_r[i] = 1.0 if r[i] > 0.0 else -1.0
            stale = False
        d, mu = _restricted_direction(D, r, alpha, gamma, S, nS, Z, nZ, sig_r, sig_x)
        big = 0.0
        xmax = 0.0
        for p in range(nS):
            big = max(big, abs(d[p]))
            xmax = max(xmax, abs(x[S[p]]))
        if big > 1e-12 * (1.0 + xmax):
            for j in range(L):
                delta[j] = 0.0
            for i in range(m):
                v[i] = 0.0
            for p in range(nS):
                delta[S[p]] = d[p]
                for i in range(m):
                    v[i] += D[i, S[p]] * d[p]
            t = line_argmin(r, v, x, delta, alpha, gamma)
            if t != 0.0:
                xn = x + t * delta
                rn = residual(y, D, xn)
                on, _ = objective(rn, xn, alpha, gamma)
                if on <= obj:
                    x[:] = xn
                    obj = on
                    stale = True
                    continue
        # stationary on this piece: release the worst violated constraint
        worst = 1e-10 * max(1.0, abs(obj))
        kind = -1
        idx = -1
        sign = 0.0
        for c in range(nZ):
            viol = abs(mu[c]) - beta
            if viol > worst:
                worst, kind, idx = viol, 0, c
                sign = -1.0 if mu[c] > 0.0 else 1.0
        for j in range(L):
            if sig_x[j] != 0.0:
                continue
            g = 0.0
            for i in range(m):
                g -= 2.0 * alpha * D[i, j] * r[i] + beta * sig_r[i] * D[i, j]
            for c in range(nZ):
                g += D[Z[c], j] * mu[c]
            viol = abs(g) - gamma
            if viol > worst:
                worst, kind, idx = viol, 1, j
                sign = -1.0 if g > 0.0 else 1.0
        if kind < 0:
            break
        if kind == 0:
            sig_r[Z[idx]] = sign
            Z[idx] = Z[nZ - 1]
            nZ -= 1
        else:
            S[nS] = idx
            nS += 1
            sig_x[idx] = sign
    return obj


@njit(cache=True)
def _pattern(r, x, zero_tol, out):
    """Write the signs of ``x`` then of ``r`` into ``out``; report whether
    they differ from what was there before."""
    changed = False
    L = x.shape[0]
    for j in range(L):
        s = 0
        if x[j] > 0.0:
            s = 1
        elif x[j] < 0.0:
            s = -1
        if out[j] != s:
            out[j] = s
            changed = True
    for i in range(r.shape[0]):
        s = 0
        if r[i] > zero_tol:
            s = 1
        elif r[i] < -zero_tol:
            s = -1
        if out[L + i] != s:
            out[L + i] = s
            changed = True
    return changed


@njit(cache=True)
def cd_hybrid(y, D, alpha, gamma, x, residual_threshold, max_sweeps, rel_tol, trace):
    """Cyclic coordinate descent in place on ``x``.

    Once a sweep stalls, or leaves the signs of ``x`` and of the residual
    unchanged (the piece of the objective is identified), an active-set
    step finishes the job on that piece.

    ``trace[0]`` receives the starting objective and ``trace[s]`` the
    objective after sweep ``s``. Returns ``(sweeps, objective, residual_norm)``.
    """
    m, L = D.shape
    r = residual(y, D, x)
    obj, rnorm = objective(r, x, alpha, gamma)
    trace[0] = obj
    sweeps = 0
    if rnorm <= residual_threshold:
        return sweeps, obj, rnorm
    scale = 1.0
    for i in range(m):
        scale = max(scale, abs(y[i]))
    pattern = np.full(L + m, 2, dtype=np.int8)
    _pattern(r, x, _ZERO_RESIDUAL * scale, pattern)
    while sweeps < max_sweeps:
        _sweep(y, D, x, alpha, gamma)
        r = residual(y, D, x)
        new_obj, rnorm = objective(r, x, alpha, gamma)
        sweeps += 1
        trace[sweeps] = new_obj
        decrease = obj - new_obj
        obj = new_obj
        if rnorm <= residual_threshold:
            break
        stalled = decrease <= rel_tol * max(abs(obj + decrease), 1e-300)
        settled = not _pattern(r, x, _ZERO_RESIDUAL * scale, pattern)
        if stalled or settled:
            if stalled and sweeps >= max_sweeps:
                break
            escaped = _active_set_step(y, D, x, alpha, gamma, obj)
            if obj - escaped <= rel_tol * max(abs(obj), 1e-300):
                if stalled:
                    break
            else:
                r = residual(y, D, x)
                _pattern(r, x, _ZERO_RESIDUAL * scale, pattern)
                obj, rnorm = objective(r, x, alpha, gamma)
                if rnorm <= residual_threshold:
                    trace[sweeps] = obj
                    break
            obj = min(obj, escaped)
    return sweeps, obj, rnorm


@njit(cache=True)
def cd_hybrid_batch(Y, D, alpha, gamma, X, residual_threshold, max_sweeps, rel_tol):
    """Run :func:`cd_hybrid` on every column of ``Y``; ``X`` is updated in place."""
    n = Y.shape[1]
    sweeps = np.zeros(n, dtype=np.int64)
    objective_ = np.zeros(n)
    rnorm = np.zeros(n)
    trace = np.empty(max_sweeps + 1)
    for k in range(n):
        x = X[:, k].copy()
        s, o, rn = cd_hybrid(
            Y[:, k].copy(), D, alpha, gamma, x, residual_threshold, max_sweeps, rel_tol, trace
        )
        X[:, k] = x
        sweeps[k] = s
        objective_[k] = o
        rnorm[k] = rn
    return sweeps, objective_, rnorm


@njit(cache=True)
def l1_row_tables(R, x_row):
    """Per-row tables for evaluating ``sum_j |R[i, j] - v * x_row[j]|`` at any v.

    Row ``i`` is ``sum_k w_k |v - b_ik| + c_i`` with breakpoints
    ``b_ik = R[i, k] / x_k`` and weights ``w_k = |x_k|`` over the nonzero
    entries of ``x_row``. Breakpoints are returned sorted per row together
    with prefix sums of ``w`` and ``w*b``.
    """
    m, n = R.shape
    nz = 0
    for k in range(n):
        if x_row[k] != 0.0:
            nz += 1
    B = np.empty((m, nz))
    CW = np.zeros((m, nz + 1))
    CWB = np.zeros((m, nz + 1))
    const = np.zeros(m)
    wk = np.empty(nz)
    for i in range(m):
        c = 0
        vals = np.empty(nz)
        for k in range(n):
            if x_row[k] != 0.0:
                vals[c] = R[i, k] / x_row[k]
                wk[c] = abs(x_row[k])
                c += 1
            else:
                const[i] += abs(R[i, k])
        order = np.argsort(vals, kind="mergesort")
        for c in range(nz):
            p = order[c]
            B[i, c] = vals[p]
            CW[i, c + 1] = CW[i, c] + wk[p]
            CWB[i, c + 1] = CWB[i, c] + wk[p] * vals[p]
    return B, CW, CWB, const


@njit(cache=True)
def l1_rows_eval(B, CW, CWB, const, V):
    """Evaluate ``sum_i h_i(V[c, i])`` for every candidate row of ``V``."""
    ncand, m = V.shape
    nz = B.shape[1]
    out = np.zeros(ncand)
    for c in range(ncand):
        total = 0.0
        for i in range(m):
            v = V[c, i]
            lo = 0
            hi = nz
            while lo < hi:
                mid = (lo + hi) // 2
                if B[i, mid] <= v:
                    lo = mid + 1
                else:
                    hi = mid
            wl = CW[i, lo]
            wbl = CWB[i, lo]
            total += v * wl - wbl + (CWB[i, nz] - wbl) - v * (CW[i, nz] - wl) + const[i]
        out[c] = total
    return out
