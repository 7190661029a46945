"""Compiled inner loops for the Gibbs samplers.

Counts live in dense ``(k**q, k)`` arrays indexed by the base-k code of
the context; the alphabets handled here are small (|Z| <= ~32, q <= 3).
Scalars that the sweep mutates are passed in a length-2 array
``acc = [N * H_q, residual]``.
"""

import numpy as np
from numba import njit

_OPTS = dict(cache=True, nogil=True)


@njit(**_OPTS)
def xlog2x_table(n):
    t = np.zeros(n + 2)
    for k in range(2, n + 2):
        t[k] = k * np.log2(k)
    return t


@njit(**_OPTS)
def context_code(u, i, q, k):
    code = 0
    mult = 1
    for j in range(1, q + 1):
        code += u[i - j] * mult
        mult *= k
    return code


@njit(**_OPTS)
def dense_counts(u, q, k):
    rows = k**q
    counts = np.zeros((rows, k), np.int64)
    tot = np.zeros(rows, np.int64)
    for i in range(q, u.size):
        c = context_code(u, i, q, k)
        counts[c, u[i]] += 1
        tot[c] += 1
    return counts, tot


@njit(**_OPTS)
def nh_from_counts(counts, tot, xlx):
    s = 0.0
    for c in range(counts.shape[0]):
        if tot[c] > 0:
            s += xlx[tot[c]]
            for b in range(counts.shape[1]):
                s -= xlx[counts[c, b]]
    return s


@njit(**_OPTS)
def _remove_site(u, p, q, k, counts, tot, xlx):
    d = 0.0
    hi = min(p + q, u.size - 1)
    for i in range(max(p, q), hi + 1):
        c = context_code(u, i, q, k)
        b = u[i]
        s = tot[c]
        n = counts[c, b]
        d += (xlx[s - 1] - xlx[s]) - (xlx[n - 1] - xlx[n])
        tot[c] = s - 1
        counts[c, b] = n - 1
    return d


@njit(**_OPTS)
def _add_site(u, p, q, k, counts, tot, xlx):
    d = 0.0
    hi = min(p + q, u.size - 1)
    for i in range(max(p, q), hi + 1):
        c = context_code(u, i, q, k)
        b = u[i]
        s = tot[c]
        n = counts[c, b]
        d += (xlx[s + 1] - xlx[s]) - (xlx[n + 1] - xlx[n])
        tot[c] = s + 1
        counts[c, b] = n + 1
    return d


@njit(**_OPTS)
def entropy_deltas(u, p, q, k, counts, tot, xlx, out):
    """out[b] = change of N*H_q if u[p] became b.  Counts are left intact."""
    a = u[p]
    d_rm = _remove_site(u, p, q, k, counts, tot, xlx)
    for b in range(k):
        if b == a:
            out[b] = 0.0
            continue
        u[p] = b
        out[b] = d_rm + _add_site(u, p, q, k, counts, tot, xlx)
        _remove_site(u, p, q, k, counts, tot, xlx)
    u[p] = a
    _add_site(u, p, q, k, counts, tot, xlx)


@njit(**_OPTS)
def _commit_symbol(u, p, b, q, k, counts, tot, xlx):
    _remove_site(u, p, q, k, counts, tot, xlx)
    u[p] = b
    _add_site(u, p, q, k, counts, tot, xlx)


@njit(**_OPTS)
def draw(de, s, uniform, w):
    """Inverse-CDF draw from exp(-s * de); s = inf picks the first minimiser."""
    k = de.size
    best = 0
    for b in range(1, k):
        if de[b] < de[best]:
            best = b
    if s == np.inf:
        return best
    total = 0.0
    for b in range(k):
        if de[b] == np.inf:
            w[b] = 0.0
        else:
            w[b] = np.exp(-s * (de[b] - de[best]))
        total += w[b]
    target = uniform * total
    acc = 0.0
    for b in range(k):
        acc += w[b]
        if target < acc:
            return b
    last = k - 1
    while w[last] == 0.0:
        last -= 1
    return last


@njit(**_OPTS)
def _chol_solve(a, rhs, n, out):
    """Solve a[:n,:n] x = rhs[:n] in place via Cholesky; False if not SPD."""
    for j in range(n):
        d = a[j, j]
        for t in range(j):
            d -= a[j, t] * a[j, t]
        if not d > 0.0:
            return False
        d = np.sqrt(d)
        a[j, j] = d
        for i in range(j + 1, n):
            v = a[i, j]
            for t in range(j):
                v -= a[i, t] * a[j, t]
            a[i, j] = v / d
    for i in range(n):
        v = rhs[i]
        for t in range(i):
            v -= a[i, t] * out[t]
        out[i] = v / a[i, i]
    for i in range(n - 1, -1, -1):
        v = out[i]
        for t in range(i + 1, n):
            v -= a[t, i] * out[t]
        out[i] = v / a[i, i]
    return True


@njit(**_OPTS)
def solve_levels(omega, theta, pop, levels_prev, ridge_rel, yy, out, work, idx, rhs, sol,
                 hold=-1):
    """Least-squares levels for populated symbols; returns the Gram-form residual.

    Empty symbols keep ``levels_prev``; so does symbol ``hold`` (if >= 0),
    which still counts towards the residual.  Returns inf when the system
    is not positive definite.
    """
    k = omega.shape[0]
    tr = 0.0
    for b in range(k):
        tr += omega[b, b]
    ridge = ridge_rel * tr / k
    na = 0
    for b in range(k):
        out[b] = levels_prev[b]
        if pop[b] > 0 and b != hold:
            idx[na] = b
            na += 1
    held = hold >= 0 and pop[hold] > 0
    for i in range(na):
        rhs[i] = theta[idx[i]]
        if held:
            rhs[i] -= omega[idx[i], hold] * out[hold]
        for j in range(na):
            work[i, j] = omega[idx[i], idx[j]]
        work[i, i] += ridge
    if na > 0 and not _chol_solve(work, rhs, na, sol):
        return np.inf
    for i in range(na):
        out[idx[i]] = sol[i]
    if held:
        idx[na] = hold
        na += 1
    r = yy
    for i in range(na):
        bi = idx[i]
        r -= 2.0 * out[bi] * theta[bi]
        for j in range(na):
            r += out[bi] * omega[bi, idx[j]] * out[idx[j]]
    return r


@njit(**_OPTS)
def _lmcmc_site(p, s, uniform, u, phit, col_sq, phity, yy, c4, q, k, counts, tot, xlx,
                mut, omega, theta, levels, pop, ridge_rel, acc, scratch_k, de, cand, cres,
                om2, th2, pop2, work, idx, rhs, sol, w, hold_empty):
    a = u[p]
    m = phit.shape[1]
    g = scratch_k
    for b in range(k):
        v = 0.0
        for j in range(m):
            v += mut[b, j] * phit[p, j]
        g[b] = v
    pn = col_sq[p]
    ty = phity[p]
    entropy_deltas(u, p, q, k, counts, tot, xlx, de)
    resid = acc[1]
    for b in range(k):
        if b == a:
            for t in range(k):
                cand[b, t] = levels[t]
            cres[b] = resid
            continue
        for i in range(k):
            th2[i] = theta[i]
            pop2[i] = pop[i]
            for j in range(k):
                om2[i, j] = omega[i, j]
        for j in range(k):
            om2[b, j] += g[j]
            om2[a, j] -= g[j]
        for i in range(k):
            om2[i, b] += g[i]
            om2[i, a] -= g[i]
        om2[b, b] += pn
        om2[a, a] += pn
        om2[a, b] -= pn
        om2[b, a] -= pn
        th2[b] += ty
        th2[a] -= ty
        pop2[a] -= 1
        pop2[b] += 1
        # an empty level is scored at its held value; it is refit once populated
        hold = b if (hold_empty and pop[b] == 0) else -1
        r = solve_levels(om2, th2, pop2, levels, ridge_rel, yy, cand[b], work, idx, rhs, sol, hold)
        cres[b] = r
        if r == np.inf:
            de[b] = np.inf
        else:
            de[b] = de[b] + c4 * (r - resid)
    b = draw(de, s, uniform, w)
    if b != a:
        _commit_symbol(u, p, b, q, k, counts, tot, xlx)
        acc[0] += de[b] - c4 * (cres[b] - resid)
        for j in range(m):
            mut[a, j] -= phit[p, j]
            mut[b, j] += phit[p, j]
        for j in range(k):
            omega[b, j] += g[j]
            omega[a, j] -= g[j]
        for i in range(k):
            omega[i, b] += g[i]
            omega[i, a] -= g[i]
        omega[b, b] += pn
        omega[a, a] += pn
        omega[a, b] -= pn
        omega[b, a] -= pn
        theta[b] += ty
        theta[a] -= ty
        pop[a] -= 1
        pop[b] += 1
        for t in range(k):
            levels[t] = cand[b, t]
        acc[1] = cres[b]
    return b


@njit(**_OPTS)
def lmcmc_sweep(order, uniforms, s, u, phit, col_sq, phity, yy, c4, q, counts, tot, xlx,
                mut, omega, theta, levels, pop, ridge_rel, acc, hold_empty=True):
    """One super-iteration of the level-adaptive sampler over ``order``."""
    k = levels.size
    scratch_k = np.empty(k)
    de = np.empty(k)
    cand = np.empty((k, k))
    cres = np.empty(k)
    om2 = np.empty((k, k))
    th2 = np.empty(k)
    pop2 = np.empty(k, np.int64)
    work = np.empty((k, k))
    idx = np.empty(k, np.int64)
    rhs = np.empty(k)
    sol = np.empty(k)
    w = np.empty(k)
    for t in range(order.size):
        _lmcmc_site(order[t], s, uniforms[t], u, phit, col_sq, phity, yy, c4, q, k, counts, tot,
                    xlx, mut, omega, theta, levels, pop, ridge_rel, acc, scratch_k, de, cand,
                    cres, om2, th2, pop2, work, idx, rhs, sol, w, hold_empty)


@njit(**_OPTS)
def site_energies(p, u, phit, col_sq, phity, yy, c4, q, counts, tot, xlx, mut, omega, theta,
                  levels, pop, ridge_rel, resid, de, cand, cres, hold_empty=True):
    """Energy change of every candidate symbol at entry ``p`` without moving it."""
    k = levels.size
    a = u[p]
    m = phit.shape[1]
    g = np.empty(k)
    for b in range(k):
        v = 0.0
        for j in range(m):
            v += mut[b, j] * phit[p, j]
        g[b] = v
    entropy_deltas(u, p, q, k, counts, tot, xlx, de)
    om2 = np.empty((k, k))
    th2 = np.empty(k)
    pop2 = np.empty(k, np.int64)
    work = np.empty((k, k))
    idx = np.empty(k, np.int64)
    rhs = np.empty(k)
    sol = np.empty(k)
    for b in range(k):
        if b == a:
            for t in range(k):
                cand[b, t] = levels[t]
            cres[b] = resid
            continue
        for i in range(k):
            th2[i] = theta[i]
            pop2[i] = pop[i]
            for j in range(k):
                om2[i, j] = omega[i, j]
        for j in range(k):
            om2[b, j] += g[j]
            om2[a, j] -= g[j]
        for i in range(k):
            om2[i, b] += g[i]
            om2[i, a] -= g[i]
        om2[b, b] += col_sq[p]
        om2[a, a] += col_sq[p]
        om2[a, b] -= col_sq[p]
        om2[b, a] -= col_sq[p]
        th2[b] += phity[p]
        th2[a] -= phity[p]
        pop2[a] -= 1
        pop2[b] += 1
        # an empty level is scored at its held value; it is refit once populated
        hold = b if (hold_empty and pop[b] == 0) else -1
        r = solve_levels(om2, th2, pop2, levels, ridge_rel, yy, cand[b], work, idx, rhs, sol, hold)
        cres[b] = r
        de[b] = np.inf if r == np.inf else de[b] + c4 * (r - resid)


@njit(**_OPTS)
def bmcmc_sweep(order, uniforms, s, w, levels, phit, col_sq, r, c4, q, counts, tot, xlx, acc):
    """One super-iteration of the fixed-alphabet sampler.  ``r`` is y - phi @ levels[w]."""
    k = levels.size
    m = phit.shape[1]
    de = np.empty(k)
    wk = np.empty(k)
    for t in range(order.size):
        p = order[t]
        a = w[p]
        g = 0.0
        for j in range(m):
            g += phit[p, j] * r[j]
        entropy_deltas(w, p, q, k, counts, tot, xlx, de)
        for b in range(k):
            if b != a:
                d = levels[b] - levels[a]
                de[b] += c4 * (d * d * col_sq[p] - 2.0 * d * g)
        b = draw(de, s, uniforms[t], wk)
        if b != a:
            d = levels[b] - levels[a]
            acc[0] += de[b] - c4 * (d * d * col_sq[p] - 2.0 * d * g)
            acc[1] += d * d * col_sq[p] - 2.0 * d * g
            _commit_symbol(w, p, b, q, k, counts, tot, xlx)
            for j in range(m):
                r[j] -= d * phit[p, j]
