"""Compiled inner loops.

Every kernel works on coefficient arrays in the ``a[n] = a_n`` layout of
:meth:`CoefficientSequence.arrays` (index 0 unused) unless stated.
"""

import numpy as np
from numba import njit

PIVMIN = 1e-290


@njit(cache=True)
def envelope_sweep(a, b, x, checkpoints, cap):
    """Run the three-term recurrence and the S/T envelopes over a grid.

    Returns ``out`` of shape ``(4, len(checkpoints), len(x))`` holding
    ``P_n, P_{n-1}, S_n, T_n`` at each checkpoint ``n``, and ``blown``,
    the first index where ``|P_n| > cap`` for each x (-1 if never).
    ``a`` and ``b`` must extend to index ``max(checkpoints) + 2``.
    """
    m = x.size
    k = checkpoints.size
    out = np.full((4, k, m), np.nan)
    blown = np.full(m, -1, dtype=np.int64)
    n_max = checkpoints[k - 1] if k > 0 else 0
    for i in range(m):
        xi = x[i]
        p_prev = 0.0
        p = 1.0
        s = a[1] * a[1]
        c = 0
        while c < k and checkpoints[c] == 0:
            out[0, c, i] = p
            out[1, c, i] = p_prev
            out[2, c, i] = s
            out[3, c, i] = s + 0.5 * a[1] * abs(b[2] - b[1]) * p * p
            c += 1
        for n in range(1, n_max + 1):
            p_new = ((xi - b[n]) * p - a[n - 1] * p_prev) / a[n]
            p_prev = p
            p = p_new
            if abs(p) > cap:
                blown[i] = n
                break
            s += (a[n + 1] * a[n + 1] - a[n] * a[n]) * p * p + a[n] * (b[n + 1] - b[n]) * p * p_prev
            while c < k and checkpoints[c] == n:
                out[0, c, i] = p
                out[1, c, i] = p_prev
                out[2, c, i] = s
                out[3, c, i] = s + 0.5 * a[n + 1] * abs(b[n + 2] - b[n + 1]) * p * p
                c += 1
    return out, blown


@njit(cache=True)
def continued_fraction(a, b, z, seed, depth, n_levels):
    """Backward continued fraction for the m-function.

    ``m^(depth) = seed`` and ``m^(k-1) = 1/(b_k - z - a_k^2 m^(k))``.
    Returns ``levels`` of shape ``(n_levels, len(z))`` with ``levels[s] =
    m^(s)`` and a per-point flag set when a denominator vanished.
    """
    m_pts = z.size
    levels = np.empty((n_levels, m_pts), dtype=np.complex128)
    hit_zero = np.zeros(m_pts, dtype=np.bool_)
    for i in range(m_pts):
        m = seed[i]
        zi = z[i]
        for k in range(depth, 0, -1):
            den = b[k] - zi - a[k] * a[k] * m
            if den == 0:
                hit_zero[i] = True
                den = 1e-300
            m = 1.0 / den
            if k - 1 < n_levels:
                levels[k - 1, i] = m
    return levels, hit_zero


@njit(cache=True)
def free_m(lam):
    # <delta_0, (J_0 - lam)^-1 delta_0> for real |lam| >= 2, equal to -1/beta(lam)
    r = np.sqrt(lam * lam - 4.0)
    if lam > 0:
        return 0.5 * (-lam + r)
    return 0.5 * (-lam - r)


@njit(cache=True)
def pivot_counts(diag, off2, tail_c2, lam):
    """Inertia of ``T - lam`` via the LDL^T pivot recursion.

    ``diag`` has length N, ``off2`` length N-1 (squared off-diagonals).
    With ``tail_c2 > 0`` the last pivot includes the Schur complement of a
    free half-line attached with coupling ``sqrt(tail_c2)``; valid only
    for ``|lam| >= 2``.  Returns ``(negative, positive)`` pivot counts.
    """
    n = diag.size
    neg = 0
    d = 1.0
    for k in range(n):
        dk = diag[k] - lam
        if k > 0:
            dk -= off2[k - 1] / d
        if k == n - 1 and tail_c2 != 0.0:
            dk -= tail_c2 * free_m(lam)
        if abs(dk) < PIVMIN:
            dk = -PIVMIN
        if dk < 0:
            neg += 1
        d = dk
    return neg, n - neg


@njit(cache=True)
def bisect_eigenvalue(diag, off2, tail_c2, j, from_top, lo, hi, tol, maxit):
    """j-th eigenvalue from the top (or bottom) inside ``(lo, hi)``.

    Requires the bracket to contain it: for ``from_top``, at least j
    eigenvalues above ``lo`` and fewer than j above ``hi``.  ``tol = 0``
    bisects to adjacent floating point numbers.  Returns ``(value, it)``;
    ``it == maxit`` means no convergence.
    """
    it = 0
    while it < maxit:
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        neg, pos = pivot_counts(diag, off2, tail_c2, mid)
        if from_top:
            if pos >= j:
                lo = mid
            else:
                hi = mid
        else:
            if neg >= j:
                hi = mid
            else:
                lo = mid
        it += 1
    return 0.5 * (lo + hi), it


@njit(cache=True)
def twisted_vector(diag, off, lam):
    """Eigenvector of a symmetric tridiagonal matrix by twisted factorization.

    ``off`` holds the off-diagonals (not squared).  The top-down and
    bottom-up pivot chains meet at the index with the smallest twist
    pivot; the vector is assembled as products of pivot ratios, so signs
    and small tail entries are exact up to rounding in each ratio.
    Returns ``(z, r, gamma_r)`` with ``z[r] = 1``.
    """
    n = diag.size
    dp = np.empty(n)
    dm = np.empty(n)
    dp[0] = diag[0] - lam
    for k in range(1, n):
        prev = dp[k - 1]
        if abs(prev) < PIVMIN:
            prev = -PIVMIN
        dp[k] = diag[k] - lam - off[k - 1] * off[k - 1] / prev
    dm[n - 1] = diag[n - 1] - lam
    for k in range(n - 2, -1, -1):
        nxt = dm[k + 1]
        if abs(nxt) < PIVMIN:
            nxt = -PIVMIN
        dm[k] = diag[k] - lam - off[k] * off[k] / nxt
    r = 0
    best = np.inf
    for k in range(n):
        g = dp[k] + dm[k] - (diag[k] - lam)
        if abs(g) < best:
            best = abs(g)
            r = k
    gamma = dp[r] + dm[r] - (diag[r] - lam)
    z = np.zeros(n)
    z[r] = 1.0
    for k in range(r - 1, -1, -1):
        piv = dp[k]
        if abs(piv) < PIVMIN:
            piv = -PIVMIN
        z[k] = -off[k] * z[k + 1] / piv
    for k in range(r + 1, n):
        piv = dm[k]
        if abs(piv) < PIVMIN:
            piv = -PIVMIN
        z[k] = -off[k - 1] * z[k - 1] / piv
    return z, r, gamma
