"""Independent reference implementations used only by the tests."""
import itertools
import math

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linprog


def jacobi_svd_values(M, sweeps=100, tol=1e-15):
    """Singular values by one-sided Jacobi rotations on the columns."""
    U = np.array(M, dtype=float, copy=True)
    n = U.shape[1]
    for _ in range(sweeps):
        off = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                a = U[:, i] @ U[:, i]
                b = U[:, j] @ U[:, j]
                g = U[:, i] @ U[:, j]
                if abs(g) <= tol * math.sqrt(a * b) or g == 0.0:
                    continue
                off = max(off, abs(g) / math.sqrt(a * b))
                zeta = (b - a) / (2.0 * g)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                ui = U[:, i].copy()
                U[:, i] = c * ui - s * U[:, j]
                U[:, j] = s * ui + c * U[:, j]
        if off < tol:
            break
    return np.sort(np.linalg.norm(U, axis=0))[::-1]


def companion(coeffs):
    """Companion matrix of the monic polynomial x^n + c[0] x^(n-1) + ... + c[n-1]."""
    n = len(coeffs)
    C = np.zeros((n, n))
    C[0, :] = -np.asarray(coeffs, dtype=float)
    C[1:, :-1] = np.eye(n - 1)
    return C


def chain_constraints(n, support, w, reversible):
    """Equality system over the free entries P[i, j] with support[i, j] true."""
    idx = [(i, j) for i in range(n) for j in range(n) if support[i, j]]
    pos = {e: t for t, e in enumerate(idx)}
    rows, rhs = [], []
    for j in range(n):
        rows.append([1.0 if b == j else 0.0 for (_, b) in idx])
        rhs.append(1.0)
    for i in range(n):
        rows.append([w[b] if a == i else 0.0 for (a, b) in idx])
        rhs.append(w[i])
    if reversible:
        for (a, b) in idx:
            if a < b:
                r = np.zeros(len(idx))
                r[pos[(a, b)]] = w[b]
                if (b, a) in pos:
                    r[pos[(b, a)]] = -w[a]
                rows.append(r)
                rhs.append(0.0)
    return idx, np.array(rows, dtype=float), np.array(rhs)


def chain_objective(n, idx, w, x, similarity):
    P = np.zeros((n, n))
    for t, (a, b) in enumerate(idx):
        P[a, b] = x[t]
    if similarity:
        q = np.sqrt(w)
        M = P * (q[None, :] / q[:, None]) - np.outer(q, q)
    else:
        M = P - np.outer(w, np.ones(n))
    return float(np.linalg.svd(M, compute_uv=False)[0])


def grid_search_chain(n, support, w, similarity, reversible, resolution=1e-3, seed=0):
    """Exhaustive grid over the feasible polytope followed by local pattern search.

    The polytope is parametrized by a null-space basis of the equalities;
    returns None when the constraint set is empty.
    """
    w = np.asarray(w, dtype=float)
    idx, A, b = chain_constraints(n, support, w, reversible)
    x_p = np.linalg.lstsq(A, b, rcond=None)[0]
    if np.abs(A @ x_p - b).max() > 1e-9:
        return None
    N = sla.null_space(A)
    d = N.shape[1]

    def f(t):
        return chain_objective(n, idx, w, x_p + N @ t, similarity)

    def feasible(t):
        return bool(np.all(x_p + N @ t >= -1e-12))

    if d == 0:
        return f(np.zeros(0)) if feasible(np.zeros(0)) else None
    lo, hi = np.empty(d), np.empty(d)
    for i in range(d):
        for sign, out in ((1.0, lo), (-1.0, hi)):
            c = np.zeros(d)
            c[i] = sign
            r = linprog(c, A_ub=-N, b_ub=x_p, bounds=[(None, None)] * d, method="highs")
            if r.status != 0:
                return None
            out[i] = r.x[i]
    per_axis = int((hi[0] - lo[0]) / resolution) + 2 if d == 1 else max(3, int(round(40 ** (3 / d))))
    grid = np.array(list(itertools.product(*[np.linspace(lo[i], hi[i], per_axis) for i in range(d)])))
    grid = grid[np.all(x_p[None, :] + grid @ N.T >= -1e-12, axis=1)]
    vals = np.array([f(t) for t in grid])
    best = float(vals.min())
    rng = np.random.default_rng(seed)
    step0 = float((hi - lo).max()) / per_axis
    for s in np.argsort(vals)[:5]:
        t, v, h = grid[s].copy(), vals[s], step0
        while h > resolution * 1e-2:
            dirs = np.vstack([np.eye(d), -np.eye(d), rng.standard_normal((4 * d, d))])
            moved = False
            for dv in dirs:
                tn = t + h * dv / np.linalg.norm(dv)
                if feasible(tn):
                    vn = f(tn)
                    if vn < v - 1e-13:
                        t, v, moved = tn, vn, True
                        break
            if not moved:
                h *= 0.5
        best = min(best, v)
    return best
