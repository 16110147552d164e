"""Minimize the spectral norm of an affine matrix function over a polyhedron.

The problems solved here all have the form::

    minimize   || M(x) ||_2,   M(x) = scatter(scale * x) - offset
    subject to A x = b,  x >= 0

where ``x`` holds the free entries of a transition matrix and ``scatter``
places them at ``(rows, cols)``. Two schedules are available:

* ``"smoothed"`` (default): replace the norm by the log-sum-exp of
  ``+-sigma_i / mu`` (a smooth upper bound within ``mu * log(2n)``) and run
  accelerated projected gradient with backtracking and adaptive restart,
  shrinking ``mu`` geometrically.
* ``"subgradient"``: projected subgradient with step ``a / sqrt(t)`` using the
  top singular pair as the subgradient.

Both track the best true objective over all (feasible) iterates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack
from scipy.optimize import linprog

from .errors import Infeasible, SolverStalled


@dataclass
class NormProblem:
    n: int
    rows: np.ndarray
    cols: np.ndarray
    scale: np.ndarray
    offset: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def matrix(self, x: np.ndarray) -> np.ndarray:
        M = -self.offset.copy()
        M[self.rows, self.cols] += self.scale * x
        return M

    def norm(self, x: np.ndarray) -> float:
        return float(_svd(self.matrix(x))[1][0])


@dataclass
class MinimizeResult:
    x: np.ndarray
    value: float
    iterations: int
    restarts: int


def _svd(M):
    U, s, Vt, info = lapack.dgesdd(M)
    if info != 0:
        U, s, Vt = np.linalg.svd(M)
    return U, s, Vt


def _row_basis(A: np.ndarray, b: np.ndarray):
    # orthonormal basis of the row space; drops redundant equalities
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    r = int((s > 1e-10 * s[0]).sum())
    return Vt[:r], (U[:, :r].T @ b) / s[:r]


class PolyhedronProjector:
    """Euclidean projection onto ``{x : A x = b, x >= 0}``.

    Solves the dual ``min_l 0.5 ||max(y + A^T l, 0)||^2 - b^T l`` with a
    semismooth Newton method; the multiplier is warm-started from the previous
    call, which makes repeated projections along an optimization path cheap.
    Falls back to Dykstra's alternating projections if Newton stalls.
    """

    def __init__(self, A: np.ndarray, b: np.ndarray):
        self.A, self.b = _row_basis(np.asarray(A, float), np.asarray(b, float))
        self.AT = np.ascontiguousarray(self.A.T)
        self.lam = np.zeros(self.A.shape[0])

    def __call__(self, y: np.ndarray) -> np.ndarray:
        A, AT, b = self.A, self.AT, self.b
        lam = self.lam
        z = y + AT @ lam
        x = np.maximum(z, 0.0)
        f = 0.5 * (x @ x) - b @ lam
        for _ in range(200):
            g = A @ x - b
            if np.abs(g).max() < 1e-13:
                self.lam = lam
                return x
            Aa = A[:, z > 0]
            H = Aa @ Aa.T
            H.flat[:: H.shape[0] + 1] += 1e-12
            _, d, info = lapack.dposv(H, -g)
            if info != 0:
                d = -np.linalg.lstsq(H, g, rcond=None)[0]
            Ad = AT @ d
            gd = g @ d
            t = 1.0
            while True:
                zn = z + t * Ad
                xn = np.maximum(zn, 0.0)
                fn = 0.5 * (xn @ xn) - b @ lam - t * (b @ d)
                if fn <= f + 1e-4 * t * gd or t < 1e-12:
                    break
                t *= 0.5
            lam = lam + t * d
            z, x, f = zn, xn, fn
        if np.abs(A @ x - b).max() < 1e-10:
            self.lam = lam
            return x
        self.lam = np.zeros_like(self.lam)
        return self._dykstra(y)

    def _dykstra(self, y: np.ndarray, iters: int = 100_000) -> np.ndarray:
        A, b = self.A, self.b
        x = y.copy()
        p = np.zeros_like(y)
        q = np.zeros_like(y)
        for _ in range(iters):
            u = x + p
            u_aff = u - A.T @ (A @ u - b)
            p = u - u_aff
            v = u_aff + q
            x = np.maximum(v, 0.0)
            q = v - x
            if np.abs(A @ x - b).max() < 1e-12 and np.linalg.norm(x - u_aff) < 1e-12:
                break
        return x


def feasible_point(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """A point of ``{A x = b, x >= 0}`` as far from the boundary as possible.

    Raises ``Infeasible`` if the set is empty.
    """
    m, k = A.shape
    # variables (x, t): maximize t s.t. A x = b, x_i >= t, t <= 1
    c = np.zeros(k + 1)
    c[-1] = -1.0
    A_eq = np.hstack([A, np.zeros((m, 1))])
    A_ub = np.hstack([-np.eye(k), np.ones((k, 1))])
    bounds = [(0, None)] * k + [(None, 1.0)]
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(k), A_eq=A_eq, b_eq=b, bounds=bounds, method="highs")
    if res.status != 0:
        raise Infeasible(f"constraint set is empty ({res.message})")
    return np.maximum(res.x[:k], 0.0)


def _smoothed(M: np.ndarray, mu: float):
    U, s, Vt = _svd(M)
    top = s[0]
    ep = np.exp((s - top) / mu)
    em = np.exp((-s - top) / mu)
    Z = ep.sum() + em.sum()
    val = top + mu * np.log(Z)
    G = (U * ((ep - em) / Z)) @ Vt
    return val, G, top


def _run_smoothed(prob: NormProblem, proj: PolyhedronProjector, x: np.ndarray, *,
                  mu_start: float, mu_final: float, mu_shrink: float, stage_gain: float,
                  window: int, max_iterations: int):
    rows, cols, scale = prob.rows, prob.cols, prob.scale
    best_val = prob.norm(x)
    best_x = x.copy()
    L = 1.0
    it = 0
    mu = mu_start
    while it < max_iterations:
        y = x.copy()
        xprev = x.copy()
        t = 1.0
        hist = []
        stage_iters = 0
        while it < max_iterations:
            it += 1
            stage_iters += 1
            fy, Gy, _ = _smoothed(prob.matrix(y), mu)
            gy = Gy[rows, cols] * scale
            while True:
                xn = proj(y - gy / L)
                fx, _, top = _smoothed(prob.matrix(xn), mu)
                d = xn - y
                if fx <= fy + gy @ d + 0.5 * L * (d @ d) + 1e-15 or L > 1e16:
                    break
                L *= 2.0
            if top < best_val:
                best_val, best_x = top, xn.copy()
            if (y - xn) @ (xn - xprev) > 0:
                t = 1.0
                y = xn.copy()
            else:
                tn = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
                y = xn + ((t - 1.0) / tn) * (xn - xprev)
                t = tn
            xprev = xn
            L *= 0.9
            hist.append(fx)
            if stage_iters > window and hist[-window - 1] - fx < stage_gain * mu:
                break
        x = xprev
        if mu <= mu_final * (1 + 1e-12):
            break
        mu = max(mu * mu_shrink, mu_final)
    return best_x, best_val, it


def _run_subgradient(prob: NormProblem, proj: PolyhedronProjector, x: np.ndarray, *,
                     step: float, tolerance: float, patience: int, max_iterations: int):
    rows, cols, scale = prob.rows, prob.cols, prob.scale
    best_val = prob.norm(x)
    best_x = x.copy()
    last_improve = best_val
    since = 0
    it = 0
    for it in range(1, max_iterations + 1):
        U, s, Vt = _svd(prob.matrix(x))
        g = np.outer(U[:, 0], Vt[0])[rows, cols] * scale
        gn = np.linalg.norm(g)
        if gn == 0.0:
            break
        x = proj(x - (step / np.sqrt(it)) * g / gn)
        val = prob.norm(x)
        if val < best_val:
            best_val, best_x = val, x.copy()
        if last_improve - best_val > tolerance:
            last_improve = best_val
            since = 0
        else:
            since += 1
            if since >= patience:
                break
    return best_x, best_val, it


def minimize_spectral_norm(prob: NormProblem, x0: np.ndarray | None, *, schedule: str = "smoothed",
                           max_iterations: int = 50_000, tolerance: float = 1e-6, restarts: int = 1,
                           seed: int = 0, mu_start: float = 0.1, mu_final: float = 1e-5,
                           mu_shrink: float = 0.3, stage_gain: float = 0.005, window: int = 30,
                           patience: int = 200) -> MinimizeResult:
    start = feasible_point(prob.A, prob.b)
    proj = PolyhedronProjector(prob.A, prob.b)
    rng = np.random.default_rng(seed)
    best_x, best_val, total = None, np.inf, 0
    for r in range(max(1, restarts)):
        if r == 0:
            x = proj(start if x0 is None else np.asarray(x0, float))
        else:
            x = proj(start + 0.5 * rng.random(start.size))
        budget = max(1, max_iterations - total)
        if schedule == "smoothed":
            xr, vr, it = _run_smoothed(prob, proj, x, mu_start=mu_start, mu_final=mu_final,
                                       mu_shrink=mu_shrink, stage_gain=stage_gain, window=window,
                                       max_iterations=budget)
        elif schedule == "subgradient":
            xr, vr, it = _run_subgradient(prob, proj, x, step=0.5, tolerance=tolerance,
                                          patience=patience, max_iterations=budget)
        else:
            raise ValueError(f"unknown step schedule {schedule!r}")
        total += it
        if vr < best_val:
            best_x, best_val = xr, vr
        if total >= max_iterations:
            break
    if best_x is None or not np.isfinite(best_val):
        raise SolverStalled("no finite objective value reached")
    return MinimizeResult(best_x, float(best_val), total, r + 1)
