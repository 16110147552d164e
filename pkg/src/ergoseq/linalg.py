"""Dense numerical kernels.

Small, dependency-light routines used by the detector and the chain
optimizer: an LU solve, a power-iteration spectral norm, eigenvalue moduli of
nonsymmetric matrices via Hessenberg reduction and Francis double-shift QR, the
chi-squared upper tail, and Cholesky-based Gaussian sampling.

Matrices are plain ``numpy`` arrays; nothing here keeps state.
"""
from __future__ import annotations

import math

import numpy as np

from .constants import (
    CHI2_ABS_TOL,
    PSD_PIVOT_TOL,
    POWER_MAX_ITER,
    QR_MAX_SWEEPS_PER_EIG,
    SPECTRAL_NORM_RTOL,
)
from .errors import NonConvergence, NotPSD, SingularMatrix

__all__ = [
    "solve_linear",
    "spectral_norm",
    "eigenvalues",
    "eigenvalue_moduli",
    "chi2_survival",
    "cholesky_psd",
    "sample_gaussian",
]


def _as_matrix(M) -> np.ndarray:
    A = np.array(M, dtype=float)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def solve_linear(A, b) -> np.ndarray:
    """Solve ``A x = b`` by Gaussian elimination with partial pivoting."""
    A = _as_matrix(A)
    n = A.shape[0]
    if A.shape[1] != n:
        raise ValueError("solve_linear needs a square matrix")
    x = np.array(b, dtype=float).reshape(n).copy()
    scale = np.abs(A).max()
    if scale == 0.0:
        raise SingularMatrix("zero matrix")
    tiny = n * np.finfo(float).eps * scale
    for k in range(n):
        p = k + int(np.argmax(np.abs(A[k:, k])))
        if abs(A[p, k]) <= tiny:
            raise SingularMatrix(f"no usable pivot in column {k}")
        if p != k:
            A[[k, p]] = A[[p, k]]
            x[[k, p]] = x[[p, k]]
        f = A[k + 1:, k] / A[k, k]
        A[k + 1:, k:] -= np.outer(f, A[k, k:])
        x[k + 1:] -= f * x[k]
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - A[k, k + 1:] @ x[k + 1:]) / A[k, k]
    return x


def spectral_norm(M, *, rtol: float = SPECTRAL_NORM_RTOL, max_iter: int = POWER_MAX_ITER) -> float:
    """Largest singular value of ``M``.

    Power iteration on the Gram matrix ``B = M^T M`` (or ``M M^T`` when
    smaller). The start vector is deterministic: repeated squaring of the
    normalized ``B`` drives it towards a projector onto the dominant
    eigenspace, and its heaviest column seeds the plain iteration. Iteration
    stops once the eigen-residual ``||B v - rho v||`` is below ``rtol * rho``.
    """
    A = _as_matrix(M)
    scale = np.abs(A).max()
    if scale == 0.0:
        return 0.0
    # pre-scaling keeps the Gram matrix clear of under- and overflow
    A = A / scale
    B = A.T @ A if A.shape[1] <= A.shape[0] else A @ A.T
    top = np.abs(B).max()
    C = B / top
    for _ in range(40):
        C = C @ C
        m = np.abs(C).max()
        if m == 0.0:
            break
        C /= m
    v = C[:, int(np.argmax(np.einsum("ij,ij->j", C, C)))]
    nv = np.linalg.norm(v)
    v = v / nv if nv > 0 else np.ones(B.shape[0]) / math.sqrt(B.shape[0])
    for _ in range(max_iter):
        u = B @ v
        rho = float(v @ u)
        if rho <= 0.0:
            return 0.0
        if np.linalg.norm(u - rho * v) <= 0.5 * rtol * rho:
            return scale * math.sqrt(rho)
        v = u / np.linalg.norm(u)
    raise NonConvergence(f"power iteration did not reach rtol={rtol} in {max_iter} steps")


def _balance(a: np.ndarray) -> np.ndarray:
    # Parlett-Reinsch scaling by powers of two; leaves eigenvalues unchanged.
    a = a.copy()
    n = a.shape[0]
    radix = 2.0
    sqrdx = radix * radix
    done = False
    while not done:
        done = True
        for i in range(n):
            r = np.abs(a[i, :]).sum() - abs(a[i, i])
            c = np.abs(a[:, i]).sum() - abs(a[i, i])
            if c == 0.0 or r == 0.0:
                continue
            g = r / radix
            f = 1.0
            s = c + r
            while c < g:
                f *= radix
                c *= sqrdx
            g = r * radix
            while c > g:
                f /= radix
                c /= sqrdx
            if (c + r) / f < 0.95 * s:
                done = False
                a[i, :] /= f
                a[:, i] *= f
    return a


def _hessenberg(a: np.ndarray) -> np.ndarray:
    H = a.copy()
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1:, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        if x[0] > 0:
            alpha = -alpha
        v = x
        v[0] -= alpha
        vn = np.linalg.norm(v)
        if vn == 0.0:
            continue
        v /= vn
        H[k + 1:, :] -= 2.0 * np.outer(v, v @ H[k + 1:, :])
        H[:, k + 1:] -= 2.0 * np.outer(H[:, k + 1:] @ v, v)
        H[k + 2:, k] = 0.0
    return H


def _hqr(H: np.ndarray, max_its: int) -> list[complex]:
    """Eigenvalues of an upper Hessenberg matrix (Francis double-shift QR).

    Works on a 1-based list-of-lists copy, which is both faster than numpy
    scalar indexing and keeps the classic index arithmetic readable.
    """
    n = H.shape[0]
    a = [[0.0] * (n + 1)] + [[0.0] + [float(v) for v in row] for row in H]
    wr = [0.0] * (n + 1)
    wi = [0.0] * (n + 1)
    anorm = 0.0
    for i in range(1, n + 1):
        for j in range(max(i - 1, 1), n + 1):
            anorm += abs(a[i][j])
    nn = n
    t = 0.0
    x = y = w = 0.0
    while nn >= 1:
        its = 0
        while True:
            l = 1
            for ll in range(nn, 1, -1):
                s = abs(a[ll - 1][ll - 1]) + abs(a[ll][ll])
                if s == 0.0:
                    s = anorm
                if abs(a[ll][ll - 1]) + s == s:
                    a[ll][ll - 1] = 0.0
                    l = ll
                    break
            x = a[nn][nn]
            if l == nn:
                wr[nn] = x + t
                wi[nn] = 0.0
                nn -= 1
                break
            y = a[nn - 1][nn - 1]
            w = a[nn][nn - 1] * a[nn - 1][nn]
            if l == nn - 1:
                p = 0.5 * (y - x)
                q = p * p + w
                z = math.sqrt(abs(q))
                x += t
                if q >= 0.0:
                    z = p + math.copysign(z, p)
                    wr[nn - 1] = wr[nn] = x + z
                    if z != 0.0:
                        wr[nn] = x - w / z
                    wi[nn - 1] = wi[nn] = 0.0
                else:
                    wr[nn - 1] = wr[nn] = x + p
                    wi[nn - 1] = -z
                    wi[nn] = z
                nn -= 2
                break
            if its >= max_its:
                raise NonConvergence("QR iteration failed to deflate")
            if its > 0 and its % 10 == 0:
                # exceptional shift
                t += x
                for i in range(1, nn + 1):
                    a[i][i] -= x
                s = abs(a[nn][nn - 1]) + abs(a[nn - 1][nn - 2])
                y = x = 0.75 * s
                w = -0.4375 * s * s
            its += 1
            m = nn - 2
            while m >= l:
                z = a[m][m]
                r = x - z
                s = y - z
                p = (r * s - w) / a[m + 1][m] + a[m][m + 1]
                q = a[m + 1][m + 1] - z - r - s
                r = a[m + 2][m + 1]
                s = abs(p) + abs(q) + abs(r)
                p /= s
                q /= s
                r /= s
                if m == l:
                    break
                u = abs(a[m][m - 1]) * (abs(q) + abs(r))
                v = abs(p) * (abs(a[m - 1][m - 1]) + abs(z) + abs(a[m + 1][m + 1]))
                if u + v == v:
                    break
                m -= 1
            for i in range(m + 2, nn + 1):
                a[i][i - 2] = 0.0
                if i != m + 2:
                    a[i][i - 3] = 0.0
            for k in range(m, nn):
                if k != m:
                    p = a[k][k - 1]
                    q = a[k + 1][k - 1]
                    r = a[k + 2][k - 1] if k != nn - 1 else 0.0
                    x = abs(p) + abs(q) + abs(r)
                    if x != 0.0:
                        p /= x
                        q /= x
                        r /= x
                s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
                if s == 0.0:
                    continue
                if k == m:
                    if l != m:
                        a[k][k - 1] = -a[k][k - 1]
                else:
                    a[k][k - 1] = -s * x
                p += s
                x = p / s
                y = q / s
                z = r / s
                q /= p
                r /= p
                rk, rk1 = a[k], a[k + 1]
                rk2 = a[k + 2] if k != nn - 1 else None
                for j in range(k, nn + 1):
                    p = rk[j] + q * rk1[j]
                    if rk2 is not None:
                        p += r * rk2[j]
                        rk2[j] -= p * z
                    rk1[j] -= p * y
                    rk[j] -= p * x
                mmin = min(nn, k + 3)
                for i in range(l, mmin + 1):
                    ai = a[i]
                    p = x * ai[k] + y * ai[k + 1]
                    if rk2 is not None:
                        p += z * ai[k + 2]
                        ai[k + 2] -= p * r
                    ai[k + 1] -= p * q
                    ai[k] -= p
    return [complex(wr[i], wi[i]) for i in range(1, n + 1)]


def eigenvalues(M, *, max_sweeps: int = QR_MAX_SWEEPS_PER_EIG) -> np.ndarray:
    """All (complex) eigenvalues of a real square matrix, unordered."""
    A = _as_matrix(M)
    if A.shape[0] != A.shape[1]:
        raise ValueError("eigenvalues needs a square matrix")
    if A.shape[0] == 1:
        return np.array([complex(A[0, 0])])
    scale = np.abs(A).max()
    if scale == 0.0:
        return np.zeros(A.shape[0], dtype=complex)
    # eigenvalues scale linearly; working near unit size avoids underflow in the QR tests
    H = _hessenberg(_balance(A / scale))
    return scale * np.array(_hqr(H, max_sweeps))


def eigenvalue_moduli(M, *, max_sweeps: int = QR_MAX_SWEEPS_PER_EIG) -> np.ndarray:
    """Moduli of all eigenvalues of ``M``, sorted in descending order."""
    return np.sort(np.abs(eigenvalues(M, max_sweeps=max_sweeps)))[::-1]


def _gamma_p_series(a: float, x: float) -> float:
    ap = a
    term = total = 1.0 / a
    for _ in range(100_000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-17:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_contfrac(a: float, x: float) -> float:
    # modified Lentz evaluation of the continued fraction for Q(a, x)
    fpmin = 1e-300
    b = x + 1.0 - a
    c = 1.0 / fpmin
    d = 1.0 / b
    h = d
    for i in range(1, 100_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < fpmin:
            d = fpmin
        c = b + an / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def chi2_survival(x: float, dof: int) -> float:
    """``P(chi2_dof > x)``, the regularized upper incomplete gamma ``Q(dof/2, x/2)``."""
    if dof < 1:
        raise ValueError("dof must be a positive integer")
    a = 0.5 * dof
    hx = 0.5 * x
    if hx <= 0.0:
        return 1.0
    if hx < a + 1.0:
        q = 1.0 - _gamma_p_series(a, hx)
    else:
        q = _gamma_q_contfrac(a, hx)
    # tiny negative values from cancellation are below CHI2_ABS_TOL
    return min(1.0, max(0.0, q if q > -CHI2_ABS_TOL else 0.0))


def cholesky_psd(cov) -> np.ndarray:
    """Lower-triangular ``L`` with ``L L^T = cov`` for a PSD ``cov``.

    Pivots that come out as small non-positive numbers are treated as exact
    zeros (semidefinite case) and the column is dropped; anything below
    ``PSD_PIVOT_TOL`` (scaled by the matrix magnitude) is an error.
    """
    A = _as_matrix(cov)
    n = A.shape[0]
    if A.shape[1] != n:
        raise ValueError("covariance must be square")
    if not np.allclose(A, A.T, atol=1e-10 * max(1.0, np.abs(A).max())):
        raise NotPSD("covariance is not symmetric")
    scale = max(1.0, np.abs(A).max())
    L = np.zeros_like(A)
    for j in range(n):
        d = A[j, j] - L[j, :j] @ L[j, :j]
        if d < PSD_PIVOT_TOL * scale:
            raise NotPSD(f"negative pivot {d:.3e} at index {j}")
        if d <= 1e-14 * scale:
            continue
        L[j, j] = math.sqrt(d)
        L[j + 1:, j] = (A[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def sample_gaussian(mean, cov, rng: np.random.Generator) -> np.ndarray:
    """Draw ``mean + L z`` with ``z`` standard normal from ``rng``.

    ``mean`` may be a single vector or a stack of shape ``(m, d)``; in the
    latter case one independent draw is made per row.
    """
    mu = np.asarray(mean, dtype=float)
    L = cholesky_psd(cov)
    if L.shape[0] != mu.shape[-1]:
        raise ValueError("mean and covariance dimensions differ")
    z = rng.standard_normal(mu.shape)
    return mu + z @ L.T
