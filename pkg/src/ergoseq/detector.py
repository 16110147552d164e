"""Point-cloud anomaly detection by Bayesian hypothesis testing.

Each reference point carries a belief over two hypotheses:

* H0 -- observations near it come from its tangent plane or behind it,
* H1 -- they lie beyond the plane shifted outward by ``epsilon``.

For an observation ``p`` with covariance ``S`` the evidence is the smallest
squared Mahalanobis distance from ``p`` to each halfspace; the sum over the
``k`` nearest observations is converted into a likelihood through the
chi-squared upper tail with ``dimension * k`` degrees of freedom.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .constants import BELIEF_CLAMP, COV_REGULARIZATION, NORMAL_TOL
from .errors import EmptyStructure, NotPSD, SingularCovariance, SingularMatrix
from .linalg import chi2_survival, cholesky_psd, solve_linear

__all__ = [
    "Pose2",
    "ObservedPoint",
    "ReferencePoint",
    "ReferenceCloud",
    "DetectorConfig",
    "propagate_covariance_2d",
    "halfspace_projection",
    "halfspace_distances",
    "hypothesis_likelihoods",
    "bayes_update",
    "process_observation_batch",
    "binary_entropy",
    "region_entropy",
    "read_reference_points",
    "write_reference_points",
    "read_observations",
    "write_observations",
]


def _wrap_angle(theta: float) -> float:
    t = math.remainder(theta, 2.0 * math.pi)
    return math.pi if t == -math.pi else t


@dataclass(frozen=True)
class Pose2:
    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", _wrap_angle(float(self.theta)))


@dataclass(frozen=True)
class ObservedPoint:
    position: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float).reshape(-1)
        S = np.asarray(self.covariance, dtype=float)
        if p.size not in (2, 3) or S.shape != (p.size, p.size):
            raise ValueError("position must be 2-D or 3-D with a matching covariance")
        if np.abs(S - S.T).max() > 1e-10:
            raise NotPSD("observation covariance is not symmetric")
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "covariance", S)


@dataclass(frozen=True)
class ReferencePoint:
    position: np.ndarray
    normal: np.ndarray
    belief_h0: float = 0.5
    belief_h1: float = 0.5

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float).reshape(-1)
        n = np.asarray(self.normal, dtype=float).reshape(-1)
        if abs(np.linalg.norm(n) - 1.0) > NORMAL_TOL:
            raise ValueError("reference normal must have unit length")
        if abs(self.belief_h0 + self.belief_h1 - 1.0) > 1e-9:
            raise ValueError("beliefs must sum to one")
        if not (0.0 < self.belief_h1 < 1.0):
            raise ValueError("beliefs must lie strictly inside (0, 1)")
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "normal", n)


@dataclass(frozen=True)
class DetectorConfig:
    epsilon: float = 20.0
    smoothing_c: float = 0.5
    neighborhood_k: int = 5
    dimension: int = 3

    def __post_init__(self):
        if self.epsilon < 0 or self.smoothing_c < 0:
            raise ValueError("epsilon and smoothing_c must be non-negative")
        if self.neighborhood_k < 1:
            raise ValueError("neighborhood_k must be >= 1")
        if self.dimension not in (2, 3):
            raise ValueError("dimension must be 2 or 3")


@dataclass
class ReferenceCloud:
    """Struct-of-arrays form of many :class:`ReferencePoint` objects.

    The batch update works on this form; ``belief_h1`` is updated in place.
    """

    positions: np.ndarray
    normals: np.ndarray
    belief_h1: np.ndarray = field(default=None)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.normals = np.asarray(self.normals, dtype=float)
        if self.belief_h1 is None:
            self.belief_h1 = np.full(len(self.positions), 0.5)
        self.belief_h1 = np.asarray(self.belief_h1, dtype=float).copy()
        if self.positions.shape != self.normals.shape or self.belief_h1.shape != (len(self.positions),):
            raise ValueError("inconsistent reference cloud shapes")

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def belief_h0(self) -> np.ndarray:
        return 1.0 - self.belief_h1

    def copy(self) -> "ReferenceCloud":
        return ReferenceCloud(self.positions, self.normals, self.belief_h1.copy())

    @classmethod
    def from_points(cls, refs: Sequence[ReferencePoint]) -> "ReferenceCloud":
        if not refs:
            raise EmptyStructure("no reference points")
        return cls(np.stack([r.position for r in refs]), np.stack([r.normal for r in refs]),
                   np.array([r.belief_h1 for r in refs]))

    def points(self) -> list[ReferencePoint]:
        return [ReferencePoint(p, n, 1.0 - b, b) for p, n, b in zip(self.positions, self.normals, self.belief_h1)]


def _rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def propagate_covariance_2d(pose: Pose2, pose_cov, local_point, local_cov) -> ObservedPoint:
    """Map a point from the pose frame to the world frame with first-order covariance.

    ``cov = J pose_cov J^T + R local_cov R^T`` where ``J`` is the Jacobian of
    the rigid transform with respect to ``(x, y, theta)``.
    """
    pose_cov = np.asarray(pose_cov, dtype=float)
    local_cov = np.asarray(local_cov, dtype=float)
    cholesky_psd(pose_cov)
    cholesky_psd(local_cov)
    px, py = np.asarray(local_point, dtype=float)
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    R = _rotation(pose.theta)
    J = np.array([[1.0, 0.0, -py * c - px * s],
                  [0.0, 1.0, px * c - py * s]])
    world = R @ np.array([px, py]) + np.array([pose.x, pose.y])
    cov = J @ pose_cov @ J.T + R @ local_cov @ R.T
    return ObservedPoint(world, 0.5 * (cov + cov.T))


def _inverse(S: np.ndarray) -> np.ndarray:
    d = S.shape[0]
    eye = np.eye(d)
    for reg in (0.0, COV_REGULARIZATION):
        try:
            return np.column_stack([solve_linear(S + reg * eye, eye[:, i]) for i in range(d)])
        except SingularMatrix:
            continue
    raise SingularCovariance("covariance is singular even after regularization")


def halfspace_projection(point: ObservedPoint, plane_point, normal, side: str) -> tuple[np.ndarray, float]:
    """Statistically closest point of a halfspace and its squared Mahalanobis distance.

    ``side="inside"`` is the halfspace ``n.mu <= n.plane_point`` (H0);
    ``side="outside"`` is ``n.mu >= n.plane_point`` (H1, with ``plane_point``
    already shifted by ``epsilon`` along ``n``). A point already in the
    halfspace returns ``(p, 0)``; otherwise the Lagrange (KKT) system of the
    equality-constrained problem is solved for the minimizer on the plane.
    """
    p = point.position
    n = np.asarray(normal, dtype=float)
    c = float(n @ np.asarray(plane_point, dtype=float))
    s = float(n @ p) - c
    if side == "inside":
        inside = s <= 0.0
    elif side == "outside":
        inside = s >= 0.0
    else:
        raise ValueError(f"side must be 'inside' or 'outside', got {side!r}")
    if inside:
        return p.copy(), 0.0
    d = p.size
    S_inv = _inverse(point.covariance)
    K = np.zeros((d + 1, d + 1))
    K[:d, :d] = -2.0 * S_inv
    K[:d, d] = n
    K[d, :d] = n
    rhs = np.concatenate([-2.0 * S_inv @ p, [c]])
    try:
        sol = solve_linear(K, rhs)
    except SingularMatrix:
        S_inv = _inverse(point.covariance + COV_REGULARIZATION * np.eye(d))
        K[:d, :d] = -2.0 * S_inv
        rhs[:d] = -2.0 * S_inv @ p
        sol = solve_linear(K, rhs)
    mu = sol[:d]
    r = p - mu
    return mu, float(max(r @ S_inv @ r, 0.0))


def halfspace_distances(positions, covariances, plane_points, normals, side: str) -> np.ndarray:
    """Vectorized squared Mahalanobis distance from many points to many halfspaces.

    Uses the closed form of the same constrained problem:
    ``D = (n.(p - plane))^2 / (n^T S n)`` on the violating side, else 0.
    ``covariances`` may be a single ``(d, d)`` matrix or a stack ``(m, d, d)``.
    """
    P = np.asarray(positions, dtype=float)
    N = np.asarray(normals, dtype=float)
    s = np.einsum("...i,...i->...", N, P - np.asarray(plane_points, dtype=float))
    S = np.asarray(covariances, dtype=float)
    d = P.shape[-1]
    S = S + COV_REGULARIZATION * np.eye(d)
    if S.ndim == 2:
        var = np.einsum("...i,ij,...j->...", N, S, N)
    else:
        var = np.einsum("...i,...ij,...j->...", N, S, N)
    if side == "inside":
        viol = np.maximum(s, 0.0)
    elif side == "outside":
        viol = np.maximum(-s, 0.0)
    else:
        raise ValueError(f"side must be 'inside' or 'outside', got {side!r}")
    return viol * viol / var


def hypothesis_likelihoods(d0_sum: float, d1_sum: float, k: int, dimension: int = 3) -> tuple[float, float]:
    dof = dimension * k
    return chi2_survival(d0_sum, dof), chi2_survival(d1_sum, dof)


def _posterior_h1(prior_h1, l0, l1, c):
    prior_h1 = np.asarray(prior_h1, dtype=float)
    a0 = (np.asarray(l0) + c) * (1.0 - prior_h1)
    a1 = (np.asarray(l1) + c) * prior_h1
    tot = a0 + a1
    post = np.where(tot > 0, a1 / np.where(tot > 0, tot, 1.0), prior_h1)
    return np.clip(post, BELIEF_CLAMP, 1.0 - BELIEF_CLAMP)


def bayes_update(ref: ReferencePoint, likelihood_h0: float, likelihood_h1: float, smoothing_c: float) -> ReferencePoint:
    """One recursive update of both hypotheses; likelihoods are smoothed by ``c``."""
    h1 = float(_posterior_h1(ref.belief_h1, likelihood_h0, likelihood_h1, smoothing_c))
    return replace(ref, belief_h0=1.0 - h1, belief_h1=h1)


def process_observation_batch(cloud: ReferenceCloud, positions, covariances, config: DetectorConfig) -> ReferenceCloud:
    """Fold one batch of observations into ``cloud`` (updated in place and returned).

    Every reference point that is the nearest reference of at least one
    observation gets one update, using the ``k`` observations closest to it.
    Distances are Euclidean; ties go to the lowest index.
    """
    P = np.asarray(positions, dtype=float)
    k = config.neighborhood_k
    if len(P) < k:
        raise ValueError(f"need at least k={k} observations, got {len(P)}")
    S = np.asarray(covariances, dtype=float)
    R = cloud.positions
    d2 = (np.einsum("ij,ij->i", R, R)[:, None] - 2.0 * R @ P.T + np.einsum("ij,ij->i", P, P)[None, :])
    owner = np.argmin(d2, axis=0)
    touched = np.unique(owner)
    nearest = np.argsort(d2[touched], axis=1, kind="stable")[:, :k]
    obs = P[nearest]
    cov = S if S.ndim == 2 else S[nearest]
    mu = R[touched][:, None, :]
    nrm = cloud.normals[touched][:, None, :]
    nrm_b = np.broadcast_to(nrm, obs.shape)
    d0 = halfspace_distances(obs, cov, np.broadcast_to(mu, obs.shape), nrm_b, "inside").sum(axis=1)
    d1 = halfspace_distances(obs, cov, np.broadcast_to(mu + config.epsilon * nrm, obs.shape), nrm_b,
                             "outside").sum(axis=1)
    dof = config.dimension * k
    l0 = np.array([chi2_survival(v, dof) for v in d0])
    l1 = np.array([chi2_survival(v, dof) for v in d1])
    cloud.belief_h1[touched] = _posterior_h1(cloud.belief_h1[touched], l0, l1, config.smoothing_c)
    return cloud


def binary_entropy(p_h1) -> np.ndarray:
    p = np.clip(np.asarray(p_h1, dtype=float), BELIEF_CLAMP, 1.0 - BELIEF_CLAMP)
    q = 1.0 - p
    return -(p * np.log(p) + q * np.log(q))


def region_entropy(refs: ReferenceCloud | Iterable[ReferencePoint]) -> float:
    """Largest hypothesis entropy among a structure's reference points."""
    if isinstance(refs, ReferenceCloud):
        b = refs.belief_h1
    else:
        b = np.array([r.belief_h1 for r in refs])
    if b.size == 0:
        raise EmptyStructure("region has no reference points")
    return float(binary_entropy(b).max())


def _dim_columns(dimension: int) -> int:
    if dimension not in (2, 3):
        raise ValueError("dimension must be 2 or 3")
    return dimension


def read_reference_points(path: str | Path, dimension: int = 3) -> ReferenceCloud:
    """Parse ``x y [z] nx ny [nz] [belief_h1]`` lines; blank and ``#`` lines are skipped."""
    d = _dim_columns(dimension)
    pos, nrm, bel = [], [], []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        v = [float(t) for t in line.split()]
        if len(v) not in (2 * d, 2 * d + 1):
            raise ValueError(f"bad reference record: {line!r}")
        n = np.array(v[d:2 * d])
        pos.append(v[:d])
        nrm.append(n / np.linalg.norm(n))
        bel.append(v[2 * d] if len(v) == 2 * d + 1 else 0.5)
    if not pos:
        raise EmptyStructure(f"no reference points in {path}")
    return ReferenceCloud(np.array(pos), np.array(nrm), np.array(bel))


def write_reference_points(path: str | Path, cloud: ReferenceCloud) -> None:
    with open(path, "w") as fh:
        for p, n, b in zip(cloud.positions, cloud.normals, cloud.belief_h1):
            fh.write(" ".join(f"{v:.17g}" for v in (*p, *n, b)) + "\n")


def read_observations(path: str | Path, dimension: int = 3) -> tuple[np.ndarray, np.ndarray]:
    """Parse ``x y [z] c11 c12 ...`` lines (row-major covariance)."""
    d = _dim_columns(dimension)
    pos, cov = [], []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        v = [float(t) for t in line.split()]
        if len(v) != d + d * d:
            raise ValueError(f"bad observation record: {line!r}")
        pos.append(v[:d])
        cov.append(np.array(v[d:]).reshape(d, d))
    return np.array(pos), np.array(cov)


def write_observations(path: str | Path, positions, covariances) -> None:
    P = np.asarray(positions, dtype=float)
    S = np.asarray(covariances, dtype=float)
    if S.ndim == 2:
        S = np.broadcast_to(S, (len(P),) + S.shape)
    with open(path, "w") as fh:
        for p, c in zip(P, S):
            fh.write(" ".join(f"{v:.17g}" for v in (*p, *c.reshape(-1))) + "\n")
