"""Scenario generation for the inspection experiment.

Every region holds an I-beam. Some regions also carry a cube anomaly bolted
to one face of the web. The robot's reference model is the clean I-beam. Its
observations are noisy samples of whatever is really there.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
import json

import numpy as np

from ..constants import BELIEF_CLAMP
from ..detector import DetectorConfig, ReferenceCloud
from ..graph import RegionGraph, fig2_graph, load_graph
from ..linalg import sample_gaussian

__all__ = ["IBeamGeometry", "ScenarioConfig", "NodeScene", "Scenario", "generate_scenario",
           "observe_node", "ibeam_surface", "cube_surface"]


@dataclass(frozen=True)
class IBeamGeometry:
    """Beam along x; flanges are horizontal plates, the web a vertical plate."""

    length: float = 400.0
    flange_width: float = 100.0
    flange_thickness: float = 20.0
    height: float = 300.0
    web_thickness: float = 20.0
    cube_size: float = 100.0

    def faces(self):
        """Sampled faces as ``(fixed_axis, value, ranges of the other two axes, normal)``."""
        L, hw, tf, hh, tw = self.length, self.flange_width / 2, self.flange_thickness, self.height / 2, self.web_thickness / 2
        zi = hh - tf
        x = (0.0, L)
        return [
            (2, hh, x, (-hw, hw), (0, 0, 1)),
            (2, -hh, x, (-hw, hw), (0, 0, -1)),
            (2, zi, x, (-hw, -tw), (0, 0, -1)),
            (2, zi, x, (tw, hw), (0, 0, -1)),
            (2, -zi, x, (-hw, -tw), (0, 0, 1)),
            (2, -zi, x, (tw, hw), (0, 0, 1)),
            (1, -tw, x, (-zi, zi), (0, -1, 0)),
            (1, tw, x, (-zi, zi), (0, 1, 0)),
        ]


def _sample_faces(faces, count: int, rng: np.random.Generator):
    areas = np.array([(r1[1] - r1[0]) * (r2[1] - r2[0]) for _, _, r1, r2, _ in faces])
    which = rng.choice(len(faces), size=count, p=areas / areas.sum())
    pos = np.empty((count, 3))
    nrm = np.empty((count, 3))
    u = rng.random((count, 2))
    for f, (axis, value, r1, r2, normal) in enumerate(faces):
        m = which == f
        others = [a for a in range(3) if a != axis]
        pos[m, axis] = value
        pos[m, others[0]] = r1[0] + u[m, 0] * (r1[1] - r1[0])
        pos[m, others[1]] = r2[0] + u[m, 1] * (r2[1] - r2[0])
        nrm[m] = normal
    return pos, nrm


def ibeam_surface(geom: IBeamGeometry, count: int, rng: np.random.Generator):
    return _sample_faces(geom.faces(), count, rng)


def cube_surface(geom: IBeamGeometry, origin, count: int, rng: np.random.Generator) -> np.ndarray:
    """Points on the five exposed faces of a cube whose -y face sits on the web."""
    x0, y0, z0 = origin
    s = geom.cube_size
    xr, yr, zr = (x0, x0 + s), (y0, y0 + s), (z0, z0 + s)
    faces = [
        (1, y0 + s, xr, zr, (0, 1, 0)),
        (0, x0, yr, zr, (-1, 0, 0)),
        (0, x0 + s, yr, zr, (1, 0, 0)),
        (2, z0, xr, yr, (0, 0, -1)),
        (2, z0 + s, xr, yr, (0, 0, 1)),
    ]
    return _sample_faces(faces, count, rng)[0]


@dataclass
class ScenarioConfig:
    graph: RegionGraph = field(default_factory=lambda: fig2_graph(directed=True))
    structure_points_per_node: int = 500
    anomaly_points: int = 250
    anomaly_size: float = 100.0
    anomaly_prob_range: tuple[float, float] = (0.25, 0.75)
    noise_cov: np.ndarray = field(default_factory=lambda: np.diag([40.0, 40.0, 40.0]))
    prior_perturb_sigma: float = 0.2
    steps: int = 20
    observations_per_visit: int = 250
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    horizon_K: int = 10
    n_rollouts: int = 256
    trials: int = 500
    seed: int = 0
    start_node: int = 0
    random_walk_self_loops: bool = False

    def __post_init__(self):
        self.noise_cov = np.asarray(self.noise_cov, dtype=float)
        lo, hi = self.anomaly_prob_range
        if not (0.0 <= lo <= hi <= 1.0):
            raise ValueError("anomaly_prob_range must be a sub-interval of [0, 1]")
        for name in ("structure_points_per_node", "anomaly_points", "observations_per_visit",
                     "horizon_K", "n_rollouts", "trials"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")

    @property
    def geometry(self) -> IBeamGeometry:
        return IBeamGeometry(cube_size=self.anomaly_size)

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k not in ("graph", "detector", "noise_cov")}
        d["anomaly_prob_range"] = list(self.anomaly_prob_range)
        d["noise_cov"] = self.noise_cov.tolist()
        d["detector"] = asdict(self.detector)
        d["graph"] = self.graph.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | Path | None = None) -> "ScenarioConfig":
        d = dict(d)
        g = d.pop("graph", None)
        kw = {}
        if isinstance(g, dict):
            kw["graph"] = RegionGraph.from_dict(g)
        elif g in ("fig2", "fig2-directed"):
            kw["graph"] = fig2_graph(directed=True)
        elif g == "fig2-undirected":
            kw["graph"] = fig2_graph(directed=False)
        elif isinstance(g, str):
            path = Path(g) if base_dir is None or Path(g).is_absolute() else Path(base_dir) / g
            kw["graph"] = load_graph(path)
        if "detector" in d:
            kw["detector"] = DetectorConfig(**d.pop("detector"))
        if "anomaly_prob_range" in d:
            kw["anomaly_prob_range"] = tuple(d.pop("anomaly_prob_range"))
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown scenario config keys: {sorted(unknown)}")
        return cls(**kw, **d)

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), base_dir=path.parent)


@dataclass
class NodeScene:
    reference: ReferenceCloud
    surface: np.ndarray
    anomalous: bool
    anomaly_prob: float
    prior_h1: float
    cube_origin: tuple[float, float, float] | None


@dataclass
class Scenario:
    config: ScenarioConfig
    nodes: list[NodeScene]

    @property
    def labels(self) -> np.ndarray:
        return np.array([nd.anomalous for nd in self.nodes])

    def metadata(self) -> dict:
        return {"geometry": asdict(self.config.geometry)}


def _perturbed_prior(p: float, sigma: float, rng: np.random.Generator) -> float:
    if sigma == 0.0:
        return p
    while True:
        v = p + sigma * rng.standard_normal()
        if 0.0 <= v <= 1.0:
            return v


def generate_scenario(config: ScenarioConfig, rng: np.random.Generator) -> Scenario:
    geom = config.geometry
    lo, hi = config.anomaly_prob_range
    nodes = []
    for _ in range(config.graph.n):
        pos, nrm = ibeam_surface(geom, config.structure_points_per_node, rng)
        p = lo + (hi - lo) * rng.random()
        anomalous = bool(rng.random() < p)
        surface = pos
        origin = None
        if anomalous:
            zi = geom.height / 2 - geom.flange_thickness
            x0 = rng.random() * (geom.length - geom.cube_size)
            z0 = -zi + rng.random() * max(0.0, 2 * zi - geom.cube_size)
            origin = (x0, geom.web_thickness / 2, z0)
            surface = np.vstack([pos, cube_surface(geom, origin, config.anomaly_points, rng)])
        prior = _perturbed_prior(p, config.prior_perturb_sigma, rng)
        b = float(np.clip(prior, BELIEF_CLAMP, 1.0 - BELIEF_CLAMP))
        ref = ReferenceCloud(pos, nrm, np.full(len(pos), b))
        nodes.append(NodeScene(ref, surface, anomalous, p, prior, origin))
    return Scenario(config, nodes)


def observe_node(scenario: Scenario, node: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Noisy samples of the true surface of ``node``; returns ``(positions, covariance)``."""
    cfg = scenario.config
    surface = scenario.nodes[node].surface
    m = cfg.observations_per_visit
    idx = rng.choice(len(surface), size=m, replace=m > len(surface))
    pts = sample_gaussian(surface[idx], cfg.noise_cov, rng)
    return pts, cfg.noise_cov
