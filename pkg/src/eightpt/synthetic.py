"""Synthetic two-view scenes and the ``(1/N) U^T U`` pose-regression dataset.

A scene is a cloud of points uniformly distributed inside a random ball.
Camera 1 sits at the origin looking down +z; camera 2 has the sampled
relative pose ``X2 = R X1 + t``. An instance is kept when at least
``min_points`` scene points land on both sensors.
"""
from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .eight_point import CorrespondenceSet, build_design_matrix, normal_matrix
from .geometry import SYNTHETIC_CAMERA, CameraIntrinsics, euler_to_matrix, matrix_to_quat
from .rng import derive_rng, derive_seed

log = logging.getLogger(__name__)

DISTRIBUTIONS = ("3d", "2dl", "2dm", "2ds")

# Standard deviation of theta_y in degrees; theta_x and theta_z use a twentieth of it.
_YAW_STD = {"2dl": 25.0, "2dm": 5.0, "2ds": 1.0}
# Standard deviations of (t_x, t_y, t_z) for the planar distributions.
_PLANAR_T_STD = np.array([1.0 / 3.0, 1.0 / 60.0, 1.0 / 3.0])
MIN_TRANSLATION = 0.5


@dataclass(frozen=True)
class SceneConfig:
    n_points: int = 10_000
    center_range: tuple = (-0.5, 0.5)
    radius_range: tuple = (0.5, 1.5)

    def __post_init__(self):
        lo, hi = self.radius_range
        if not 0 < lo <= hi:
            raise ValueError("radius range must lie in (0, inf)")
        if self.n_points < 1:
            raise ValueError("scene needs at least one point")


def sample_scene(cfg: SceneConfig, rng: np.random.Generator) -> np.ndarray:
    """Points uniform inside a ball, drawn by rejection from the bounding cube."""
    center = rng.uniform(*cfg.center_range, size=3)
    radius = rng.uniform(*cfg.radius_range)
    chunks, have = [], 0
    while have < cfg.n_points:
        # Acceptance is pi/6, so ~1.95x oversampling usually finishes in one pass.
        p = rng.uniform(-1.0, 1.0, size=(int((cfg.n_points - have) * 1.95) + 16, 3))
        p = p[np.einsum("ij,ij->i", p, p) <= 1.0]
        chunks.append(p)
        have += len(p)
    return center + radius * np.concatenate(chunks)[: cfg.n_points]


def sample_pose(kind: str, rng: np.random.Generator):
    """Relative pose ``(R, t)`` from one of the four distributions.

    Samples with ``||t|| <= 1/2`` are rejected and redrawn together with the
    rotation.
    """
    if kind not in DISTRIBUTIONS:
        raise ValueError(f"unknown pose distribution {kind!r}; choose from {DISTRIBUTIONS}")
    while True:
        if kind == "3d":
            tx, ty, tz = rng.uniform(0.0, 360.0, size=3)
            t = rng.uniform(-1.0, 1.0, size=3)
        else:
            r = _YAW_STD[kind]
            tx, ty, tz = rng.normal(0.0, [r / 20.0, r, r / 20.0])
            t = rng.normal(0.0, _PLANAR_T_STD)
        if np.linalg.norm(t) > MIN_TRANSLATION:
            return euler_to_matrix(tx, ty, tz), t


def canonical_translation(t) -> np.ndarray:
    """Unit direction with non-negative z."""
    t = np.asarray(t, dtype=float)
    d = t / np.linalg.norm(t, axis=-1, keepdims=True)
    return np.where(d[..., 2:3] < 0, -d, d)


@dataclass
class SyntheticInstance:
    feature: np.ndarray
    quat: np.ndarray
    t_dir: np.ndarray
    n: int
    R: np.ndarray = field(repr=False)
    t: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    xp: np.ndarray = field(repr=False)
    seed: int | None = None
    dist: str | None = None

    def to_record(self) -> dict:
        return {"seed": self.seed, "dist": self.dist, "n": int(self.n),
                "feature": self.feature.tolist(), "quat": self.quat.tolist(),
                "t_dir": self.t_dir.tolist()}


def feature_coordinates(uv, cam: CameraIntrinsics) -> np.ndarray:
    """Pixels divided by the image width and shifted by 1/2, as homogeneous points."""
    uv = np.asarray(uv, dtype=float)
    out = np.ones((len(uv), 3))
    out[:, :2] = uv / cam.width - 0.5
    return out


def utu_feature(x, xp) -> np.ndarray:
    """Flattened ``(1/N) U^T U`` of the given correspondences."""
    c = CorrespondenceSet(x, xp)
    return (normal_matrix(build_design_matrix(c)) / len(c)).ravel()


def make_instance(scene, R, t, cam: CameraIntrinsics = SYNTHETIC_CAMERA,
                  min_points: int = 100) -> SyntheticInstance | None:
    """Project a scene into both cameras; ``None`` when too few points are shared."""
    X = np.asarray(scene, dtype=float)
    mask = kernels.dual_visible(X, R, t, cam.f, cam.cu, cam.cv, cam.width, cam.height)
    n = int(np.count_nonzero(mask))
    if n < min_points:
        return None
    X1 = X[mask]
    X2 = X1 @ np.asarray(R).T + np.asarray(t)
    uv1 = cam.f * X1[:, :2] / X1[:, 2:3] + [cam.cu, cam.cv]
    uv2 = cam.f * X2[:, :2] / X2[:, 2:3] + [cam.cu, cam.cv]
    x = feature_coordinates(uv1, cam)
    xp = feature_coordinates(uv2, cam)
    return SyntheticInstance(
        feature=utu_feature(x, xp),
        quat=matrix_to_quat(R),
        t_dir=canonical_translation(t),
        n=n, R=np.asarray(R), t=np.asarray(t), x=x, xp=xp,
    )


def sample_instance(kind: str, rng: np.random.Generator, scene_cfg: SceneConfig = SceneConfig(),
                    cam: CameraIntrinsics = SYNTHETIC_CAMERA, min_points: int = 100,
                    max_attempts: int = 100_000):
    """Draw scenes and poses until one is accepted; returns ``(instance, attempts)``."""
    for attempt in range(1, max_attempts + 1):
        scene = sample_scene(scene_cfg, rng)
        R, t = sample_pose(kind, rng)
        inst = make_instance(scene, R, t, cam, min_points)
        if inst is not None:
            inst.dist = kind
            return inst, attempt
    raise RuntimeError(f"no instance accepted after {max_attempts} attempts")


def instance_seed(seed: int, kind: str, index: int, stream: str = "synth") -> int:
    return derive_seed(seed, stream, kind, index)


def generate_instances(kind: str, count: int, seed: int, threads: int = 1, stream: str = "synth",
                       scene_cfg: SceneConfig = SceneConfig(), min_points: int = 100):
    """Accepted instances ``0..count-1`` plus the total number of attempts.

    Instance ``i`` depends only on ``(seed, stream, kind, i)``, so results do
    not depend on ``threads``.
    """
    if count < 1:
        raise ValueError("count must be at least 1")

    def one(i):
        s = instance_seed(seed, kind, i, stream)
        inst, attempts = sample_instance(kind, np.random.default_rng(s), scene_cfg, min_points=min_points)
        inst.seed = s
        return inst, attempts

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(count)))
    else:
        results = [one(i) for i in range(count)]
    return [r[0] for r in results], sum(r[1] for r in results)


def generate_dataset(kind: str, count: int, seed: int, out: str | os.PathLike, threads: int = 1,
                     stream: str = "synth") -> dict:
    """Write ``count`` instances as JSONL and a ``.meta.json`` sidecar; returns the metadata."""
    instances, attempts = generate_instances(kind, count, seed, threads, stream)
    with open(out, "w") as fh:
        for inst in instances:
            fh.write(json.dumps(inst.to_record()) + "\n")
    ns = np.array([inst.n for inst in instances])
    meta = {
        "dist": kind, "count": count, "seed": seed, "stream": stream,
        "attempts": attempts, "acceptance_rate": count / attempts,
        "mean_n": float(ns.mean()), "median_n": float(np.median(ns)),
        "camera": asdict(SYNTHETIC_CAMERA), "scene": asdict(SceneConfig()),
    }
    with open(f"{out}.meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    log.info("%s: accepted %d of %d attempts (%.1f%%), mean N %.1f",
             kind, count, attempts, 100.0 * count / attempts, meta["mean_n"])
    return meta


def load_dataset(path: str | os.PathLike) -> dict:
    """Read a JSONL dataset into stacked arrays."""
    feats, quats, tdirs, ns, seeds, dists = [], [], [], [], [], []
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            if len(rec["feature"]) != 81 or len(rec["quat"]) != 4 or len(rec["t_dir"]) != 3:
                raise ValueError(f"{path}:{line_no}: malformed record")
            feats.append(rec["feature"])
            quats.append(rec["quat"])
            tdirs.append(rec["t_dir"])
            ns.append(rec["n"])
            seeds.append(rec["seed"])
            dists.append(rec["dist"])
    if not feats:
        raise ValueError(f"{path}: dataset is empty")
    return {"feature": np.array(feats), "quat": np.array(quats), "t_dir": np.array(tdirs),
            "n": np.array(ns), "seed": seeds, "dist": dists}


def accepted_pose_pool(kind: str, size: int, seed: int, threads: int = 1,
                       scene_cfg: SceneConfig = SceneConfig(), min_points: int = 100):
    """Poses of ``size`` accepted instances, ``(R (size,3,3), t (size,3), attempts)``."""
    def one(i):
        rng = derive_rng(seed, "pool", kind, i)
        for attempt in range(1, 100_001):
            scene = sample_scene(scene_cfg, rng)
            R, t = sample_pose(kind, rng)
            cam = SYNTHETIC_CAMERA
            if np.count_nonzero(kernels.dual_visible(scene, R, t, cam.f, cam.cu, cam.cv,
                                                     cam.width, cam.height)) >= min_points:
                return R, t, attempt
        raise RuntimeError("pose pool sampling did not terminate")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            res = list(pool.map(one, range(size)))
    else:
        res = [one(i) for i in range(size)]
    return np.array([r[0] for r in res]), np.array([r[1] for r in res]), sum(r[2] for r in res)
