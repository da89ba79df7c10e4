"""Leaky-ReLU MLP pose regressor trained with Adam, in plain numpy.

The network maps a flattened ``(1/N) U^T U`` feature to an L2-normalized
vector: a quaternion (rotation task) or a translation direction with
``t_z >= 0`` (translation task). The loss is the mean angular distance
between prediction and target in radians.
"""
from __future__ import annotations

import functools
import json
import logging
import os
from dataclasses import asdict, dataclass, fields

import numpy as np

from .analysis import ErrorSummary, error_summary
from .synthetic import DISTRIBUTIONS, accepted_pose_pool, canonical_translation

log = logging.getLogger(__name__)

TASKS = ("rotation", "translation")
_ADAM_B1, _ADAM_B2, _ADAM_EPS = 0.9, 0.999, 1e-8
_MODEL_MAGIC = "eightpt-mlp-v1"


@dataclass
class MlpConfig:
    input_dim: int = 81
    hidden_layers: int = 3
    hidden_width: int = 512
    output_dim: int = 4
    slope: float = 0.01
    learning_rate: float = 1e-3
    batch_size: int = 128
    epochs: int = 30
    seed: int = 0
    standardize: bool = True

    def __post_init__(self):
        if min(self.input_dim, self.hidden_layers, self.hidden_width, self.output_dim) < 1:
            raise ValueError("all layer sizes must be >= 1")
        if not 0 < self.slope < 1:
            raise ValueError("leaky-ReLU slope must lie in (0, 1)")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch size must be >= 1 and epochs >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> "MlpConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @property
    def layer_sizes(self) -> list[int]:
        return [self.input_dim] + [self.hidden_width] * self.hidden_layers + [self.output_dim]


def output_dim_for(task: str) -> int:
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    return 4 if task == "rotation" else 3


class MlpModel:
    """Weights, biases, input standardization and Adam state."""

    def __init__(self, config: MlpConfig, task: str):
        if config.output_dim != output_dim_for(task):
            raise ValueError(f"{task} task needs output_dim {output_dim_for(task)}")
        self.config = config
        self.task = task
        rng = np.random.default_rng(config.seed)
        self.weights, self.biases = [], []
        sizes = config.layer_sizes
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))
        self.feature_mean = np.zeros(config.input_dim)
        self.feature_scale = np.ones(config.input_dim)
        self.step = 0
        self._m = [np.zeros_like(p) for p in self.params]
        self._v = [np.zeros_like(p) for p in self.params]

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def fit_standardization(self, X):
        X = np.asarray(X, dtype=float)
        self.feature_mean = X.mean(axis=0)
        std = X.std(axis=0)
        self.feature_scale = np.where(std > 1e-12, std, 1.0)

    def adam_step(self, grads):
        """One Adam update; a zero gradient leaves the parameters unchanged."""
        lr = self.config.learning_rate
        self.step += 1
        c1 = 1.0 - _ADAM_B1 ** self.step
        c2 = 1.0 - _ADAM_B2 ** self.step
        for p, g, m, v in zip(self.params, grads, self._m, self._v):
            m *= _ADAM_B1
            m += (1.0 - _ADAM_B1) * g
            v *= _ADAM_B2
            v += (1.0 - _ADAM_B2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + _ADAM_EPS)


def _forward_cache(model: MlpModel, X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.config.input_dim:
        raise ValueError(f"expected features of shape (B, {model.config.input_dim}), got {X.shape}")
    slope = model.config.slope
    h = (X - model.feature_mean) / model.feature_scale
    acts, pre = [h], []
    n_layers = len(model.weights)
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ W + b
        pre.append(z)
        h = z if i == n_layers - 1 else np.where(z > 0, z, slope * z)
        acts.append(h)
    return acts, pre


def _normalize_output(y, task):
    norm = np.linalg.norm(y, axis=1, keepdims=True)
    norm = np.maximum(norm, 1e-300)
    n = y / norm
    sign = np.ones((len(y), 1))
    if task == "translation":
        sign = np.where(n[:, 2:3] < 0, -1.0, 1.0)
    return n * sign, n, norm, sign


def forward(model: MlpModel, X) -> np.ndarray:
    """Unit-norm predictions, shape (B, output_dim)."""
    acts, _ = _forward_cache(model, X)
    return _normalize_output(acts[-1], model.task)[0]


def angular_errors(pred, target, task: str) -> np.ndarray:
    """Per-sample angular distance in radians."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    pred = pred / np.linalg.norm(pred, axis=1, keepdims=True)
    target = target / np.linalg.norm(target, axis=1, keepdims=True)
    if task == "rotation":
        # q and -q are the same rotation: take the nearer of the two signs.
        half = np.arctan2(np.linalg.norm(pred - target, axis=1), np.linalg.norm(pred + target, axis=1))
        return 4.0 * np.minimum(half, 0.5 * np.pi - half)
    pred = canonical_translation(pred)
    target = canonical_translation(target)
    cross = np.linalg.norm(np.cross(pred, target), axis=1)
    return np.arctan2(cross, np.sum(pred * target, axis=1))


def loss_and_grad(model: MlpModel, X, Y, clamp_eps: float = 1e-12):
    """Mean angular loss (radians) and gradients ordered like ``model.params``.

    Returns ``(loss, grads, n_clamped)`` where ``n_clamped`` counts samples
    whose cosine had to be clamped away from +-1 for the derivative.
    """
    task = model.task
    Y = np.asarray(Y, dtype=float)
    acts, pre = _forward_cache(model, X)
    out, n, norm, sign = _normalize_output(acts[-1], task)
    B = len(Y)
    if task == "translation":
        Y = canonical_translation(Y)
    c = np.sum(out * Y, axis=1)
    if task == "rotation":
        s = np.where(c < 0, -1.0, 1.0)
        ac = np.clip(np.abs(c), -1.0, 1.0)
        losses = 2.0 * np.arccos(ac)
        denom2 = 1.0 - ac * ac
        clamped = denom2 < clamp_eps
        dl_dc = -2.0 * s / np.sqrt(np.maximum(denom2, clamp_eps))
    else:
        cc = np.clip(c, -1.0, 1.0)
        losses = np.arccos(cc)
        denom2 = 1.0 - cc * cc
        clamped = denom2 < clamp_eps
        dl_dc = -1.0 / np.sqrt(np.maximum(denom2, clamp_eps))
    loss = float(np.mean(losses))

    g_out = (dl_dc / B)[:, None] * Y
    g_n = g_out * sign
    g_y = (g_n - n * np.sum(n * g_n, axis=1, keepdims=True)) / norm

    slope = model.config.slope
    grads_w, grads_b = [], []
    delta = g_y
    for i in range(len(model.weights) - 1, -1, -1):
        grads_w.append(acts[i].T @ delta)
        grads_b.append(delta.sum(axis=0))
        if i > 0:
            delta = (delta @ model.weights[i].T) * np.where(pre[i - 1] > 0, 1.0, slope)
    grads = []
    for gw, gb in zip(reversed(grads_w), reversed(grads_b)):
        grads += [gw, gb]
    return loss, grads, int(np.count_nonzero(clamped))


def _targets(data: dict, task: str) -> np.ndarray:
    return data["quat"] if task == "rotation" else data["t_dir"]


def train(config: MlpConfig, X, Y, task: str, log_every: int = 0):
    """Train from scratch. Returns ``(model, per-epoch mean loss list)``.

    Mini-batch order comes from a generator seeded by ``config.seed``; the
    run is deterministic for a given config and data.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if len(X) != len(Y) or len(X) == 0:
        raise ValueError("features and targets must be non-empty and of equal length")
    model = MlpModel(config, task)
    if config.standardize:
        model.fit_standardization(X)
    order_rng = np.random.default_rng([config.seed, 1])
    curve = []
    for epoch in range(config.epochs):
        perm = order_rng.permutation(len(X))
        total, seen = 0.0, 0
        for start in range(0, len(X), config.batch_size):
            idx = perm[start:start + config.batch_size]
            loss, grads, _ = loss_and_grad(model, X[idx], Y[idx])
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
                raise FloatingPointError(
                    f"non-finite loss at epoch {epoch}, step {model.step}; "
                    f"last finite epoch loss {curve[-1] if curve else 'n/a'}")
            model.adam_step(grads)
            total += loss * len(idx)
            seen += len(idx)
        curve.append(total / seen)
        if log_every and (epoch + 1) % log_every == 0:
            log.info("epoch %d loss %.5f", epoch + 1, curve[-1])
    return model, curve


def evaluate(model: MlpModel, X, Y, threshold: float = 30.0) -> ErrorSummary:
    """Angular errors in degrees summarized as mean / median / percent within."""
    if len(X) == 0:
        raise ValueError("empty test set")
    errs = np.degrees(angular_errors(forward(model, X), Y, model.task))
    return error_summary(errs, threshold)


@functools.lru_cache(maxsize=16)
def _pool_arrays(kind: str, size: int, seed: int, threads: int):
    Rs, ts, _ = accepted_pose_pool(kind, size, seed, threads)
    Rs.setflags(write=False)
    ts.setflags(write=False)
    return Rs, ts


def chance_baseline(kind: str, task: str, n: int = 100_000, seed: int = 0, pool_size: int = 4000,
                    threshold: float = 30.0, threads: int = 1) -> ErrorSummary:
    """Error of predicting an independent draw from the instance distribution.

    Ground truth and prediction come from two disjoint pools of poses of
    accepted instances (``pool_size // 2`` each); ``n`` index pairs are
    drawn with replacement.
    """
    if kind not in DISTRIBUTIONS or task not in TASKS:
        raise ValueError("unknown distribution or task")
    if n < 1000:
        raise ValueError("chance baseline needs at least 1000 draws")
    Rs, ts = _pool_arrays(kind, pool_size, seed, max(1, threads))
    half = pool_size // 2
    rng = np.random.default_rng([seed, 7])
    gi = rng.integers(0, half, size=n)
    pi = half + rng.integers(0, pool_size - half, size=n)
    if task == "rotation":
        rel = np.einsum("nji,njk->nik", Rs[gi], Rs[pi])
        sin_part = 0.5 * np.linalg.norm(np.stack([rel[:, 2, 1] - rel[:, 1, 2], rel[:, 0, 2] - rel[:, 2, 0],
                                                  rel[:, 1, 0] - rel[:, 0, 1]], axis=1), axis=1)
        cos_part = 0.5 * (np.trace(rel, axis1=1, axis2=2) - 1.0)
        errs = np.degrees(np.arctan2(sin_part, cos_part))
    else:
        errs = np.degrees(angular_errors(ts[pi], ts[gi], "translation"))
    return error_summary(errs, threshold)


# ---------------------------------------------------------------- model files

def save_model(model: MlpModel, path: str | os.PathLike, extra: dict | None = None):
    """JSON header line followed by a little-endian float64 parameter block."""
    blocks = [model.feature_mean, model.feature_scale] + model.params
    flat = np.concatenate([b.ravel() for b in blocks]).astype("<f8")
    header = {
        "format": _MODEL_MAGIC, "task": model.task, "config": asdict(model.config),
        "step": model.step, "n_params": int(flat.size),
        "shapes": [list(b.shape) for b in blocks],
    }
    if extra:
        header["extra"] = extra
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(flat.tobytes())


def load_model(path: str | os.PathLike) -> MlpModel:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline())
        if header.get("format") != _MODEL_MAGIC:
            raise ValueError(f"{path}: not a model file")
        raw = fh.read()
    n = header["n_params"]
    if len(raw) != 8 * n:
        raise ValueError(f"{path}: parameter block has {len(raw)} bytes, header declares {8 * n}")
    flat = np.frombuffer(raw, dtype="<f8").astype(float)
    model = MlpModel(MlpConfig.from_dict(header["config"]), header["task"])
    blocks, pos = [], 0
    for shape in header["shapes"]:
        size = int(np.prod(shape))
        blocks.append(flat[pos:pos + size].reshape(shape))
        pos += size
    model.feature_mean, model.feature_scale = blocks[0], blocks[1]
    model.weights = [b.copy() for b in blocks[2::2]]
    model.biases = [b.copy() for b in blocks[3::2]]
    model.step = header["step"]
    return model
