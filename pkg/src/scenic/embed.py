"""Screenshot embeddings ("moment vectors").

Three families:

* ``avg-rgb``: per-channel mean colour in [0, 1].
* ``random-projection``: 16x16 downsample, fixed seeded Gaussian projection,
  softmax.  Game-independent, and every vector lies on the simplex.
* ``bottleneck``: a small pixels->memory regression network; the bottleneck
  activations are the embedding.  Game-specific, trained on exploration data.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from .env import MEMORY_SIZE, SCREEN_H, SCREEN_W
from .errors import ConfigError, DivergenceError, ModelError, TrainingError

DOWN = 16
INPUT_DIM = DOWN * DOWN * 3
DEFAULT_PROJECTION_DIM = 1000
# logit scale of the random projection; keeps the softmax graded rather than one-hot
PROJECTION_GAIN = 4.0


def _as_batch(shots) -> np.ndarray:
    arr = np.asarray(shots)
    if arr.ndim == 3:
        arr = arr[None]
    if arr.shape[1:] != (SCREEN_H, SCREEN_W, 3):
        raise ValueError(f"expected (N, {SCREEN_H}, {SCREEN_W}, 3) screenshots, got {arr.shape}")
    return arr


def downsample(shots) -> np.ndarray:
    """4x4 box average to 16x16x3, scaled to [0, 1], flattened to (N, 768)."""
    arr = _as_batch(shots).astype(np.float64)
    n = arr.shape[0]
    f = SCREEN_H // DOWN
    small = arr.reshape(n, DOWN, f, DOWN, f, 3).mean(axis=(2, 4)) / 255.0
    return small.reshape(n, INPUT_DIM)


def embed_avg_rgb(shot: np.ndarray) -> np.ndarray:
    return _as_batch(shot).reshape(-1, 3).mean(axis=0) / 255.0


@lru_cache(maxsize=8)
def projection_matrix(seed: int, dim: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    mat = rng.standard_normal((dim, INPUT_DIM)) * (PROJECTION_GAIN / math.sqrt(INPUT_DIM))
    mat.flags.writeable = False
    return mat


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def embed_random_projection(shot: np.ndarray, seed: int = 0, dim: int = DEFAULT_PROJECTION_DIM) -> np.ndarray:
    if dim < 2:
        raise ConfigError(f"random projection needs dim >= 2, got {dim}")
    x = downsample(shot)
    return _softmax(x @ projection_matrix(seed, dim).T)[0]


# --- bottleneck network ----------------------------------------------------

MODEL_MAGIC = b"SCNP2M1\n"
INPUT_CENTER = 0.5
PARAM_NAMES = ("W1", "b1", "W2", "b2", "W3", "b3", "W4", "b4")


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    batch_size: int = 32
    epochs: int = 50
    seed: int = 0  # shuffle order

    @classmethod
    def from_dict(cls, d: dict | None) -> TrainConfig:
        d = dict(d or {})
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown training options {sorted(unknown)}")
        return cls(**d)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class BottleneckModel:
    """input -> tanh(hidden) -> linear bottleneck -> tanh(hidden) -> sigmoid(output).

    Targets are memory bytes / 255; the embedding is the bottleneck layer.
    Pixels arrive in [0, 1] and the first layer sees them shifted by
    ``INPUT_CENTER``.  Without the shift a black screen maps to tanh(b1)
    whatever W1 is, so as W1 grows every lit screen drifts away from it
    along one shared direction and dark frames become extreme outliers.
    """

    params: dict[str, np.ndarray]
    init_seed: int = 0
    trained_epochs: int = 0
    meta: dict = field(default_factory=dict)

    @classmethod
    def fresh(cls, seed: int = 0, bottleneck: int = 16, hidden: int = 64,
              input_dim: int = INPUT_DIM, output_dim: int = MEMORY_SIZE,
              init_scale: float = 0.05) -> BottleneckModel:
        if not 1 <= bottleneck <= 256:
            raise ConfigError(f"bottleneck width must be in [1, 256], got {bottleneck}")
        rng = np.random.default_rng(seed)
        shapes = [(hidden, input_dim), (bottleneck, hidden), (hidden, bottleneck), (output_dim, hidden)]
        params = {}
        for i, shape in enumerate(shapes, 1):
            params[f"W{i}"] = rng.uniform(-init_scale, init_scale, size=shape)
            params[f"b{i}"] = np.zeros(shape[0])
        return cls(params, init_seed=seed)

    @property
    def dim(self) -> int:
        return self.params["W2"].shape[0]

    @property
    def input_dim(self) -> int:
        return self.params["W1"].shape[1]

    @property
    def output_dim(self) -> int:
        return self.params["W4"].shape[0]

    def copy(self) -> BottleneckModel:
        return BottleneckModel({k: v.copy() for k, v in self.params.items()},
                               self.init_seed, self.trained_epochs, dict(self.meta))

    def __eq__(self, other):
        if not isinstance(other, BottleneckModel):
            return NotImplemented
        return (self.init_seed == other.init_seed and self.trained_epochs == other.trained_epochs
                and self.params.keys() == other.params.keys()
                and all(np.array_equal(v, other.params[k]) for k, v in self.params.items()))

    def forward(self, x: np.ndarray):
        p = self.params
        h1 = np.tanh((x - INPUT_CENTER) @ p["W1"].T + p["b1"])
        z = h1 @ p["W2"].T + p["b2"]
        h2 = np.tanh(z @ p["W3"].T + p["b3"])
        y = _sigmoid(h2 @ p["W4"].T + p["b4"])
        return h1, z, h2, y

    def encode(self, x: np.ndarray) -> np.ndarray:
        """Bottleneck activations, computed one row at a time so a vector
        never depends on which batch its screenshot arrived in."""
        p = self.params
        out = np.empty((len(x), self.dim))
        for i in range(len(x)):
            out[i] = np.tanh((x[i:i + 1] - INPUT_CENTER) @ p["W1"].T + p["b1"]) @ p["W2"].T + p["b2"]
        return out

    def loss(self, x: np.ndarray, target: np.ndarray) -> float:
        return float(np.mean((self.forward(x)[3] - target) ** 2))

    def loss_and_grads(self, x: np.ndarray, target: np.ndarray):
        """Training objective and its gradient.

        The objective is the squared error summed over output bytes and
        averaged over the batch, i.e. ``output_dim * MSE``: same minimiser as
        the MSE, but gradients large enough for plain SGD at lr ~0.01.
        """
        p = self.params
        h1, z, h2, y = self.forward(x)
        diff = y - target
        loss = float(np.sum(diff ** 2) / len(x))
        dy = 2.0 * diff / len(x)
        da4 = dy * y * (1.0 - y)
        g = {"W4": da4.T @ h2, "b4": da4.sum(0)}
        da3 = (da4 @ p["W4"]) * (1.0 - h2 ** 2)
        g["W3"], g["b3"] = da3.T @ z, da3.sum(0)
        dz = da3 @ p["W3"]
        g["W2"], g["b2"] = dz.T @ h1, dz.sum(0)
        da1 = (dz @ p["W2"]) * (1.0 - h1 ** 2)
        g["W1"], g["b1"] = da1.T @ (x - INPUT_CENTER), da1.sum(0)
        return loss, g

    # persistence: magic, u32 header length, JSON header, raw little-endian float64 params
    def to_bytes(self) -> bytes:
        header = {
            "init_seed": self.init_seed, "trained_epochs": self.trained_epochs, "meta": self.meta,
            "shapes": {k: list(self.params[k].shape) for k in PARAM_NAMES},
        }
        hb = json.dumps(header, sort_keys=True).encode("utf-8")
        body = b"".join(np.ascontiguousarray(self.params[k], dtype="<f8").tobytes() for k in PARAM_NAMES)
        return MODEL_MAGIC + struct.pack("<I", len(hb)) + hb + body

    @classmethod
    def from_bytes(cls, data: bytes) -> BottleneckModel:
        if not data.startswith(MODEL_MAGIC):
            raise ModelError("not a bottleneck model file (bad magic)")
        pos = len(MODEL_MAGIC)
        try:
            (n,) = struct.unpack_from("<I", data, pos)
            header = json.loads(data[pos + 4:pos + 4 + n])
        except (struct.error, json.JSONDecodeError) as exc:
            raise ModelError(f"corrupt model header: {exc}") from None
        pos += 4 + n
        params = {}
        for k in PARAM_NAMES:
            shape = tuple(header["shapes"][k])
            size = int(np.prod(shape)) * 8
            if pos + size > len(data):
                raise ModelError("truncated model file")
            params[k] = np.frombuffer(data[pos:pos + size], dtype="<f8").reshape(shape).astype(np.float64)
            pos += size
        if pos != len(data):
            raise ModelError("trailing bytes in model file")
        return cls(params, header["init_seed"], header["trained_epochs"], header.get("meta", {}))

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> BottleneckModel:
        return cls.from_bytes(Path(path).read_bytes())


def pairs_to_arrays(pairs: Sequence[tuple[np.ndarray, bytes]]):
    if not pairs:
        raise TrainingError("cannot train on an empty dataset")
    shots = np.stack([np.asarray(s) for s, _ in pairs])
    mems = []
    for _, mem in pairs:
        if len(mem) != MEMORY_SIZE:
            raise TrainingError(f"memory arrays must be {MEMORY_SIZE} bytes, got {len(mem)}")
        mems.append(np.frombuffer(bytes(mem), dtype=np.uint8))
    return downsample(shots), np.stack(mems).astype(np.float64) / 255.0


def train_bottleneck(pairs, cfg: TrainConfig | None = None, init: BottleneckModel | None = None,
                     fresh_seed: int = 0, bottleneck: int = 16):
    """Mini-batch SGD on (screenshot, memory) pairs.

    Continues from ``init`` when given (incremental training; ``init`` is not
    mutated).  Returns ``(model, loss_history)`` where entry ``e`` is the
    full-dataset MSE after epoch ``e + 1``.
    """
    cfg = cfg or TrainConfig()
    x, y = pairs_to_arrays(pairs)
    return train_arrays(x, y, cfg, init if init is not None else BottleneckModel.fresh(fresh_seed, bottleneck))


def train_arrays(x: np.ndarray, y: np.ndarray, cfg: TrainConfig, init: BottleneckModel):
    if len(x) == 0:
        raise TrainingError("cannot train on an empty dataset")
    model = init.copy()
    if cfg.epochs == 0:
        return model, []
    if cfg.batch_size < 1 or cfg.learning_rate <= 0:
        raise ConfigError("batch_size must be >= 1 and learning_rate > 0")
    rng = np.random.default_rng(cfg.seed)
    history = []
    n = len(x)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        with np.errstate(over="ignore", invalid="ignore"):
            for start in range(0, n, cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                loss, grads = model.loss_and_grads(x[idx], y[idx])
                if not math.isfinite(loss):
                    raise DivergenceError(epoch, loss)
                for k, g in grads.items():
                    model.params[k] -= cfg.learning_rate * g
            loss = model.loss(x, y)
        # saturating units can keep the loss finite while weights overflow
        if not math.isfinite(loss) or not all(np.isfinite(v).all() for v in model.params.values()):
            raise DivergenceError(epoch, loss)
        history.append(loss)
        model.trained_epochs += 1
    return model, history


def embed_bottleneck(shot: np.ndarray, model: BottleneckModel) -> np.ndarray:
    return model.encode(downsample(shot))[0]


# --- embedding instances ----------------------------------------------------

class Embedding:
    """A named, deterministic screenshot -> vector map."""

    id: str
    dim: int

    def embed_batch(self, shots) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, shot) -> np.ndarray:
        return self.embed_batch(shot)[0]

    def __repr__(self):
        return f"<{type(self).__name__} {self.id}>"


class AvgRGB(Embedding):
    id = "avg-rgb"
    dim = 3

    def embed_batch(self, shots):
        return _as_batch(shots).astype(np.float64).mean(axis=(1, 2)) / 255.0


class RandomProjection(Embedding):
    def __init__(self, seed: int = 0, dim: int = DEFAULT_PROJECTION_DIM):
        if dim < 2:
            raise ConfigError(f"random projection needs dim >= 2, got {dim}")
        self.seed, self.dim = seed, dim
        self.id = "random-projection" if (seed, dim) == (0, DEFAULT_PROJECTION_DIM) else f"random-projection:{seed}:{dim}"

    def embed_batch(self, shots):
        # row by row: batched matmul rounding would make a vector depend on its batch
        x = downsample(shots)
        mat = projection_matrix(self.seed, self.dim)
        out = np.empty((len(x), self.dim))
        for i in range(len(x)):
            out[i] = _softmax(x[i:i + 1] @ mat.T)[0]
        return out


class Bottleneck(Embedding):
    def __init__(self, model: BottleneckModel, id: str = "bottleneck"):
        self.model = model
        self.dim = model.dim
        self.id = id

    def embed_batch(self, shots):
        return self.model.encode(downsample(shots))


def make_embedding(spec: str, base_dir=None) -> Embedding:
    """Build an embedding from its config spec.

    ``avg-rgb`` | ``random-projection[:<seed>[:<dim>]]`` |
    ``bottleneck:<model-path>`` | ``bottleneck:fresh:<seed>``.
    Relative model paths resolve against ``base_dir`` and then the bundled
    model directory.
    """
    kind, _, rest = spec.partition(":")
    if kind == "avg-rgb" and not rest:
        return AvgRGB()
    if kind == "random-projection":
        parts = [p for p in rest.split(":") if p] if rest else []
        try:
            seed = int(parts[0]) if parts else 0
            dim = int(parts[1]) if len(parts) > 1 else DEFAULT_PROJECTION_DIM
        except ValueError:
            raise ConfigError(f"bad embedding spec {spec!r}") from None
        if len(parts) > 2:
            raise ConfigError(f"bad embedding spec {spec!r}")
        return RandomProjection(seed, dim)
    if kind == "bottleneck" and rest:
        if rest.startswith("fresh:"):
            try:
                seed = int(rest[len("fresh:"):])
            except ValueError:
                raise ConfigError(f"bad embedding spec {spec!r}") from None
            return Bottleneck(BottleneckModel.fresh(seed), id=spec)
        return Bottleneck(BottleneckModel.load(resolve_model_path(rest, base_dir)), id=spec)
    raise ConfigError(f"unknown embedding spec {spec!r}")


def resolve_model_path(path: str, base_dir=None) -> Path:
    p = Path(path)
    candidates = [p] if p.is_absolute() else []
    if not p.is_absolute():
        if base_dir is not None:
            candidates.append(Path(base_dir) / p)
        candidates.append(Path.cwd() / p)
        candidates.append(Path(__file__).parent / "data" / "models" / p.name)
    for c in candidates:
        if c.is_file():
            return c
    raise ConfigError(f"model file {path!r} not found")


__all__ = [
    "AvgRGB", "Bottleneck", "BottleneckModel", "Embedding", "RandomProjection", "TrainConfig",
    "downsample", "embed_avg_rgb", "embed_bottleneck", "embed_random_projection", "make_embedding",
    "train_bottleneck",
]
