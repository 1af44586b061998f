"""Four-channel 1-D CNN with decision fusion.

Each channel is the same stack with a different kernel size (1..4):

    Conv1D(32, k, valid) + ReLU
    Conv1D(16, k, same) + ReLU + Dropout(0.4)
    MaxPooling1D(1)
    Flatten + Dropout(0.5)
    Dense(128) + Dropout(0.5)
    Dense(64) + Dropout(0.5)
    Dense(3) + softmax

Training runs in two phases: every channel alone on its own softmax output,
then all four jointly through the averaged probabilities.
"""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .nn import (
    Conv1D,
    Dense,
    Dropout,
    Flatten,
    MaxPool1D,
    Network,
    ReLU,
    RmsPropState,
    ShapeError,
    cross_entropy,
    load_params,
    rmsprop_step,
    save_params,
)

KERNEL_SIZES = (1, 2, 3, 4)
N_CLASSES = 3


class FusionMode(str, enum.Enum):
    AVG = "avg"
    SUM = "sum"
    MAX = "max"


@dataclass
class TrainConfig:
    learning_rate: float = 1e-5
    batch_size: int = 32
    epochs: int = 50
    joint_epochs: int = 10
    seed: int = 0
    rho: float = 0.9
    epsilon: float = 1e-7

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_size < 1 or self.epochs < 0 or self.joint_epochs < 0:
            raise ValueError("batch_size must be >= 1 and epoch counts >= 0")


@dataclass
class Architecture:
    input_length: int = 403
    filters: tuple[int, int] = (32, 16)
    dense: tuple[int, int] = (128, 64)
    dropout: tuple[float, float, float, float] = (0.4, 0.5, 0.5, 0.5)
    pool: int = 1
    n_classes: int = N_CLASSES

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "Architecture":
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


@dataclass
class ChannelCNN:
    kernel_size: int
    seed: int
    network: Network
    architecture: Architecture = field(default_factory=Architecture)

    def params(self) -> list[np.ndarray]:
        return self.network.params()


def build_channel(kernel_size: int, seed: int, architecture: Architecture | None = None) -> ChannelCNN:
    if kernel_size not in KERNEL_SIZES:
        raise ValueError(f"kernel size must be one of {KERNEL_SIZES}, got {kernel_size}")
    arch = architecture or Architecture()
    rng = np.random.default_rng(seed)
    f1, f2 = arch.filters
    d1, d2 = arch.dense
    r1, r2, r3, r4 = arch.dropout
    conv_len = arch.input_length - kernel_size + 1
    if conv_len < 1 or conv_len % arch.pool:
        raise ShapeError(f"input length {arch.input_length} incompatible with kernel {kernel_size}")
    flat = (conv_len // arch.pool) * f2
    layers = [
        Conv1D.init(kernel_size, 1, f1, rng, "valid", "conv1d_1"),
        ReLU("relu_1"),
        Conv1D.init(kernel_size, f1, f2, rng, "same", "conv1d_2"),
        ReLU("relu_2"),
        Dropout(r1, "dropout_1"),
        MaxPool1D(arch.pool, "max_pooling1d"),
        Flatten("flatten"),
        Dropout(r2, "dropout_2"),
        Dense.init(flat, d1, rng, "dense_1"),
        Dropout(r3, "dropout_3"),
        Dense.init(d1, d2, rng, "dense_2"),
        Dropout(r4, "dropout_4"),
        Dense.init(d2, arch.n_classes, rng, "dense_out"),
    ]
    return ChannelCNN(kernel_size, seed, Network(layers, arch.input_length), arch)


def _check_training_set(X, y, input_length):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(X) == 0:
        raise ValueError("empty training set")
    if X.ndim != 2 or X.shape[1] != input_length:
        raise ShapeError(f"features must be (n, {input_length}), got {X.shape}")
    if len(y) != len(X):
        raise ValueError("features and labels differ in length")
    return X, y


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def train_channel(
    channel: ChannelCNN, X, y, cfg: TrainConfig, epochs: int | None = None
) -> tuple[ChannelCNN, list[float]]:
    """Phase-1 training of one channel, in place. Returns the channel and
    the per-epoch mean training loss."""
    X, y = _check_training_set(X, y, channel.architecture.input_length)
    rng = np.random.default_rng([cfg.seed, channel.kernel_size])
    opt = RmsPropState(cfg.learning_rate, cfg.rho, cfg.epsilon)
    net = channel.network
    params = net.params()
    history = []
    for _ in range(cfg.epochs if epochs is None else epochs):
        total = 0.0
        for idx in _batches(len(X), cfg.batch_size, rng):
            loss, grads, _ = net.loss_and_grads(X[idx], y[idx], train=True, rng=rng)
            rmsprop_step(params, grads, opt)
            total += loss * len(idx)
        history.append(total / len(X))
    return channel, history


@dataclass
class McnnModel:
    channels: list[ChannelCNN]
    fusion: FusionMode = FusionMode.AVG

    def __post_init__(self):
        self.fusion = FusionMode(self.fusion)
        if [c.kernel_size for c in self.channels] != list(KERNEL_SIZES):
            raise ValueError("an MCNN model holds exactly four channels with kernels 1, 2, 3, 4")

    @property
    def input_length(self) -> int:
        return self.channels[0].architecture.input_length


def build_model(seeds: Sequence[int], fusion: FusionMode | str = FusionMode.AVG,
                architecture: Architecture | None = None) -> McnnModel:
    return McnnModel(
        [build_channel(k, s, architecture) for k, s in zip(KERNEL_SIZES, seeds)], FusionMode(fusion)
    )


def fuse(channel_probs, mode: FusionMode | str = FusionMode.AVG) -> np.ndarray:
    """Combine the four channel probability vectors (leading axis = channel)."""
    p = np.asarray(channel_probs, dtype=np.float64)
    if p.shape[0] != len(KERNEL_SIZES):
        raise ValueError(f"fusion needs {len(KERNEL_SIZES)} channel outputs, got {p.shape[0]}")
    mode = FusionMode(mode)
    if mode is FusionMode.AVG:
        return p.mean(axis=0)
    if mode is FusionMode.SUM:
        return p.sum(axis=0)
    return p.max(axis=0)


def decide(scores: np.ndarray) -> np.ndarray | int:
    # np.argmax returns the first maximum, i.e. the lowest class index on ties
    out = np.argmax(scores, axis=-1)
    return int(out) if np.ndim(out) == 0 else out


def fused_loss_and_grads(model: McnnModel, X, y, train=False, rng=None, masks=None):
    """Mean cross-entropy of the averaged channel probabilities and the
    gradients for every channel's parameters."""
    y = np.asarray(y, dtype=np.int64)
    passes = [
        ch.network.forward_pass(X, train, rng, None if masks is None else masks[i])
        for i, ch in enumerate(model.channels)
    ]
    fused = np.mean([fp.probs for fp in passes], axis=0)
    loss = float(cross_entropy(fused, y).mean())
    rows = np.arange(len(y))
    dfused = np.zeros_like(fused)
    dfused[rows, y] = -1.0 / (np.maximum(fused[rows, y], 1e-12) * len(y))
    dp = dfused / len(passes)
    grads = []
    for ch, fp in zip(model.channels, passes):
        # softmax Jacobian-vector product
        dlogits = fp.probs * (dp - (dp * fp.probs).sum(axis=1, keepdims=True))
        grads.append(ch.network.backward(fp, dlogits))
    return loss, grads, passes


def train_joint(model: McnnModel, X, y, cfg: TrainConfig, epochs: int | None = None) -> tuple[McnnModel, list[float]]:
    """Phase-2 end-to-end training through the averaged output, in place."""
    if model.fusion is FusionMode.MAX:
        raise ValueError("max fusion is inference-only; train jointly with avg or sum")
    X, y = _check_training_set(X, y, model.input_length)
    rng = np.random.default_rng([cfg.seed, 0])
    opts = [RmsPropState(cfg.learning_rate, cfg.rho, cfg.epsilon) for _ in model.channels]
    params = [ch.params() for ch in model.channels]
    history = []
    for _ in range(cfg.joint_epochs if epochs is None else epochs):
        total = 0.0
        for idx in _batches(len(X), cfg.batch_size, rng):
            loss, grads, _ = fused_loss_and_grads(model, X[idx], y[idx], train=True, rng=rng)
            for p, g, opt in zip(params, grads, opts):
                rmsprop_step(p, g, opt)
            total += loss * len(idx)
        history.append(total / len(X))
    return model, history


@dataclass
class TrainingLog:
    channel_losses: dict[int, list[float]]
    joint_losses: list[float]

    def to_dict(self) -> dict:
        return {"channel_losses": {str(k): v for k, v in self.channel_losses.items()},
                "joint_losses": self.joint_losses}


def train_mcnn(X, y, cfg: TrainConfig, seeds: Sequence[int], fusion=FusionMode.AVG,
               architecture: Architecture | None = None) -> tuple[McnnModel, TrainingLog]:
    """Build four channels, train each alone, then train them jointly.

    The joint phase always optimizes the averaged probabilities; the requested
    fusion mode is applied at inference.
    """
    model = build_model(seeds, FusionMode.AVG, architecture)
    losses = {}
    for ch in model.channels:
        _, losses[ch.kernel_size] = train_channel(ch, X, y, cfg)
    _, joint = train_joint(model, X, y, cfg)
    model.fusion = FusionMode(fusion)
    return model, TrainingLog(losses, joint)


def channel_probs(model: McnnModel, X, batch_size: int = 256) -> np.ndarray:
    """Inference-mode probabilities, shape ``(4, n, 3)``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None]
    if X.shape[1] != model.input_length:
        raise ShapeError(f"expected feature length {model.input_length}, got {X.shape[1]}")
    out = np.zeros((len(model.channels), len(X), N_CLASSES))
    for start in range(0, len(X), batch_size):
        sl = slice(start, start + batch_size)
        for i, ch in enumerate(model.channels):
            out[i, sl] = ch.network.forward(X[sl])
    return out


def predict_batch(model: McnnModel, X) -> tuple[np.ndarray, np.ndarray]:
    scores = fuse(channel_probs(model, X), model.fusion)
    return decide(scores), scores


def predict(model: McnnModel, x) -> tuple[int, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError("predict takes a single feature vector; use predict_batch")
    classes, scores = predict_batch(model, x)
    return int(classes[0]), scores[0]


def save_bundle(model: McnnModel, directory: str | Path, config: TrainConfig | None = None,
                extra: dict | None = None) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for ch in model.channels:
        name = f"channel_k{ch.kernel_size}.bin"
        save_params(directory / name, ch.params())
        files.append({"kernel_size": ch.kernel_size, "seed": ch.seed, "file": name})
    manifest = {
        "format": "nepmcnn-bundle",
        "version": 1,
        "fusion": model.fusion.value,
        "architecture": model.channels[0].architecture.to_dict(),
        "channels": files,
        "train_config": asdict(config) if config else None,
    }
    manifest.update(extra or {})
    with open(directory / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def load_bundle(directory: str | Path) -> tuple[McnnModel, dict]:
    directory = Path(directory)
    with open(directory / "manifest.json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    arch = Architecture.from_dict(manifest["architecture"])
    channels = []
    for entry in manifest["channels"]:
        ch = build_channel(entry["kernel_size"], entry["seed"], arch)
        arrays = load_params(directory / entry["file"])
        params = ch.params()
        if len(arrays) != len(params) or any(a.shape != p.shape for a, p in zip(arrays, params)):
            raise ShapeError(f"{entry['file']}: parameter shapes do not match the architecture")
        for p, a in zip(params, arrays):
            p[...] = a
        channels.append(ch)
    return McnnModel(channels, FusionMode(manifest["fusion"])), manifest
