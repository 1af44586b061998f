"""A small numpy neural-network core: 1-D convolution, ReLU, dropout,
max pooling, dense layers, softmax cross-entropy and RMSProp.

Activations are batched arrays of shape ``(batch, length, channels)`` for the
convolutional part and ``(batch, features)`` after flattening. Everything is
float64. Randomness (initialization, dropout) always comes from an explicit
``numpy.random.Generator``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

PROB_FLOOR = 1e-12


class ShapeError(ValueError):
    """Raised when an activation does not fit the layer it is fed to."""


# ---------------------------------------------------------------------------
# functional ops


def _as_batch(x: np.ndarray, ndim: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == ndim - 1:
        return x[None], True
    return x, False


def same_padding(kernel_size: int) -> tuple[int, int]:
    # extra zero goes on the right for even kernels
    left = (kernel_size - 1) // 2
    return left, kernel_size - 1 - left


def conv1d_forward(
    x: np.ndarray, weights: np.ndarray, bias: np.ndarray, padding: str = "valid"
) -> np.ndarray:
    """Stride-1 1-D convolution (cross-correlation).

    ``x`` is ``(L, Cin)`` or ``(B, L, Cin)``, ``weights`` is ``(k, Cin, f)``.
    With ``padding="valid"`` the output length is ``L - k + 1``; with
    ``"same"`` it is ``L``.
    """
    y, _ = _conv1d(x, weights, bias, padding)
    return y


def _conv1d(x, weights, bias, padding):
    xb, squeeze = _as_batch(x, 3)
    k, cin, f = weights.shape
    B, L, C = xb.shape
    if C != cin:
        raise ShapeError(f"conv1d: input has {C} channels, kernel expects {cin}")
    if padding == "same":
        left, right = same_padding(k)
    elif padding == "valid":
        left = right = 0
        if L < k:
            raise ShapeError(f"conv1d: input length {L} shorter than kernel {k}")
    else:
        raise ValueError(f"unknown padding {padding!r}")
    xp = np.pad(xb, ((0, 0), (left, right), (0, 0))) if left or right else xb
    lp = xp.shape[1]
    lout = lp - k + 1
    # one product against every tap, then shift-and-add: out[i] = sum_a z[i + a, a]
    z = (xp.reshape(B * lp, cin) @ weights.transpose(1, 0, 2).reshape(cin, k * f)).reshape(B, lp, k, f)
    y = z[:, 0:lout, 0, :] + bias
    for a in range(1, k):
        y += z[:, a : a + lout, a, :]
    return (y[0] if squeeze else y), (xp, left, L)


def _conv1d_backward(dy, weights, cache, need_dx=True):
    xp, left, L = cache
    k, cin, f = weights.shape
    B, lp, _ = xp.shape
    lout = dy.shape[1]
    dz = np.zeros((B, lp, k, f))
    for a in range(k):
        dz[:, a : a + lout, a, :] = dy
    dz = dz.reshape(B * lp, k * f)
    dw = (xp.reshape(B * lp, cin).T @ dz).reshape(cin, k, f).transpose(1, 0, 2)
    db = dy.sum(axis=(0, 1))
    if not need_dx:
        return None, np.ascontiguousarray(dw), db
    dxp = (dz @ weights.transpose(1, 0, 2).reshape(cin, k * f).T).reshape(B, lp, cin)
    return dxp[:, left : left + L, :], np.ascontiguousarray(dw), db


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def maxpool1d_forward(x: np.ndarray, pool: int) -> np.ndarray:
    """Non-overlapping max pooling along the length axis; ``pool=1`` is the identity."""
    y, _ = _maxpool(x, pool)
    return y


def _maxpool(x, pool):
    if pool < 1:
        raise ValueError("pool must be >= 1")
    xb, squeeze = _as_batch(x, 3)
    B, L, C = xb.shape
    if L % pool:
        raise ShapeError(f"maxpool1d: pool {pool} does not divide length {L}")
    if pool == 1:
        return (xb[0] if squeeze else xb), None
    windows = xb.reshape(B, L // pool, pool, C)
    arg = windows.argmax(axis=2)
    y = np.take_along_axis(windows, arg[:, :, None, :], axis=2)[:, :, 0, :]
    return (y[0] if squeeze else y), (arg, xb.shape)


def _maxpool_backward(dy, pool, cache):
    if pool == 1:
        return dy
    arg, shape = cache
    B, L, C = shape
    dx = np.zeros((B, L // pool, pool, C))
    np.put_along_axis(dx, arg[:, :, None, :], dy[:, :, None, :], axis=2)
    return dx.reshape(shape)


def dense_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != weights.shape[0]:
        raise ShapeError(f"dense: input width {x.shape[-1]} != {weights.shape[0]}")
    return x @ weights + bias


def dropout_mask(shape, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout mask: 0 with probability ``rate``, else ``1/(1-rate)``."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return np.ones(shape)
    return (rng.random(shape) >= rate) / (1.0 - rate)


def dropout(x: np.ndarray, rate: float, train: bool, rng: np.random.Generator | None = None):
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return np.asarray(x, dtype=np.float64)
    if rng is None:
        raise ValueError("train-mode dropout needs an rng")
    return x * dropout_mask(np.shape(x), rate, rng)


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probs: np.ndarray, labels) -> np.ndarray | float:
    """``-ln(max(p[label], 1e-12))``; vectorized over a leading batch axis."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim == 1:
        return float(-np.log(max(probs[int(labels)], PROB_FLOOR)))
    labels = np.asarray(labels, dtype=np.int64)
    picked = probs[np.arange(len(labels)), labels]
    return -np.log(np.maximum(picked, PROB_FLOOR))


def glorot_uniform(shape: tuple[int, ...], fan_in: int, fan_out: int, rng: np.random.Generator):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


# ---------------------------------------------------------------------------
# layers


@dataclass
class Conv1D:
    weights: np.ndarray  # (k, in_channels, filters)
    bias: np.ndarray
    padding: str = "valid"
    name: str = "conv1d"

    kind = "Conv1D"

    @classmethod
    def init(cls, kernel_size, in_channels, filters, rng, padding="valid", name="conv1d"):
        w = glorot_uniform(
            (kernel_size, in_channels, filters), kernel_size * in_channels, kernel_size * filters, rng
        )
        return cls(w, np.zeros(filters), padding, name)

    @property
    def kernel_size(self) -> int:
        return self.weights.shape[0]

    @property
    def filters(self) -> int:
        return self.weights.shape[2]

    def params(self):
        return [self.weights, self.bias]

    def output_shape(self, shape):
        L, C = shape
        if C != self.weights.shape[1]:
            raise ShapeError(f"{self.name}: expected {self.weights.shape[1]} channels, got {C}")
        if self.padding == "valid" and L < self.kernel_size:
            raise ShapeError(f"{self.name}: length {L} < kernel {self.kernel_size}")
        lout = L if self.padding == "same" else L - self.kernel_size + 1
        return (lout, self.filters)

    def forward(self, x, train, rng, mask=None):
        try:
            return _conv1d(x, self.weights, self.bias, self.padding)
        except ShapeError as exc:
            raise ShapeError(f"{self.name}: {exc}") from None

    def backward(self, dy, cache, need_dx=True):
        dx, dw, db = _conv1d_backward(dy, self.weights, cache, need_dx)
        return dx, [dw, db]


@dataclass
class Dense:
    weights: np.ndarray  # (in, out)
    bias: np.ndarray
    name: str = "dense"

    kind = "Dense"

    @classmethod
    def init(cls, n_in, n_out, rng, name="dense"):
        return cls(glorot_uniform((n_in, n_out), n_in, n_out, rng), np.zeros(n_out), name)

    def params(self):
        return [self.weights, self.bias]

    def output_shape(self, shape):
        if shape != (self.weights.shape[0],):
            raise ShapeError(f"{self.name}: expected input ({self.weights.shape[0]},), got {shape}")
        return (self.weights.shape[1],)

    def forward(self, x, train, rng, mask=None):
        if x.shape[1:] != (self.weights.shape[0],):
            raise ShapeError(f"{self.name}: expected input width {self.weights.shape[0]}, got {x.shape[1:]}")
        return x @ self.weights + self.bias, x

    def backward(self, dy, x, need_dx=True):
        dx = dy @ self.weights.T if need_dx else None
        return dx, [x.T @ dy, dy.sum(axis=0)]


@dataclass
class ReLU:
    name: str = "relu"

    def params(self):
        return []

    def output_shape(self, shape):
        return shape

    def forward(self, x, train, rng, mask=None):
        return relu(x), x > 0

    def backward(self, dy, positive, need_dx=True):
        return dy * positive, []


@dataclass
class Dropout:
    rate: float
    name: str = "dropout"

    def params(self):
        return []

    def output_shape(self, shape):
        return shape

    def forward(self, x, train, rng, mask=None):
        if not train or self.rate == 0.0:
            return x, None
        if mask is None:
            mask = dropout_mask(x.shape, self.rate, rng)
        return x * mask, mask

    def backward(self, dy, mask, need_dx=True):
        return (dy if mask is None else dy * mask), []


@dataclass
class MaxPool1D:
    pool: int = 1
    name: str = "max_pooling1d"

    def params(self):
        return []

    def output_shape(self, shape):
        L, C = shape
        if L % self.pool:
            raise ShapeError(f"{self.name}: pool {self.pool} does not divide length {L}")
        return (L // self.pool, C)

    def forward(self, x, train, rng, mask=None):
        try:
            return _maxpool(x, self.pool)
        except ShapeError as exc:
            raise ShapeError(f"{self.name}: {exc}") from None

    def backward(self, dy, cache, need_dx=True):
        return _maxpool_backward(dy, self.pool, cache), []


@dataclass
class Flatten:
    name: str = "flatten"

    def params(self):
        return []

    def output_shape(self, shape):
        return (int(np.prod(shape)),)

    def forward(self, x, train, rng, mask=None):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dy, shape, need_dx=True):
        return dy.reshape(shape), []


# ---------------------------------------------------------------------------
# sequential network


@dataclass
class ForwardPass:
    logits: np.ndarray
    probs: np.ndarray
    caches: list
    masks: dict[int, np.ndarray]


@dataclass
class Network:
    """Sequential stack ending in logits; softmax is applied on top."""

    layers: list
    input_length: int

    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params()]

    def n_params(self) -> int:
        return sum(p.size for p in self.params())

    def layer_shapes(self) -> list[tuple[str, tuple[int, ...]]]:
        """Static per-layer output shapes (batch axis omitted)."""
        shape: tuple[int, ...] = (self.input_length, 1)
        out = [("input", shape)]
        for layer in self.layers:
            shape = layer.output_shape(shape)
            out.append((layer.name, shape))
        out.append(("softmax", shape))
        return out

    def _input(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None]
        if x.ndim == 2:
            x = x[:, :, None]
        if x.shape[1:] != (self.input_length, 1):
            raise ShapeError(f"input: expected length {self.input_length}, got shape {x.shape[1:]}")
        return x

    def forward_pass(
        self,
        x,
        train: bool = False,
        rng: np.random.Generator | None = None,
        masks: dict[int, np.ndarray] | None = None,
        trace: list | None = None,
    ) -> ForwardPass:
        """Run the stack, keeping what backward needs.

        In train mode fresh dropout masks are drawn from ``rng`` unless
        ``masks`` (as returned by a previous pass) are given.
        """
        if train and rng is None and masks is None:
            raise ValueError("train mode needs an rng or explicit dropout masks")
        h = self._input(x)
        caches, used = [], {}
        for i, layer in enumerate(self.layers):
            h, cache = layer.forward(h, train, rng, None if masks is None else masks.get(i))
            if isinstance(layer, Dropout) and cache is not None:
                used[i] = cache
            caches.append(cache)
            if trace is not None:
                trace.append((layer.name, h.shape[1:]))
        probs = softmax(h)
        if trace is not None:
            trace.append(("softmax", probs.shape[1:]))
        return ForwardPass(h, probs, caches, used)

    def forward(self, x, train: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
        """Class probabilities, shape ``(batch, n_classes)``."""
        return self.forward_pass(x, train, rng).probs

    def backward(self, fp: ForwardPass, dlogits: np.ndarray) -> list[np.ndarray]:
        """Gradients of a scalar loss w.r.t. ``params()``, given d loss / d logits."""
        grads_rev = []
        dy = dlogits
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            dy, g = layer.backward(dy, fp.caches[i], need_dx=i > 0)
            grads_rev.append(g)
        return [g for layer_grads in reversed(grads_rev) for g in layer_grads]

    def loss_and_grads(self, x, labels, train=False, rng=None, masks=None):
        """Mean cross-entropy over the batch and its exact parameter gradients."""
        labels = np.asarray(labels, dtype=np.int64)
        fp = self.forward_pass(x, train, rng, masks)
        loss = float(cross_entropy(fp.probs, labels).mean())
        onehot = np.eye(fp.probs.shape[1])[labels]
        grads = self.backward(fp, (fp.probs - onehot) / len(labels))
        return loss, grads, fp

    def copy(self) -> "Network":
        import copy

        return copy.deepcopy(self)


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class RmsPropState:
    learning_rate: float = 1e-5
    rho: float = 0.9
    epsilon: float = 1e-7
    accumulators: list[np.ndarray] | None = field(default=None, repr=False)


def rmsprop_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: RmsPropState):
    """In-place RMSProp update; returns ``(params, state)`` for convenience."""
    if len(params) != len(grads):
        raise ShapeError("rmsprop: params and grads differ in count")
    if state.accumulators is None:
        state.accumulators = [np.zeros_like(p) for p in params]
    for p, g, acc in zip(params, grads, state.accumulators):
        if p.shape != g.shape or acc.shape != p.shape:
            raise ShapeError(f"rmsprop: shape mismatch {p.shape} vs {g.shape}")
        tmp = np.multiply(g, g)
        tmp *= 1.0 - state.rho
        acc *= state.rho
        acc += tmp
        np.sqrt(acc, out=tmp)
        tmp += state.epsilon
        np.divide(g, tmp, out=tmp)
        tmp *= state.learning_rate
        p -= tmp
    return params, state


# ---------------------------------------------------------------------------
# binary parameter container: magic, version, array count, per-array shapes,
# then every array as little-endian float64 in order

MAGIC = b"NEPMCNN\x00"
FORMAT_VERSION = 1


def save_params(path: str | Path, arrays: Sequence[np.ndarray]) -> None:
    header = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(arrays))]
    for a in arrays:
        header.append(struct.pack("<I", a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape))
    with open(path, "wb") as fh:
        fh.write(b"".join(header))
        for a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_params(path: str | Path) -> list[np.ndarray]:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ValueError(f"{path}: not a parameter file")
    version, n = struct.unpack_from("<II", data, 8)
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    off = 16
    shapes = []
    for _ in range(n):
        (ndim,) = struct.unpack_from("<I", data, off)
        shapes.append(struct.unpack_from(f"<{ndim}I", data, off + 4))
        off += 4 + 4 * ndim
    arrays = []
    for shape in shapes:
        size = int(np.prod(shape))
        arrays.append(np.frombuffer(data, dtype="<f8", count=size, offset=off).reshape(shape).copy())
        off += 8 * size
    if off != len(data):
        raise ValueError(f"{path}: trailing or missing bytes")
    return arrays
