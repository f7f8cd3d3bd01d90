"""From-scratch differentiable networks for the robustness benchmark.

Three architectures share a softmax-cross-entropy head:

    classical_cnn   Conv2D(k=2, s=2, 4 filters) + ReLU -> Flatten -> head
    classical_fc    Flatten -> head, straight from raw pixels
    qunn            Flatten -> head, fed pre-computed quanvolved maps

On MNIST the head is Dense(10) + Softmax; on FMNIST a Dense(128) + ReLU +
Dropout(0.3) block is inserted before it.  Weights use seeded Glorot-uniform
initialization with zero biases, so the same seed always rebuilds the same
model.

Tensors are row-major numpy arrays; images are (H, W, C) and internal layer
code works on (N, ...) batches.  Layer forward/backward are functional
(caches are passed, not stored), so inference and input gradients on a
frozen model are safe to run concurrently; only train() mutates parameters.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np

QNNM_MAGIC = b"QNNM"
QNNM_VERSION = 1
N_CLASSES = 10


class Architecture(Enum):
    CLASSICAL_CNN = "classical_cnn"
    CLASSICAL_FC = "classical_fc"
    QUNN = "qunn"


# ---------------------------------------------------------------------------
# Layers.  forward(x, training, rng) -> (y, cache); backward(dout, cache) ->
# (dx, param_grads).  Layers without parameters return empty grad dicts.
# ---------------------------------------------------------------------------


def _glorot(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Conv2D:
    def __init__(self, kernel_size, stride, in_channels, out_channels, rng):
        self.kernel_size = kernel_size
        self.stride = stride
        fan_in = kernel_size * kernel_size * in_channels
        fan_out = kernel_size * kernel_size * out_channels
        self.weights = _glorot(
            rng, (kernel_size, kernel_size, in_channels, out_channels), fan_in, fan_out
        )
        self.bias = np.zeros(out_channels)

    def params(self):
        return {"weights": self.weights, "bias": self.bias}

    def out_hw(self, h, w):
        k, s = self.kernel_size, self.stride
        return (h - k) // s + 1, (w - k) // s + 1

    def forward(self, x, training=False, rng=None):
        n, h, w, _ = x.shape
        k, s = self.kernel_size, self.stride
        oh, ow = self.out_hw(h, w)
        out = np.broadcast_to(self.bias, (n, oh, ow, self.bias.shape[0])).copy()
        for i in range(k):
            for j in range(k):
                patch = x[:, i : i + oh * s : s, j : j + ow * s : s, :]
                out += np.einsum("nhwc,cf->nhwf", patch, self.weights[i, j])
        return out, x

    def backward(self, dout, cache):
        x = cache
        k, s = self.kernel_size, self.stride
        oh, ow = dout.shape[1], dout.shape[2]
        dw = np.zeros_like(self.weights)
        dx = np.zeros_like(x)
        for i in range(k):
            for j in range(k):
                patch = x[:, i : i + oh * s : s, j : j + ow * s : s, :]
                dw[i, j] = np.einsum("nhwc,nhwf->cf", patch, dout)
                dx[:, i : i + oh * s : s, j : j + ow * s : s, :] += np.einsum(
                    "nhwf,cf->nhwc", dout, self.weights[i, j]
                )
        return dx, {"weights": dw, "bias": dout.sum(axis=(0, 1, 2))}


class Dense:
    def __init__(self, in_features, out_features, rng):
        self.weights = _glorot(rng, (in_features, out_features), in_features, out_features)
        self.bias = np.zeros(out_features)

    def params(self):
        return {"weights": self.weights, "bias": self.bias}

    def forward(self, x, training=False, rng=None):
        return x @ self.weights + self.bias, x

    def backward(self, dout, cache):
        dx = dout @ self.weights.T
        return dx, {"weights": cache.T @ dout, "bias": dout.sum(axis=0)}


class ReLU:
    def params(self):
        return {}

    def forward(self, x, training=False, rng=None):
        mask = x > 0
        return x * mask, mask

    def backward(self, dout, cache):
        return dout * cache, {}


class Dropout:
    """Inverted dropout: scaled mask at train time, identity at eval."""

    def __init__(self, drop_prob):
        if not 0.0 <= drop_prob < 1.0:
            raise ValueError(f"drop_prob must be in [0, 1), got {drop_prob}")
        self.drop_prob = drop_prob

    def params(self):
        return {}

    def forward(self, x, training=False, rng=None):
        if not training or self.drop_prob == 0.0:
            return x, None
        if rng is None:
            raise ValueError("dropout in training mode needs a seeded generator")
        mask = (rng.random(x.shape) >= self.drop_prob) / (1.0 - self.drop_prob)
        return x * mask, mask

    def backward(self, dout, cache):
        return dout if cache is None else dout * cache, {}


class Flatten:
    def params(self):
        return {}

    def forward(self, x, training=False, rng=None):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dout, cache):
        return dout.reshape(cache), {}


class Softmax:
    def params(self):
        return {}

    def forward(self, x, training=False, rng=None):
        shifted = x - x.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        p = e / e.sum(axis=-1, keepdims=True)
        return p, p

    def backward(self, dout, cache):
        p = cache
        return p * (dout - np.sum(dout * p, axis=-1, keepdims=True)), {}


class Model:
    """Layer stack ending in Softmax, plus the seed it was built from."""

    def __init__(self, layers, input_shape, arch, dataset, rng_seed):
        self.layers = layers
        self.input_shape = tuple(input_shape)
        self.arch = arch
        self.dataset = dataset
        self.rng_seed = rng_seed

    def param_entries(self):
        """(layer_index, name, array) for every parameter, in layer order."""
        for li, layer in enumerate(self.layers):
            for name, arr in layer.params().items():
                yield li, name, arr

    def parameter_count(self):
        return sum(arr.size for _, _, arr in self.param_entries())


def build_model(arch: Architecture, dataset: str, seed: int) -> Model:
    """Assemble one of the three architectures with seeded initialization."""
    arch = Architecture(arch)
    dataset = dataset.lower()
    if dataset not in ("mnist", "fmnist"):
        raise ValueError(f"unknown dataset {dataset!r}")
    rng = np.random.default_rng(seed)

    layers: list = []
    if arch is Architecture.CLASSICAL_CNN:
        input_shape = (28, 28, 1)
        layers += [Conv2D(2, 2, 1, 4, rng), ReLU()]
        flat = 14 * 14 * 4
    elif arch is Architecture.QUNN:
        input_shape = (14, 14, 4)
        flat = 14 * 14 * 4
    else:
        input_shape = (28, 28, 1)
        flat = 28 * 28
    layers.append(Flatten())
    if dataset == "fmnist":
        layers += [Dense(flat, 128, rng), ReLU(), Dropout(0.3)]
        flat = 128
    layers += [Dense(flat, N_CLASSES, rng), Softmax()]
    return Model(layers, input_shape, arch, dataset, seed)


# ---------------------------------------------------------------------------
# Forward / loss / gradients
# ---------------------------------------------------------------------------


def _forward_batch(model: Model, x: np.ndarray, training=False, rng=None):
    """Run the stack on a batch; returns (probabilities, caches)."""
    caches = []
    out = np.asarray(x, dtype=float)
    for layer in model.layers:
        out, cache = layer.forward(out, training=training, rng=rng)
        caches.append(cache)
    return out, caches


def forward(model: Model, x: np.ndarray, training=False, rng=None) -> np.ndarray:
    """Class probabilities for one image (H, W, C) or a batch (N, H, W, C)."""
    x = np.asarray(x, dtype=float)
    single = x.shape == model.input_shape
    if single:
        x = x[None]
    elif x.shape[1:] != model.input_shape:
        raise ValueError(
            f"input shape {x.shape} does not match model input {model.input_shape}"
        )
    probs, _ = _forward_batch(model, x, training=training, rng=rng)
    return probs[0] if single else probs


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-likelihood of the true classes."""
    probs = np.atleast_2d(probs)
    labels = np.atleast_1d(labels)
    picked = np.clip(probs[np.arange(len(labels)), labels], 1e-12, None)
    return float(-np.log(picked).mean())


def loss(model: Model, x: np.ndarray, label: int) -> float:
    return cross_entropy(forward(model, x), np.array([label]))


def _backward_from_logits(model: Model, dlogits: np.ndarray, caches):
    """Backpropagate from the pre-softmax gradient; returns (dx, grads list)."""
    if not isinstance(model.layers[-1], Softmax):
        raise ValueError("model must end in Softmax")
    grads: list = [None] * len(model.layers)
    dout = dlogits
    for li in range(len(model.layers) - 2, -1, -1):
        dout, g = model.layers[li].backward(dout, caches[li])
        grads[li] = g
    return dout, grads


def input_gradient(model: Model, x: np.ndarray, label: int) -> np.ndarray:
    """Exact d(cross-entropy)/d(input); dropout disabled."""
    x = np.asarray(x, dtype=float)
    if x.shape != model.input_shape:
        raise ValueError(
            f"input shape {x.shape} does not match model input {model.input_shape}"
        )
    probs, caches = _forward_batch(model, x[None], training=False)
    dlogits = probs.copy()
    dlogits[0, label] -= 1.0
    dx, _ = _backward_from_logits(model, dlogits, caches)
    return dx[0]


def evaluate(model: Model, inputs: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of argmax predictions equal to the labels."""
    inputs = np.asarray(inputs, dtype=float)
    labels = np.asarray(labels)
    if len(inputs) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    probs, _ = _forward_batch(model, inputs, training=False)
    return float(np.mean(np.argmax(probs, axis=1) == labels))


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 4
    epochs: int = 30
    learning_rate: float = 1e-3
    optimizer: str = "adam"  # "adam" | "sgd"
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass(frozen=True)
class EpochStats:
    loss: float
    accuracy: float


class _Adam:
    def __init__(self, lr):
        self.lr = lr
        self.beta1, self.beta2, self.eps = 0.9, 0.999, 1e-8
        self.m: dict = {}
        self.v: dict = {}
        self.t = 0

    def step(self, entries):
        self.t += 1
        for key, param, grad in entries:
            m = self.m.setdefault(key, np.zeros_like(param))
            v = self.v.setdefault(key, np.zeros_like(param))
            m += (1 - self.beta1) * (grad - m)
            v += (1 - self.beta2) * (grad * grad - v)
            m_hat = m / (1 - self.beta1**self.t)
            v_hat = v / (1 - self.beta2**self.t)
            param -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class _SGD:
    def __init__(self, lr):
        self.lr = lr

    def step(self, entries):
        for _key, param, grad in entries:
            param -= self.lr * grad


def train(model: Model, inputs, labels, cfg: TrainConfig):
    """Minimize softmax cross-entropy; returns (model, per-epoch stats).

    Deterministic for a fixed cfg.seed: shuffling and dropout masks come
    from one seeded generator.  The model is updated in place.
    """
    inputs = np.asarray(inputs, dtype=float)
    labels = np.asarray(labels)
    if len(inputs) == 0:
        raise ValueError("cannot train on an empty dataset")
    if len(inputs) != len(labels):
        raise ValueError(f"{len(inputs)} inputs vs {len(labels)} labels")
    if labels.min() < 0 or labels.max() >= N_CLASSES:
        raise ValueError("labels must lie in [0, 10)")

    rng = np.random.default_rng(cfg.seed)
    opt = _Adam(cfg.learning_rate) if cfg.optimizer == "adam" else _SGD(cfg.learning_rate)
    trace = []
    n = len(inputs)
    for _epoch in range(cfg.epochs):
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb, yb = inputs[idx], labels[idx]
            probs, caches = _forward_batch(model, xb, training=True, rng=rng)
            batch_losses.append(cross_entropy(probs, yb))
            dlogits = probs.copy()
            dlogits[np.arange(len(yb)), yb] -= 1.0
            dlogits /= len(yb)
            _, grads = _backward_from_logits(model, dlogits, caches)
            entries = [
                ((li, name), arr, grads[li][name])
                for li, name, arr in model.param_entries()
            ]
            opt.step(entries)
        trace.append(
            EpochStats(float(np.mean(batch_losses)), evaluate(model, inputs, labels))
        )
    return model, trace


# ---------------------------------------------------------------------------
# Checkpoints: QNNM container, little-endian.  Header (magic, version u32,
# entry count u32); per entry ndim u32, dims u32 each, row-major float32.
# ---------------------------------------------------------------------------


def save_model(model: Model, path) -> None:
    entries = list(model.param_entries())
    with open(path, "wb") as fh:
        fh.write(QNNM_MAGIC)
        fh.write(struct.pack("<II", QNNM_VERSION, len(entries)))
        for _li, _name, arr in entries:
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_model(model: Model, path) -> Model:
    """Fill an architecturally identical model with checkpointed weights."""
    entries = list(model.param_entries())
    with open(path, "rb") as fh:
        if fh.read(4) != QNNM_MAGIC:
            raise ValueError(f"{path}: bad checkpoint magic")
        version, count = struct.unpack("<II", fh.read(8))
        if version != QNNM_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        if count != len(entries):
            raise ValueError(
                f"{path}: checkpoint has {count} tensors, model has {len(entries)}"
            )
        for _li, name, arr in entries:
            (ndim,) = struct.unpack("<I", fh.read(4))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            if shape != arr.shape:
                raise ValueError(
                    f"{path}: shape mismatch for {name}: {shape} vs {arr.shape}"
                )
            n_bytes = int(np.prod(shape)) * 4
            buf = fh.read(n_bytes)
            if len(buf) != n_bytes:
                raise ValueError(f"{path}: truncated checkpoint")
            arr[...] = np.frombuffer(buf, dtype="<f4").reshape(shape)
    return model
