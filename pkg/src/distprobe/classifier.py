"""Classifier handles: the uniform black-box interface plus the builtin dense net.

Every backend exposes the same surface: probability prediction over a
batch, label prediction, an optional input-gradient of the prediction
loss, and a monotonic query counter for budget accounting. The builtin
backend is a small dense feed-forward net evaluated in numpy with an
analytic gradient; the subprocess backend lives in wire.py.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .containers import load_container, save_container

DEFAULT_BATCH_CAP = 256
_ACTIVATIONS = ("relu", "none")


class GradientUnsupportedError(RuntimeError):
    """The backend advertised no gradient capability."""


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray  # [out, in]
    bias: np.ndarray     # [out]
    activation: str      # relu | none


@dataclass(frozen=True)
class BuiltinNet:
    layers: tuple[Layer, ...]

    @property
    def in_dim(self) -> int:
        return self.layers[0].weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weights.shape[0]


def make_net(layers) -> BuiltinNet:
    """Validate layer chaining and finiteness, returning an immutable net."""
    packed = []
    prev_out = None
    for i, (w, b, act) in enumerate(layers):
        w = np.asarray(w, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if w.ndim != 2 or b.ndim != 1 or b.shape[0] != w.shape[0]:
            raise ValueError(f"layer {i}: weight [out, in] and bias [out] required")
        if act not in _ACTIVATIONS:
            raise ValueError(f"layer {i}: unknown activation {act!r}")
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise ValueError(f"layer {i}: non-finite parameters")
        if prev_out is not None and w.shape[1] != prev_out:
            raise ValueError(
                f"layer {i}: input dim {w.shape[1]} does not chain from {prev_out}"
            )
        prev_out = w.shape[0]
        packed.append(Layer(weights=w, bias=b, activation=act))
    if not packed:
        raise ValueError("a net needs at least one layer")
    return BuiltinNet(layers=tuple(packed))


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _forward(net: BuiltinNet, flat: np.ndarray) -> np.ndarray:
    a = flat
    for layer in net.layers:
        z = a @ layer.weights.T + layer.bias
        a = np.maximum(z, 0.0) if layer.activation == "relu" else z
    return a


class ClassifierHandle:
    """Shared behavior: batch validation, request splitting, query accounting."""

    kind = "abstract"

    def __init__(self, class_count, input_shape, supports_gradient, batch_cap=DEFAULT_BATCH_CAP):
        self.class_count = int(class_count)
        self.input_shape = tuple(int(v) for v in input_shape)
        self.supports_gradient = bool(supports_gradient)
        self.batch_cap = int(batch_cap)
        self._queries = 0

    @property
    def queries(self) -> int:
        return self._queries

    def _check_batch(self, batch: np.ndarray) -> np.ndarray:
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim != 4 or batch.shape[1:] != self.input_shape:
            raise ValueError(
                f"expected batch of shape [b, {', '.join(map(str, self.input_shape))}], "
                f"got {batch.shape}"
            )
        if not np.isfinite(batch).all():
            raise ValueError("non-finite pixels in batch")
        if batch.min() < -1e-9 or batch.max() > 1.0 + 1e-9:
            raise ValueError("pixels must lie in [0, 1]")
        return batch

    def predict_probs(self, batch: np.ndarray) -> np.ndarray:
        batch = self._check_batch(batch)
        chunks = []
        for start in range(0, batch.shape[0], self.batch_cap):
            chunk = batch[start : start + self.batch_cap]
            probs = self._predict(chunk)
            self._queries += chunk.shape[0]
            chunks.append(probs)
        return np.concatenate(chunks, axis=0)

    def predict_label(self, batch: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_probs(batch), axis=1)

    def loss_gradient(self, x: np.ndarray, y: int) -> np.ndarray:
        if not self.supports_gradient:
            raise GradientUnsupportedError(f"{self.kind} backend has no gradient support")
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.input_shape:
            raise ValueError(f"expected a single image of shape {self.input_shape}")
        y = int(y)
        if not 0 <= y < self.class_count:
            raise ValueError(f"label {y} outside [0, {self.class_count})")
        grad = self._gradient(x, y)
        self._queries += 1
        return grad

    def close(self) -> None:
        pass

    def _predict(self, chunk: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _gradient(self, x: np.ndarray, y: int) -> np.ndarray:
        raise NotImplementedError


class BuiltinClassifier(ClassifierHandle):
    kind = "builtin"

    def __init__(self, net: BuiltinNet, input_shape, batch_cap=DEFAULT_BATCH_CAP):
        expect = int(np.prod(input_shape))
        if net.in_dim != expect:
            raise ValueError(
                f"net expects {net.in_dim} inputs but shape {tuple(input_shape)} "
                f"flattens to {expect}"
            )
        super().__init__(net.out_dim, input_shape, True, batch_cap)
        self.net = net

    def _predict(self, chunk: np.ndarray) -> np.ndarray:
        flat = chunk.reshape(chunk.shape[0], -1)
        return _softmax(_forward(self.net, flat))

    def _gradient(self, x: np.ndarray, y: int) -> np.ndarray:
        # Forward pass keeping pre-activations, then reverse-mode through
        # softmax and the dense stack. The max over i != y is held fixed
        # at the argmax found on this evaluation.
        a = x.reshape(1, -1)
        pres = []
        for layer in self.net.layers:
            z = a @ layer.weights.T + layer.bias
            pres.append(z)
            a = np.maximum(z, 0.0) if layer.activation == "relu" else z
        p = _softmax(a)[0]
        masked = p.copy()
        masked[y] = -np.inf
        j = int(np.argmax(masked))
        g = np.zeros_like(p)
        g[j] = 1.0
        g[y] -= 1.0
        grad = (p * g - (p @ g) * p)[None, :]
        for layer, z in zip(reversed(self.net.layers), reversed(pres)):
            if layer.activation == "relu":
                grad = grad * (z > 0.0)
            grad = grad @ layer.weights
        return grad.reshape(self.input_shape)


def save_builtin(net: BuiltinNet, input_shape, out_dir, manifest_name="model.txt") -> str:
    """Persist a net: one container per matrix plus a plain-text manifest.

    Manifest layout: an ``input c h w`` line, then one
    ``<activation> <weights-file> <bias-file>`` line per layer, with paths
    relative to the manifest.
    """
    os.makedirs(out_dir, exist_ok=True)
    lines = ["input " + " ".join(str(int(v)) for v in input_shape)]
    for i, layer in enumerate(net.layers):
        wname = f"w{i}.hdat"
        bname = f"b{i}.hdat"
        save_container(layer.weights.astype(np.float32), os.path.join(out_dir, wname))
        save_container(layer.bias.astype(np.float32), os.path.join(out_dir, bname))
        lines.append(f"{layer.activation} {wname} {bname}")
    manifest = os.path.join(out_dir, manifest_name)
    with open(manifest, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return manifest


def load_builtin(manifest_path, batch_cap=DEFAULT_BATCH_CAP) -> BuiltinClassifier:
    base = os.path.dirname(os.path.abspath(manifest_path))
    with open(manifest_path, "r", encoding="utf-8") as fh:
        raw = [ln.strip() for ln in fh if ln.strip()]
    if not raw or not raw[0].startswith("input "):
        raise ValueError("manifest must start with an 'input c h w' line")
    parts = raw[0].split()
    if len(parts) != 4:
        raise ValueError(f"bad input line: {raw[0]!r}")
    input_shape = tuple(int(v) for v in parts[1:])
    layers = []
    for ln in raw[1:]:
        fields = ln.split()
        if len(fields) != 3:
            raise ValueError(f"bad layer line: {ln!r}")
        act, wname, bname = fields
        w = load_container(os.path.join(base, wname)).astype(np.float64)
        b = load_container(os.path.join(base, bname)).astype(np.float64)
        layers.append((w, b, act))
    return BuiltinClassifier(make_net(layers), input_shape, batch_cap)
