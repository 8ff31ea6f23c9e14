"""TorchScript model wrapper with the two ops the protocol serves."""

from __future__ import annotations

import json

import numpy as np
import torch

META_FILE = "meta.json"


class ModelLoadError(RuntimeError):
    """The model file is missing, unreadable, or not a classifier."""


class ServedModel:
    """A differentiable classifier ready to answer protocol requests.

    The wrapped module maps a [b, c, h, w] float32 batch to raw logits;
    softmax happens here, in float64, so replies are proper probability
    rows regardless of how the model was exported.  Input normalization
    is the identity for now and is kept as an explicit field so a later
    version can carry mean/std without touching the serving loop.
    """

    def __init__(self, module, class_count: int, input_shape):
        self.module = module
        self.class_count = int(class_count)
        self.input_shape = tuple(int(v) for v in input_shape)
        self.normalize = "identity"

    def predict_probs(self, batch: np.ndarray) -> np.ndarray:
        arr = np.ascontiguousarray(batch, dtype=np.float32)
        with torch.no_grad():
            logits = self.module(torch.from_numpy(arr))
        z = logits.double().numpy()
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def loss_gradient(self, x: np.ndarray, y: int) -> np.ndarray:
        """d/dx of (best wrong-class probability minus true-class probability)."""
        y = int(y)
        if not 0 <= y < self.class_count:
            raise ValueError(f"label {y} outside [0, {self.class_count})")
        t = torch.from_numpy(np.ascontiguousarray(x[None], dtype=np.float32))
        t.requires_grad_(True)
        probs = torch.softmax(self.module(t).double(), dim=1)[0]
        others = torch.cat([probs[:y], probs[y + 1 :]])
        loss = others.max() - probs[y]
        loss.backward()
        return t.grad[0].numpy().astype(np.float64)


def load_served_model(path: str, input_shape=None) -> ServedModel:
    """Load a scripted classifier and discover its class count.

    The input shape normally travels inside the TorchScript archive as
    an extra file (META_FILE, a JSON object with an "input_shape" key);
    an explicit ``input_shape`` argument overrides it.  The class count
    comes from a dummy forward pass rather than metadata, so it can
    never disagree with the model.
    """
    extra = {META_FILE: ""}
    try:
        module = torch.jit.load(path, map_location="cpu", _extra_files=extra)
    except Exception as exc:
        raise ModelLoadError(f"cannot load model from {path!r}: {exc}") from exc
    module.eval()

    if input_shape is None:
        blob = extra.get(META_FILE) or b""
        try:
            meta = json.loads(blob.decode("utf-8")) if blob else {}
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ModelLoadError(f"unreadable {META_FILE} in {path!r}: {exc}") from exc
        input_shape = meta.get("input_shape")
        if input_shape is None:
            raise ModelLoadError(
                f"{path!r} carries no input_shape; embed {META_FILE} or pass --input-shape"
            )
    shape = tuple(int(v) for v in input_shape)
    if len(shape) != 3 or any(v < 1 for v in shape):
        raise ModelLoadError(f"input shape must be three positive extents, got {shape}")

    try:
        with torch.no_grad():
            logits = module(torch.zeros((1, *shape), dtype=torch.float32))
    except Exception as exc:
        raise ModelLoadError(f"dummy forward on shape {shape} failed: {exc}") from exc
    if logits.ndim != 2 or logits.shape[0] != 1 or logits.shape[1] < 2:
        raise ModelLoadError(
            f"model must map [1, c, h, w] to [1, K>=2] logits, got {tuple(logits.shape)}"
        )
    return ServedModel(module, int(logits.shape[1]), shape)
