"""Bundled synthetic 8x8 image dataset for desk-scale runs and examples.

Each class is a soft bright blob at a fixed grid position over a dim
background, with per-sample intensity jitter and pixel noise. Small
enough that whole campaigns finish in seconds, structured enough that
PCA latents cluster by class.
"""

from __future__ import annotations

import numpy as np

from .classifier import BuiltinNet, make_net
from .containers import LabeledDataset, assemble_dataset

SIDE = 8
BLOB_CENTERS = ((2.0, 2.0), (5.0, 5.0), (1.5, 5.5), (5.5, 1.5))
BLOB_SIGMA = 1.1


def _blob(center) -> np.ndarray:
    ys, xs = np.mgrid[0:SIDE, 0:SIDE]
    cy, cx = center
    return np.exp(-((ys - cy) ** 2 + (xs - cx) ** 2) / (2.0 * BLOB_SIGMA**2))


def make_synth_dataset(
    count: int,
    class_count: int = 2,
    rng_seed: int = 0,
    noise: float = 0.06,
) -> LabeledDataset:
    """Deterministic blob dataset: [count, 1, 8, 8] images, round-robin labels."""
    if not 2 <= class_count <= len(BLOB_CENTERS):
        raise ValueError(f"class_count must lie in [2, {len(BLOB_CENTERS)}]")
    if count < class_count:
        raise ValueError("need at least one sample per class")
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    templates = [_blob(BLOB_CENTERS[k]) for k in range(class_count)]
    labels = np.arange(count, dtype=np.int64) % class_count
    images = np.empty((count, 1, SIDE, SIDE), dtype=np.float64)
    intensity = rng.uniform(0.55, 0.9, size=count)
    background = rng.uniform(0.05, 0.15, size=count)
    jitter = rng.uniform(-noise, noise, size=(count, SIDE, SIDE))
    for i in range(count):
        img = background[i] + intensity[i] * templates[labels[i]] + jitter[i]
        images[i, 0] = np.clip(img, 0.0, 1.0)
    return assemble_dataset(images.astype(np.float32), labels, class_count)


def make_template_net(class_count: int = 2, scale: float = 4.0) -> BuiltinNet:
    """Untrained linear classifier whose rows are the centered class templates."""
    if not 2 <= class_count <= len(BLOB_CENTERS):
        raise ValueError(f"class_count must lie in [2, {len(BLOB_CENTERS)}]")
    templates = np.stack(
        [_blob(BLOB_CENTERS[k]).reshape(-1) for k in range(class_count)]
    )
    centered = templates - templates.mean(axis=0)
    w = scale * centered
    b = np.zeros(class_count)
    return make_net([(w, b, "none")])
