"""Tensor container file format and dataset assembly.

All numeric data moves through ``HDAT1`` container files: a 5-byte magic
``HDAT1``, one dtype byte (0x01 = float32), one rank byte, ``rank``
little-endian u64 extents, then the payload as little-endian float32 in
row-major order. No padding, no trailing bytes. Loading validates
everything and rejects the whole file on any violation; nothing is ever
silently repaired.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

MAGIC = b"HDAT1"
DTYPE_F32 = 0x01


class ContainerError(ValueError):
    """Base class for container format violations."""


class BadMagicError(ContainerError):
    """File does not start with the HDAT1 magic or has an unknown dtype."""


class TruncatedPayloadError(ContainerError):
    """Payload shorter or longer than the header promises."""


class NonFiniteDataError(ContainerError):
    """Payload contains NaN or Inf."""


class ShapeMismatchError(ContainerError):
    """Shape and element count disagree, or shape is otherwise invalid."""


def _validate(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteDataError("tensor contains NaN or Inf")
    return arr


def save_container(arr: np.ndarray, path: str | os.PathLike) -> None:
    """Write ``arr`` as an HDAT1 file. Round-trips bit-exactly."""
    arr = _validate(arr)
    header = bytearray(MAGIC)
    header.append(DTYPE_F32)
    rank = arr.ndim
    if rank > 255:
        raise ShapeMismatchError(f"rank {rank} exceeds format limit")
    header.append(rank)
    for extent in arr.shape:
        header += int(extent).to_bytes(8, "little")
    with open(path, "wb") as f:
        f.write(bytes(header))
        f.write(arr.astype("<f4", copy=False).tobytes())


def load_container(path: str | os.PathLike) -> np.ndarray:
    """Read an HDAT1 file into a float32 array, validating the format."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 7 or raw[:5] != MAGIC:
        raise BadMagicError(f"{path}: not an HDAT1 container")
    if raw[5] != DTYPE_F32:
        raise BadMagicError(f"{path}: unknown dtype code 0x{raw[5]:02x}")
    rank = raw[6]
    offset = 7 + 8 * rank
    if len(raw) < offset:
        raise TruncatedPayloadError(f"{path}: header cut short")
    shape = tuple(
        int.from_bytes(raw[7 + 8 * i : 15 + 8 * i], "little") for i in range(rank)
    )
    count = 1
    for extent in shape:
        count *= extent
    expected = offset + 4 * count
    if len(raw) < expected:
        raise TruncatedPayloadError(
            f"{path}: payload has {(len(raw) - offset) // 4} of {count} elements"
        )
    if len(raw) > expected:
        raise TruncatedPayloadError(f"{path}: {len(raw) - expected} trailing bytes")
    arr = np.frombuffer(raw, dtype="<f4", count=count, offset=offset).reshape(shape)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteDataError(f"{path}: payload contains NaN or Inf")
    return np.ascontiguousarray(arr)


@dataclass(frozen=True)
class LabeledDataset:
    """Images [n, c, h, w] with pixels in [0, 1] and integer labels < class_count."""

    images: np.ndarray
    labels: np.ndarray
    class_count: int

    def __len__(self) -> int:
        return self.images.shape[0]


@dataclass(frozen=True)
class LatentSet:
    """Per-sample diagonal Gaussian latents: means and strictly positive stds, both [n, d]."""

    means: np.ndarray
    stds: np.ndarray

    def __len__(self) -> int:
        return self.means.shape[0]


def load_labels(path: str | os.PathLike) -> np.ndarray:
    """Labels file: one decimal integer per line."""
    labels = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                labels.append(int(line))
            except ValueError:
                raise ShapeMismatchError(f"{path}:{lineno}: not an integer label")
    return np.asarray(labels, dtype=np.int64)


def save_labels(labels: np.ndarray, path: str | os.PathLike) -> None:
    with open(path, "w") as f:
        for label in labels:
            f.write(f"{int(label)}\n")


def assemble_dataset(
    images: np.ndarray, labels: np.ndarray, class_count: int
) -> LabeledDataset:
    """Validate and pair images with labels. Rejects, never clamps."""
    images = _validate(images)
    if images.ndim != 4:
        raise ShapeMismatchError(f"images must be 4-d, got rank {images.ndim}")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1 or labels.shape[0] != images.shape[0]:
        raise ShapeMismatchError(
            f"{images.shape[0]} images but {labels.shape[0]} labels"
        )
    if images.size and (images.min() < 0.0 or images.max() > 1.0):
        raise ContainerError("pixel value outside [0, 1]")
    if class_count < 1:
        raise ShapeMismatchError("class_count must be >= 1")
    if labels.size and (labels.min() < 0 or labels.max() >= class_count):
        raise ContainerError(f"label outside [0, {class_count})")
    return LabeledDataset(images=images, labels=labels, class_count=class_count)


def make_latent_set(means: np.ndarray, stds: np.ndarray) -> LatentSet:
    means = _validate(means)
    stds = _validate(stds)
    if means.shape != stds.shape or means.ndim != 2:
        raise ShapeMismatchError(
            f"means {means.shape} and stds {stds.shape} must be matching [n, d]"
        )
    if stds.size and stds.min() <= 0.0:
        raise ContainerError("latent stds must be strictly positive")
    return LatentSet(means=means, stds=stds)
