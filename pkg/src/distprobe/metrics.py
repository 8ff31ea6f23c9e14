"""Perceptual metrics (MSE, PSNR, SSIM, FID) and the quality score used by the GA."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

PSNR_CAP_DB = 100.0
_C1 = 0.01 ** 2
_C2 = 0.03 ** 2
_C3 = _C2 / 2.0


class PerceptMetricKind(str, enum.Enum):
    MSE = "mse"
    PSNR = "psnr"
    SSIM = "ssim"


@dataclass(frozen=True)
class GaussianStats:
    mean: np.ndarray  # [d]
    cov: np.ndarray   # [d, d]


def _check_pair(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    return x, y


def mse(x: np.ndarray, y: np.ndarray) -> float:
    x, y = _check_pair(x, y)
    return float(np.mean((x - y) ** 2))


def psnr(x: np.ndarray, y: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB with MAX = 1.0, capped at 100 dB."""
    m = mse(x, y)
    if m <= 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 20.0 * math.log10(1.0 / math.sqrt(m)))


def _ssim_channel(x: np.ndarray, y: np.ndarray) -> float:
    mx = float(x.mean())
    my = float(y.mean())
    vx = float(x.var())
    vy = float(y.var())
    cov = float(((x - mx) * (y - my)).mean())
    sx = math.sqrt(vx)
    sy = math.sqrt(vy)
    lum = (2.0 * mx * my + _C1) / (mx * mx + my * my + _C1)
    con = (2.0 * sx * sy + _C2) / (vx + vy + _C2)
    struct = (cov + _C3) / (sx * sy + _C3)
    return lum * con * struct


def ssim(x: np.ndarray, y: np.ndarray) -> float:
    """Whole-image SSIM (luminance * contrast * structure), channel-averaged.

    Statistics are taken over the full image rather than sliding windows,
    with stabilizers c1 = 0.01^2, c2 = 0.03^2, c3 = c2/2 for a dynamic
    range of 1.0.
    """
    x, y = _check_pair(x, y)
    if x.ndim == 2:
        return _ssim_channel(x, y)
    if x.ndim == 3:
        return float(np.mean([_ssim_channel(x[c], y[c]) for c in range(x.shape[0])]))
    raise ValueError(f"expected [h, w] or [c, h, w] images, got ndim={x.ndim}")


def gaussian_stats(features: np.ndarray) -> GaussianStats:
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2:
        raise ValueError(f"expected [n, d] feature matrix, got ndim={f.ndim}")
    if f.shape[0] < 2:
        raise ValueError(f"need at least 2 feature vectors, got {f.shape[0]}")
    mean = f.mean(axis=0)
    cov = np.cov(f, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    return GaussianStats(mean=mean, cov=cov)


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    sym = 0.5 * (mat + mat.T)
    vals, vecs = np.linalg.eigh(sym)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def fid(a: np.ndarray, b: np.ndarray) -> float:
    """Frechet distance between Gaussian fits of two feature sets.

    ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a^{1/2} S_b S_a^{1/2})^{1/2}),
    with the inner matrix square root taken by symmetric eigendecomposition
    and negative eigenvalues clamped to zero.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError(f"feature sets must share a dimension: {a.shape} vs {b.shape}")
    sa = gaussian_stats(a)
    sb = gaussian_stats(b)
    diff = sa.mean - sb.mean
    a_half = _psd_sqrt(sa.cov)
    inner = a_half @ sb.cov @ a_half
    vals = np.linalg.eigvalsh(0.5 * (inner + inner.T))
    vals = np.clip(vals, 0.0, None)
    value = (
        float(diff @ diff)
        + float(np.trace(sa.cov))
        + float(np.trace(sb.cov))
        - 2.0 * float(np.sum(np.sqrt(vals)))
    )
    return max(0.0, value)


def quality_score(kind: PerceptMetricKind, x: np.ndarray, y: np.ndarray, r: float) -> float:
    """Normalized closeness score in [0, 1]; 1 means y is the seed itself."""
    kind = PerceptMetricKind(kind)
    if kind is PerceptMetricKind.MSE:
        return float(np.clip(1.0 - mse(x, y) / (r * r), 0.0, 1.0))
    if kind is PerceptMetricKind.PSNR:
        return float(np.clip(psnr(x, y), 0.0, 60.0)) / 60.0
    return (ssim(x, y) + 1.0) / 2.0


def quality_score_batch(
    kind: PerceptMetricKind, seed: np.ndarray, batch: np.ndarray, r: float
) -> np.ndarray:
    """quality_score of each batch image against one seed, vectorized."""
    kind = PerceptMetricKind(kind)
    seed = np.asarray(seed, dtype=np.float64)
    batch = np.asarray(batch, dtype=np.float64)
    if batch.shape[1:] != seed.shape:
        raise ValueError(f"batch shape {batch.shape} does not match seed {seed.shape}")
    if kind is PerceptMetricKind.MSE:
        errs = np.mean((batch - seed) ** 2, axis=tuple(range(1, batch.ndim)))
        return np.clip(1.0 - errs / (r * r), 0.0, 1.0)
    return np.array([quality_score(kind, seed, img, r) for img in batch])
