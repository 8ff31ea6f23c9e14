"""Global-distribution stage: PCA baseline and adaptive Gaussian KDE.

The global density over a dataset is a uniform mixture of diagonal
Gaussians, one per training point, centered at the latent mean with the
per-dimension latent std as bandwidth. Latents normally come from an
external encoder as (means, stds) pairs; when only bare points are
available (the PCA path), Scott's rule supplies a shared bandwidth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .containers import LatentSet, load_container, make_latent_set, save_container
from .kernels import kde_log_density_many

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class PcaModel:
    """Linear projection onto the top-d principal directions."""

    mean: np.ndarray        # [D]
    components: np.ndarray  # [d, D], orthonormal rows

    @property
    def latent_dim(self) -> int:
        return self.components.shape[0]


@dataclass(frozen=True)
class KdeModel:
    """Uniform mixture of n diagonal Gaussians."""

    centers: np.ndarray     # [n, d]
    bandwidths: np.ndarray  # [n, d], strictly positive

    @property
    def count(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]


def pca_fit(images: np.ndarray, d: int) -> PcaModel:
    """Fit a PCA model to flattened images [n, D].

    Components are the top-d right singular vectors of the centered data,
    sign-fixed so each row's largest-magnitude entry is positive (keeps
    fits reproducible across LAPACK builds).
    """
    x = np.asarray(images, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected [n, D] data, got ndim={x.ndim}")
    n, dim = x.shape
    if d < 1:
        raise ValueError(f"latent dimension must be >= 1, got {d}")
    if d > min(n, dim):
        raise ValueError(f"d={d} exceeds min(n, D)={min(n, dim)}")
    mean = x.mean(axis=0)
    centered = x - mean
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s[0] <= 0.0:
        raise ValueError("data has zero variance; cannot fit PCA")
    comps = vt[:d].copy()
    for row in comps:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    return PcaModel(mean=mean, components=comps)


def pca_transform(m: PcaModel, images: np.ndarray) -> np.ndarray:
    x = np.asarray(images, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != m.mean.shape[0]:
        raise ValueError(
            f"expected [n, {m.mean.shape[0]}] data, got shape {x.shape}"
        )
    return (x - m.mean) @ m.components.T


def pca_inverse(m: PcaModel, latents: np.ndarray) -> np.ndarray:
    z = np.asarray(latents, dtype=np.float64)
    if z.ndim != 2 or z.shape[1] != m.latent_dim:
        raise ValueError(
            f"expected [n, {m.latent_dim}] latents, got shape {z.shape}"
        )
    return z @ m.components + m.mean


def pca_recon_loss(m: PcaModel, images: np.ndarray) -> float:
    """Mean squared reconstruction error per element."""
    x = np.asarray(images, dtype=np.float64)
    recon = pca_inverse(m, pca_transform(m, x))
    return float(np.mean((x - recon) ** 2))


def save_pca(m: PcaModel, mean_path, components_path) -> None:
    save_container(m.mean.astype(np.float32), mean_path)
    save_container(m.components.astype(np.float32), components_path)


def load_pca(mean_path, components_path) -> PcaModel:
    mean = load_container(mean_path).astype(np.float64)
    comps = load_container(components_path).astype(np.float64)
    if mean.ndim != 1 or comps.ndim != 2 or comps.shape[1] != mean.shape[0]:
        raise ValueError("PCA containers do not describe a consistent model")
    return PcaModel(mean=mean, components=comps)


def scott_bandwidth(points: np.ndarray) -> np.ndarray:
    """Scott's rule: h_j = n^{-1/(d+4)} * std_j, one shared bandwidth per dimension."""
    pts = np.asarray(points, dtype=np.float64)
    n, d = pts.shape
    std = pts.std(axis=0, ddof=1) if n > 1 else np.ones(d)
    std = np.where(std > 0, std, 1e-6)
    return n ** (-1.0 / (d + 4)) * std


def kde_fit(latents) -> KdeModel:
    """Fit the adaptive KDE.

    Accepts a LatentSet (per-sample bandwidths from the encoder stds) or a
    bare [n, d] array of points, in which case Scott's rule provides a
    single bandwidth vector replicated across components.
    """
    if isinstance(latents, LatentSet):
        centers = np.asarray(latents.means, dtype=np.float64)
        bw = np.asarray(latents.stds, dtype=np.float64)
    else:
        centers = np.asarray(latents, dtype=np.float64)
        if centers.ndim != 2:
            raise ValueError(f"expected [n, d] latents, got ndim={centers.ndim}")
        if centers.shape[0] < 1:
            raise ValueError("cannot fit a KDE to an empty latent set")
        h = scott_bandwidth(centers)
        bw = np.broadcast_to(h, centers.shape).copy()
    if centers.shape[0] < 1:
        raise ValueError("cannot fit a KDE to an empty latent set")
    if not np.all(bw > 0):
        raise ValueError("all bandwidths must be strictly positive")
    return KdeModel(centers=centers, bandwidths=bw)


def kde_log_density(m: KdeModel, z: np.ndarray) -> float:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.shape[0] != m.dim:
        raise ValueError(f"expected a length-{m.dim} vector, got shape {z.shape}")
    return float(kde_log_density_many(z[None, :], m.centers, m.bandwidths)[0])


def kde_density(m: KdeModel, z: np.ndarray) -> float:
    ld = kde_log_density(m, z)
    return math.exp(ld) if ld > -745.0 else 0.0


def kde_log_density_batch(m: KdeModel, zs: np.ndarray) -> np.ndarray:
    zs = np.asarray(zs, dtype=np.float64)
    if zs.ndim != 2 or zs.shape[1] != m.dim:
        raise ValueError(f"expected [q, {m.dim}] queries, got shape {zs.shape}")
    return kde_log_density_many(zs, m.centers, m.bandwidths)


def kde_sample(m: KdeModel, count: int, rng_seed: int) -> np.ndarray:
    """Draw latent samples: pick a component uniformly, then its Gaussian."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    idx = rng.integers(0, m.count, size=count)
    noise = rng.standard_normal((count, m.dim))
    return m.centers[idx] + m.bandwidths[idx] * noise


def normalize_densities(values) -> np.ndarray:
    """Min-max scale to [0, 1]; a constant sequence maps to all 0.5."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("cannot normalize an empty sequence")
    if np.isnan(v).any():
        raise ValueError("NaN in density values")
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.full(v.shape, 0.5)
    return (v - lo) / (hi - lo)


def normalize_log_densities(log_values) -> np.ndarray:
    """Min-max scale densities given in log space, safely past float underflow.

    exp(ld - max) is a positive rescaling of exp(ld), and min-max scaling
    is invariant under positive rescaling, so the result matches
    normalize_densities(exp(log_values)) whenever that quantity is
    representable at all.
    """
    lv = np.asarray(log_values, dtype=np.float64)
    if lv.size == 0:
        raise ValueError("cannot normalize an empty sequence")
    if np.isnan(lv).any():
        raise ValueError("NaN in log-density values")
    return normalize_densities(np.exp(lv - lv.max()))


def load_latents(means_path, stds_path) -> LatentSet:
    means = load_container(means_path).astype(np.float64)
    stds = load_container(stds_path).astype(np.float64)
    return make_latent_set(means, stds)
