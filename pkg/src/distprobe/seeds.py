"""Seed scoring and selection.

A candidate seed is worth testing when it is both likely under the data
distribution (global density of its latent) and predicted to be locally
fragile (a robustness indicator). Candidates the model already gets
wrong are excluded up front; an adversarial example only makes sense
relative to a correctly-predicted seed.

Direction handling is the subtle part. Both indicators are kept raw in
the output records, but the ranking consumes an *unrobustness* score in
[0, 1]: the gradient norm S_grad already points that way (steep loss
surface = fragile) while the separation distance S_sep points the other
way (small separation = fragile), so S_sep is inverted after
normalization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classifier import ClassifierHandle
from .containers import LabeledDataset
from .density import KdeModel, kde_log_density_batch, normalize_densities, normalize_log_densities
from .kernels import min_cross_class_linf

INDICATOR_KINDS = ("grad", "sep")


@dataclass(frozen=True)
class SeedScore:
    index: int
    label: int
    p_g_norm: float
    indicator_raw: float
    unrobustness_norm: float
    combined: float


@dataclass(frozen=True)
class RadiusPolicy:
    """Either a fixed L-infinity radius or 'derive it from the dataset'."""

    mode: str  # fixed | auto
    value: float | None = None

    def __post_init__(self):
        if self.mode not in ("fixed", "auto"):
            raise ValueError(f"radius mode must be fixed or auto, got {self.mode!r}")
        if self.mode == "fixed":
            if self.value is None or not 0.0 < self.value < 1.0:
                raise ValueError(f"fixed radius must lie in (0, 1), got {self.value}")


@dataclass(frozen=True)
class RSeparation:
    r: float
    subsampled: bool
    points_examined: int


def prediction_loss(probs: np.ndarray, y: int) -> float:
    """max over wrong-class probabilities minus the true-class probability.

    Nonnegative exactly when the argmax is not y (ties included), so the
    sign doubles as the adversarial-example flag.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1 or probs.shape[0] < 2:
        raise ValueError("need a probability vector over at least 2 classes")
    y = int(y)
    if not 0 <= y < probs.shape[0]:
        raise ValueError(f"label {y} outside [0, {probs.shape[0]})")
    others = np.delete(probs, y)
    return float(others.max() - probs[y])


def prediction_loss_batch(probs: np.ndarray, y: int) -> np.ndarray:
    """prediction_loss for every row of [b, K] probs against one label."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[1] < 2:
        raise ValueError("need [b, K] probabilities with K >= 2")
    y = int(y)
    masked = probs.copy()
    masked[:, y] = -np.inf
    return masked.max(axis=1) - probs[:, y]


def indicator_grad(h: ClassifierHandle, x: np.ndarray, y: int) -> float:
    grad = h.loss_gradient(x, y)
    return float(np.max(np.abs(grad)))


def predict_pool(h: ClassifierHandle, pool: LabeledDataset) -> np.ndarray:
    """One batched pass over the pool; cache the [n, K] probs per campaign."""
    return h.predict_probs(pool.images)


def indicator_sep(
    h: ClassifierHandle,
    x: np.ndarray,
    y: int,
    pool: LabeledDataset,
    pool_probs: np.ndarray | None = None,
) -> float:
    """Min L-infinity distance from f(x) to f(x_hat) over differently-labeled pool rows."""
    y = int(y)
    mask = pool.labels != y
    if not mask.any():
        raise ValueError(f"pool has no sample labeled differently from {y}")
    if pool_probs is None:
        pool_probs = predict_pool(h, pool)
    fx = h.predict_probs(x[None, ...])[0]
    dists = np.max(np.abs(pool_probs[mask] - fx), axis=1)
    return float(dists.min())


def r_separation(ds: LabeledDataset, sample_cap: int = 2000, rng_seed: int = 0) -> RSeparation:
    """Half the minimum cross-class L-infinity distance.

    Above sample_cap points the scan runs on a seeded random subset, so
    the returned value is an upper bound on the exhaustive one; the flag
    says which happened.
    """
    labels = np.asarray(ds.labels)
    if np.unique(labels).size < 2:
        raise ValueError("r-separation needs at least two classes")
    n = len(ds)
    flat = np.asarray(ds.images, dtype=np.float64).reshape(n, -1)
    subsampled = n > sample_cap
    if subsampled:
        rng = np.random.Generator(np.random.PCG64(rng_seed))
        keep = rng.choice(n, size=sample_cap, replace=False)
        keep.sort()
        flat = flat[keep]
        labels = labels[keep]
        if np.unique(labels).size < 2:
            raise ValueError("subsample collapsed to a single class; raise sample_cap")
    dmin = min_cross_class_linf(flat, labels)
    return RSeparation(r=0.5 * dmin, subsampled=subsampled, points_examined=flat.shape[0])


def rank_seeds(
    h: ClassifierHandle,
    ds: LabeledDataset,
    kde: KdeModel,
    latents: np.ndarray,
    indicator: str,
    k: int,
    pool: LabeledDataset | None = None,
    log_densities: np.ndarray | None = None,
) -> list[SeedScore]:
    """Top-k seeds by normalized global density times normalized unrobustness.

    latents holds one latent vector per dataset row (same order). The
    density and indicator columns are min-max normalized over the
    correctly-classified candidates only, since those are the ranking
    population. Ties sort by lower dataset index.
    """
    if indicator not in INDICATOR_KINDS:
        raise ValueError(f"indicator must be one of {INDICATOR_KINDS}, got {indicator!r}")
    latents = np.asarray(latents, dtype=np.float64)
    if latents.ndim != 2 or latents.shape[0] != len(ds):
        raise ValueError("latents must align 1:1 with dataset rows")

    predicted = h.predict_label(ds.images)
    correct = np.flatnonzero(predicted == ds.labels)
    if k < 1 or k > correct.size:
        raise ValueError(
            f"k={k} but only {correct.size} correctly-classified candidates"
        )

    if log_densities is None:
        log_densities = kde_log_density_batch(kde, latents[correct])
    else:
        log_densities = np.asarray(log_densities, dtype=np.float64)[correct]
    pg = normalize_log_densities(log_densities)

    raw = np.empty(correct.size)
    if indicator == "grad":
        for i, idx in enumerate(correct):
            raw[i] = indicator_grad(h, ds.images[idx], int(ds.labels[idx]))
    else:
        pool = ds if pool is None else pool
        pool_probs = predict_pool(h, pool)
        for i, idx in enumerate(correct):
            raw[i] = indicator_sep(
                h, ds.images[idx], int(ds.labels[idx]), pool, pool_probs
            )
    norm = normalize_densities(raw)
    unrob = norm if indicator == "grad" else 1.0 - norm

    combined = pg * unrob
    order = sorted(range(correct.size), key=lambda i: (-combined[i], correct[i]))
    out = []
    for i in order[:k]:
        idx = int(correct[i])
        out.append(
            SeedScore(
                index=idx,
                label=int(ds.labels[idx]),
                p_g_norm=float(pg[i]),
                indicator_raw=float(raw[i]),
                unrobustness_norm=float(unrob[i]),
                combined=float(combined[i]),
            )
        )
    return out


def allocate_budget(scores, M: int) -> list[int]:
    """Split M test cases across seeds proportionally to p_g_norm.

    Largest-remainder rounding keeps the total exactly M; every seed
    gets at least one case, topped up by taking from the largest shares.
    """
    k = len(scores)
    if k == 0:
        raise ValueError("no seeds to allocate to")
    if M < k:
        raise ValueError(f"budget M={M} smaller than seed count {k}")
    weights = np.array([s.p_g_norm for s in scores], dtype=np.float64)
    total = weights.sum()
    if total <= 0:
        weights = np.ones(k)
        total = float(k)
    quotas = M * weights / total
    base = np.floor(quotas).astype(int)
    short = M - int(base.sum())
    frac = quotas - base
    order = sorted(range(k), key=lambda i: (-frac[i], i))
    for i in order[:short]:
        base[i] += 1
    while (base < 1).any():
        zero = int(np.argmin(base))
        donor = int(np.argmax(base))
        base[donor] -= 1
        base[zero] += 1
    return [int(v) for v in base]


def scores_csv_lines(scores, budgets) -> list[str]:
    """CSV rows for a ranking; floats via repr so reruns are byte-identical."""
    if len(scores) != len(budgets):
        raise ValueError("scores and budgets must align")
    lines = ["index,label,p_g_norm,indicator_raw,unrobustness_norm,combined,m"]
    for s, m in zip(scores, budgets):
        lines.append(
            f"{s.index},{s.label},{s.p_g_norm!r},{s.indicator_raw!r},"
            f"{s.unrobustness_norm!r},{s.combined!r},{m}"
        )
    return lines
