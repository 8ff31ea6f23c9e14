"""Test-case generation inside the L-infinity ball: two-step GA and a PGD baseline.

Genomes are perturbation tensors delta, kept inside the ball and inside
pixel range after every operator. The two-step mode selects on raw
prediction loss while most of the population still classifies correctly,
then switches to the quality-weighted fitness once adversarial genomes
hold the majority; regular mode uses the weighted fitness throughout and
exists as an ablation.

All randomness for one run flows from a single PCG64 stream, and every
draw is a fixed-size array draw, so trajectories are bit-reproducible
for a given seed regardless of what the numbers turn out to be.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .classifier import ClassifierHandle
from .metrics import PerceptMetricKind, quality_score_batch
from .seeds import prediction_loss_batch

GA_MODES = ("two_step", "regular")
PGD_DEFAULT_STEPS = 10
PGD_DEFAULT_STEP_SIZE = 2.0 / 255.0
_SHIFT = 1e-6


@dataclass(frozen=True)
class GaConfig:
    population: int
    max_iters: int
    radius: float
    outputs: int
    rng_seed: int
    alpha: float = 1.0
    metric: PerceptMetricKind = PerceptMetricKind.MSE
    mutation_rate: float = 0.05
    plateau_window: int = 50
    plateau_tol: float = 1e-4
    mode: str = "two_step"

    def __post_init__(self):
        if self.population < 2:
            raise ValueError(f"population must be >= 2, got {self.population}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not 0.0 < self.radius < 1.0:
            raise ValueError(f"radius must lie in (0, 1), got {self.radius}")
        if not 1 <= self.outputs <= self.population:
            raise ValueError(
                f"outputs must lie in [1, population={self.population}], got {self.outputs}"
            )
        if self.alpha < 0.0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not 0.0 < self.mutation_rate < 1.0:
            raise ValueError(f"mutation_rate must lie in (0, 1), got {self.mutation_rate}")
        if self.plateau_window < 1 or self.plateau_tol <= 0:
            raise ValueError("plateau window/tolerance must be positive")
        if self.mode not in GA_MODES:
            raise ValueError(f"mode must be one of {GA_MODES}, got {self.mode!r}")
        PerceptMetricKind(self.metric)


@dataclass(frozen=True)
class TraceRow:
    generation: int
    max_loss: float
    mean_loss: float
    max_f2: float
    ae_proportion: float
    active_fitness: int


@dataclass(frozen=True)
class GaResult:
    cases: np.ndarray      # [<=m, c, h, w]
    losses: np.ndarray     # [<=m] prediction loss per case
    qualities: np.ndarray  # [<=m] perceptual quality per case
    trace: list
    generations: int
    converged: bool


def write_trace(rows, path) -> None:
    lines = ["generation,max_loss,mean_loss,max_f2,ae_proportion,active_fitness"]
    for row in rows:
        lines.append(
            f"{row.generation},{row.max_loss!r},{row.mean_loss!r},"
            f"{row.max_f2!r},{row.ae_proportion!r},{row.active_fitness}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _clip_to_ball(deltas: np.ndarray, x: np.ndarray, r: float) -> np.ndarray:
    deltas = np.clip(deltas, -r, r)
    # subtracting after the pixel clip can round a hair past r, so clip twice
    return np.clip(np.clip(x + deltas, 0.0, 1.0) - x, -r, r)


def _realize(deltas: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.clip(x + deltas, 0.0, 1.0)


def ga_generate(
    h: ClassifierHandle,
    x: np.ndarray,
    y: int,
    cfg: GaConfig,
    trace_path=None,
) -> GaResult:
    """Run the GA around one seed and return the top-m cases by weighted fitness.

    The trace records one row per generation (generation 0 is the random
    initialization). If trace_path is given the rows gathered so far are
    flushed even when the backend dies mid-run.
    """
    x = np.asarray(x, dtype=np.float64)
    y = int(y)
    seed_label = int(h.predict_label(x[None, ...])[0])
    if seed_label != y:
        raise ValueError(
            f"seed is already misclassified (predicted {seed_label}, label {y})"
        )

    n = cfg.population
    r = cfg.radius
    rng = np.random.Generator(np.random.PCG64(cfg.rng_seed))
    trace: list[TraceRow] = []

    def evaluate(deltas):
        cand = _realize(deltas, x)
        probs = h.predict_probs(cand)
        j = prediction_loss_batch(probs, y)
        q = quality_score_batch(cfg.metric, x, cand, r)
        return j, j + cfg.alpha * q

    try:
        deltas = _clip_to_ball(rng.uniform(-r, r, size=(n, *x.shape)), x, r)
        j, f2 = evaluate(deltas)
        best_f2_history = [float(f2.max())]
        converged = False
        t = 0

        def active(j_vals):
            if cfg.mode == "regular":
                return 2
            return 1 if int(np.sum(j_vals < 0.0)) > n // 2 else 2

        def log_row(gen, j_vals, f2_vals, fit_id):
            trace.append(
                TraceRow(
                    generation=gen,
                    max_loss=float(j_vals.max()),
                    mean_loss=float(j_vals.mean()),
                    max_f2=float(f2_vals.max()),
                    ae_proportion=float(np.mean(j_vals >= 0.0)),
                    active_fitness=fit_id,
                )
            )

        fit_id = active(j)
        log_row(0, j, f2, fit_id)

        while t < cfg.max_iters and not converged:
            fit_id = active(j)
            fitness = j if fit_id == 1 else f2

            # Fitness-proportionate selection over the shifted-positive
            # values; the current best is pinned into the parent pool so
            # the running optimum cannot be lost to roulette variance.
            shifted = fitness - fitness.min() + _SHIFT
            probs = shifted / shifted.sum()
            pool = n // 2
            elite = int(np.argmax(fitness))
            drawn = rng.choice(n, size=pool - 1, replace=True, p=probs)
            parents = np.concatenate(([elite], drawn))

            child_count = n - pool
            npix = x.size
            half = npix // 2
            children = np.empty((child_count, *x.shape))
            made = 0
            pair = 0
            while made < child_count:
                a = parents[(2 * pair) % pool]
                b = parents[(2 * pair + 1) % pool]
                swap = rng.permutation(npix)[:half]
                ca = deltas[a].copy()
                cb = deltas[b].copy()
                ca.reshape(-1)[swap] = deltas[b].reshape(-1)[swap]
                cb.reshape(-1)[swap] = deltas[a].reshape(-1)[swap]
                for c in (ca, cb):
                    if made < child_count:
                        children[made] = c
                        made += 1
                pair += 1

            mask = rng.random(children.shape) < cfg.mutation_rate
            fresh = rng.uniform(-r, r, size=children.shape)
            children = np.where(mask, fresh, children)
            children = _clip_to_ball(children, x, r)

            cj, cf2 = evaluate(children)
            deltas = np.concatenate([children, deltas[parents]], axis=0)
            j = np.concatenate([cj, j[parents]])
            f2 = np.concatenate([cf2, f2[parents]])

            t += 1
            log_row(t, j, f2, fit_id)
            best_f2_history.append(float(f2.max()))
            w = cfg.plateau_window
            if t > w and best_f2_history[-1] - best_f2_history[-1 - w] < cfg.plateau_tol:
                converged = True
    finally:
        if trace_path is not None and trace:
            write_trace(trace, trace_path)

    order = np.argsort(-f2, kind="stable")[: cfg.outputs]
    cases = _realize(deltas[order], x)
    qualities = quality_score_batch(cfg.metric, x, cases, r)
    return GaResult(
        cases=cases,
        losses=j[order],
        qualities=qualities,
        trace=trace,
        generations=t,
        converged=converged,
    )


@dataclass(frozen=True)
class AeSubset:
    cases: np.ndarray
    losses: np.ndarray
    indices: np.ndarray
    proportion: float


def ae_filter(cases: np.ndarray, losses: np.ndarray) -> AeSubset:
    """Keep the cases with nonnegative prediction loss (zero counts as adversarial)."""
    cases = np.asarray(cases)
    losses = np.asarray(losses, dtype=np.float64)
    if cases.shape[0] != losses.shape[0]:
        raise ValueError("cases and losses must align")
    idx = np.flatnonzero(losses >= 0.0)
    prop = float(idx.size / losses.size) if losses.size else 0.0
    return AeSubset(cases=cases[idx], losses=losses[idx], indices=idx, proportion=prop)


def pgd_baseline(
    h: ClassifierHandle,
    x: np.ndarray,
    y: int,
    r: float,
    steps: int = PGD_DEFAULT_STEPS,
    step_size: float = PGD_DEFAULT_STEP_SIZE,
) -> np.ndarray:
    """Sign-gradient ascent on the prediction loss, projected to ball and pixel range."""
    if not 0.0 < r < 1.0:
        raise ValueError(f"radius must lie in (0, 1), got {r}")
    if steps < 1 or step_size <= 0:
        raise ValueError("steps and step_size must be positive")
    x = np.asarray(x, dtype=np.float64)
    adv = x.copy()
    for _ in range(steps):
        grad = h.loss_gradient(adv, y)
        adv = adv + step_size * np.sign(grad)
        adv = np.clip(adv, x - r, x + r)
        adv = np.clip(adv, 0.0, 1.0)
    return adv
