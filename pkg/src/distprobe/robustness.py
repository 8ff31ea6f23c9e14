"""Monte-Carlo local robustness, empirical global robustness, campaign reports."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .classifier import ClassifierHandle
from .metrics import fid


@dataclass(frozen=True)
class LocalRobustnessEstimate:
    r_hat: float
    n_mc: int
    log_complement: float
    rng_seed: int


@dataclass(frozen=True)
class CaseRecord:
    """One emitted test case, the raw material every aggregate recomputes from."""

    seed_index: int
    case_id: int
    loss: float
    quality: float
    eps: float
    is_ae: bool


@dataclass(frozen=True)
class SeedSummary:
    index: int
    label: int
    allocated: int
    case_count: int
    ae_count: int
    mean_loss: float
    mean_eps: float
    p_g_norm: float
    eval_acc: float  # accuracy of the evaluation backend on this seed's AEs


@dataclass(frozen=True)
class CampaignReport:
    radius: float
    seeds: list
    cases: list
    ae_proportion: float
    seed_success_rate: float
    mean_loss: float
    mean_eps: float
    mean_pg_seeds: float
    mean_pg_aes: float
    global_robustness: float
    fid_latent: float | None
    fid_available: bool
    wall_seconds: float
    query_count: int


def mc_local_robustness(
    h: ClassifierHandle,
    x: np.ndarray,
    y: int,
    r: float,
    n_mc: int,
    rng_seed: int,
) -> LocalRobustnessEstimate:
    """Fraction of uniform ball samples still predicted y.

    Draws come out of one PCG64 stream in a single array fill, so a run
    with larger n_mc extends a smaller one sample-for-sample (the first
    draws are identical); estimates shrink monotonically in information,
    never by reshuffling.
    """
    if n_mc < 100:
        raise ValueError(f"n_mc must be >= 100, got {n_mc}")
    if not 0.0 < r < 1.0:
        raise ValueError(f"radius must lie in (0, 1), got {r}")
    x = np.asarray(x, dtype=np.float64)
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    samples = np.clip(x + rng.uniform(-r, r, size=(n_mc, *x.shape)), 0.0, 1.0)
    labels = h.predict_label(samples)
    r_hat = float(np.mean(labels == int(y)))
    log_comp = math.log10(1.0 - r_hat + 1.0 / n_mc)
    return LocalRobustnessEstimate(
        r_hat=r_hat, n_mc=n_mc, log_complement=log_comp, rng_seed=rng_seed
    )


def empirical_global_robustness(per_seed_acc, weights) -> float:
    acc = np.asarray(per_seed_acc, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if acc.shape != w.shape or acc.ndim != 1:
        raise ValueError("accuracies and weights must be aligned vectors")
    if (w < 0).any():
        raise ValueError("weights must be nonnegative")
    total = w.sum()
    if total <= 0:
        raise ValueError("weight sum must be positive")
    return float(np.dot(acc, w) / total)


def build_report(
    radius: float,
    seed_summaries,
    case_records,
    wall_seconds: float,
    query_count: int,
    seed_latents: np.ndarray | None = None,
    ae_latents: np.ndarray | None = None,
    pg_of_aes: np.ndarray | None = None,
) -> CampaignReport:
    """Aggregate per-case records into the campaign-level table.

    FID needs latent embeddings for both the seed set and the AE set; if
    either side is missing (or has fewer than two rows) the metric is
    omitted and flagged rather than failed.
    """
    seeds = list(seed_summaries)
    cases = list(case_records)
    if not seeds:
        raise ValueError("a report needs at least one seed")
    for c in cases:
        if c.eps > radius + 1e-6:
            raise ValueError(
                f"case {c.seed_index}/{c.case_id} leaves the ball: eps={c.eps} > r={radius}"
            )
    total = len(cases)
    aes = [c for c in cases if c.is_ae]
    ae_prop = len(aes) / total if total else 0.0
    success = sum(1 for s in seeds if s.ae_count > 0) / len(seeds)
    mean_loss = float(np.mean([c.loss for c in cases])) if cases else 0.0
    mean_eps = float(np.mean([c.eps for c in cases])) if cases else 0.0
    mean_pg_seeds = float(np.mean([s.p_g_norm for s in seeds]))
    if pg_of_aes is not None and len(pg_of_aes):
        mean_pg_aes = float(np.mean(pg_of_aes))
    else:
        mean_pg_aes = float("nan")
    weights = [s.p_g_norm for s in seeds]
    if sum(weights) <= 0:
        weights = [1.0] * len(seeds)
    rg = empirical_global_robustness([s.eval_acc for s in seeds], weights)
    fid_value = None
    fid_ok = False
    if (
        seed_latents is not None
        and ae_latents is not None
        and len(seed_latents) >= 2
        and len(ae_latents) >= 2
    ):
        fid_value = fid(seed_latents, ae_latents)
        fid_ok = True
    return CampaignReport(
        radius=float(radius),
        seeds=seeds,
        cases=cases,
        ae_proportion=ae_prop,
        seed_success_rate=success,
        mean_loss=mean_loss,
        mean_eps=mean_eps,
        mean_pg_seeds=mean_pg_seeds,
        mean_pg_aes=mean_pg_aes,
        global_robustness=rg,
        fid_latent=fid_value,
        fid_available=fid_ok,
        wall_seconds=float(wall_seconds),
        query_count=int(query_count),
    )


def report_to_json(report: CampaignReport) -> dict:
    return {
        "radius": report.radius,
        "ae_proportion": report.ae_proportion,
        "seed_success_rate": report.seed_success_rate,
        "mean_loss": report.mean_loss,
        "mean_eps": report.mean_eps,
        "mean_pg_seeds": report.mean_pg_seeds,
        "mean_pg_aes": None if math.isnan(report.mean_pg_aes) else report.mean_pg_aes,
        "global_robustness": report.global_robustness,
        "fid_latent": report.fid_latent,
        "fid_available": report.fid_available,
        "wall_seconds": report.wall_seconds,
        "query_count": report.query_count,
        "seeds": [
            {
                "index": s.index,
                "label": s.label,
                "allocated": s.allocated,
                "case_count": s.case_count,
                "ae_count": s.ae_count,
                "mean_loss": s.mean_loss,
                "mean_eps": s.mean_eps,
                "p_g_norm": s.p_g_norm,
                "eval_acc": s.eval_acc,
            }
            for s in report.seeds
        ],
    }


def report_to_text(report: CampaignReport) -> str:
    rows = [
        ("AE proportion", f"{report.ae_proportion:.4f}"),
        ("seed success rate", f"{report.seed_success_rate:.4f}"),
        ("mean prediction loss", f"{report.mean_loss:.6f}"),
        ("mean eps (L-inf)", f"{report.mean_eps:.6f}"),
        ("mean p_g of seeds", f"{report.mean_pg_seeds:.4f}"),
        (
            "mean p_g of AEs",
            "n/a" if math.isnan(report.mean_pg_aes) else f"{report.mean_pg_aes:.4f}",
        ),
        ("empirical global robustness", f"{report.global_robustness:.4f}"),
        (
            "latent FID (seeds vs AEs)",
            f"{report.fid_latent:.6f}" if report.fid_available else "omitted (no latents)",
        ),
        ("wall seconds", f"{report.wall_seconds:.2f}"),
        ("model queries", str(report.query_count)),
    ]
    width = max(len(name) for name, _ in rows)
    lines = [f"campaign report (r = {report.radius})"]
    lines += [f"  {name.ljust(width)}  {value}" for name, value in rows]
    lines.append(f"  seeds: {len(report.seeds)}, cases: {len(report.cases)}")
    return "\n".join(lines)


def cases_csv_lines(case_records) -> list[str]:
    lines = ["seed_index,case_id,loss,quality,eps,is_ae"]
    for c in case_records:
        lines.append(
            f"{c.seed_index},{c.case_id},{c.loss!r},{c.quality!r},{c.eps!r},{int(c.is_ae)}"
        )
    return lines


def write_report(report: CampaignReport, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report_to_json(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(report_to_text(report) + "\n")
    with open(os.path.join(out_dir, "cases.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(cases_csv_lines(report.cases)) + "\n")
