"""Command-line campaigns: rsep, pca-fit, kde-fit, seeds, gen, pgd, robust, eval, sample.

Every command reads one config file, takes a handful of override flags,
writes its artifacts into --out, and drops a manifest.json recording the
config hash, resolved values, and derived RNG seeds. Reruns with the
same config and seed produce byte-identical CSVs.
"""

from __future__ import annotations

import argparse
import json
import os
import shlex
import sys
import time

import numpy as np

from . import attacks, density, robustness, seeds as seedsel
from .classifier import load_builtin
from .config import Config, ConfigError, load_config
from .containers import (
    LabeledDataset,
    assemble_dataset,
    load_container,
    load_labels,
    save_container,
)
from .metrics import PerceptMetricKind, quality_score, quality_score_batch
from .wire import ServerError, spawn_server

# stream tags for per-purpose RNG derivation
_TAG_GA = 0
_TAG_MC = 1
_TAG_SAMPLE = 2
_TAG_RSEP = 3


def derive_seed(base: int, *tags: int) -> int:
    """Stable per-purpose sub-seed from the campaign base seed."""
    ss = np.random.SeedSequence((int(base), *[int(t) for t in tags]))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_lines(path, lines) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_manifest(out_dir, command, cfg: Config, args, seeds_used: dict, inputs: dict) -> None:
    overrides = {
        key: getattr(args, key)
        for key in ("seed", "k", "indicator", "budget", "alpha", "metric", "count", "nmc")
        if getattr(args, key, None) is not None
    }
    _write_json(
        os.path.join(out_dir, "manifest.json"),
        {
            "command": command,
            "config_sha256": cfg.sha256(),
            "config": cfg.as_dict(),
            "overrides": overrides,
            "rng_seeds": seeds_used,
            "inputs": inputs,
        },
    )


def _base_seed(cfg: Config, args) -> int:
    return args.seed if args.seed is not None else cfg.get("run.seed")


def _load_dataset(cfg: Config) -> LabeledDataset:
    images = load_container(cfg.path("dataset.images"))
    labels = load_labels(cfg.path("dataset.labels"))
    return assemble_dataset(images, labels, cfg.require("dataset.classes"))


def _open_backend(cfg: Config):
    kind = cfg.get("backend.kind")
    cap = cfg.get("backend.batch_cap")
    if kind == "builtin":
        return load_builtin(cfg.path("backend.manifest"), batch_cap=cap)
    command = cfg.require("backend.command")
    return spawn_server(shlex.split(command), batch_cap=cap)


def _resolve_radius(cfg: Config, ds: LabeledDataset, base_seed: int) -> tuple[float, dict]:
    if cfg.get("radius.mode") == "fixed":
        value = cfg.require("radius.value")
        policy = seedsel.RadiusPolicy(mode="fixed", value=value)
        return float(policy.value), {"mode": "fixed"}
    est = seedsel.r_separation(
        ds,
        sample_cap=cfg.get("radius.sample_cap"),
        rng_seed=derive_seed(base_seed, _TAG_RSEP),
    )
    if not 0.0 < est.r < 1.0:
        raise ConfigError(
            f"auto radius {est.r} falls outside (0, 1); set radius.value explicitly"
        )
    return est.r, {
        "mode": "auto",
        "subsampled": est.subsampled,
        "points_examined": est.points_examined,
    }


def _dataset_latents(cfg: Config, ds: LabeledDataset, pca_dir) -> tuple[np.ndarray, object]:
    """Latent vectors for every dataset row plus the embedding model (PCA or None)."""
    if cfg.get("latent.source") == "external":
        lat = density.load_latents(cfg.path("latent.means"), cfg.path("latent.stds"))
        if len(lat) != len(ds):
            raise ConfigError(
                f"latent files hold {len(lat)} rows but the dataset has {len(ds)}"
            )
        return np.asarray(lat.means, dtype=np.float64), None
    if pca_dir is None:
        raise ConfigError("latent.source = pca requires --pca <dir> from pca-fit")
    model = density.load_pca(
        os.path.join(pca_dir, "pca_mean.hdat"),
        os.path.join(pca_dir, "pca_components.hdat"),
    )
    flat = np.asarray(ds.images, dtype=np.float64).reshape(len(ds), -1)
    return density.pca_transform(model, flat), model


def _load_kde(kde_dir) -> density.KdeModel:
    centers = load_container(os.path.join(kde_dir, "kde_centers.hdat")).astype(np.float64)
    bw = load_container(os.path.join(kde_dir, "kde_bandwidths.hdat")).astype(np.float64)
    if centers.shape != bw.shape or centers.ndim != 2:
        raise ConfigError(f"KDE containers in {kde_dir} are inconsistent")
    return density.KdeModel(centers=centers, bandwidths=bw)


def _parse_seed_table(path) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    header = "index,label,p_g_norm,indicator_raw,unrobustness_norm,combined,m"
    if not lines or lines[0] != header:
        raise ConfigError(f"{path} is not a seed ranking file")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 7:
            raise ConfigError(f"malformed seed row: {ln!r}")
        rows.append(
            {
                "index": int(parts[0]),
                "label": int(parts[1]),
                "p_g_norm": float(parts[2]),
                "indicator_raw": float(parts[3]),
                "unrobustness_norm": float(parts[4]),
                "combined": float(parts[5]),
                "m": int(parts[6]),
            }
        )
    if not rows:
        raise ConfigError(f"{path} lists no seeds")
    return rows


def _normalize_against(reference_lds: np.ndarray, query_lds: np.ndarray) -> np.ndarray:
    """Scale query densities with the reference set's min-max bounds."""
    m = float(reference_lds.max())
    ref = np.exp(reference_lds - m)
    lo, hi = float(ref.min()), float(ref.max())
    q = np.exp(np.asarray(query_lds, dtype=np.float64) - m)
    if hi == lo:
        return np.full(q.shape, 0.5)
    return np.clip((q - lo) / (hi - lo), 0.0, 1.0)


# ---------------------------------------------------------------- commands


def cmd_rsep(args) -> int:
    cfg = load_config(args.config)
    ds = _load_dataset(cfg)
    base = _base_seed(cfg, args)
    est = seedsel.r_separation(
        ds, sample_cap=cfg.get("radius.sample_cap"), rng_seed=derive_seed(base, _TAG_RSEP)
    )
    os.makedirs(args.out, exist_ok=True)
    _write_json(
        os.path.join(args.out, "rsep.json"),
        {"r": est.r, "subsampled": est.subsampled, "points_examined": est.points_examined},
    )
    _write_manifest(args.out, "rsep", cfg, args, {"rsep": derive_seed(base, _TAG_RSEP)}, {})
    print(f"r-separation: r = {est.r!r} (subsampled: {est.subsampled})")
    return 0


def cmd_pca_fit(args) -> int:
    cfg = load_config(args.config)
    ds = _load_dataset(cfg)
    flat = np.asarray(ds.images, dtype=np.float64).reshape(len(ds), -1)
    model = density.pca_fit(flat, cfg.get("latent.dim"))
    os.makedirs(args.out, exist_ok=True)
    density.save_pca(
        model,
        os.path.join(args.out, "pca_mean.hdat"),
        os.path.join(args.out, "pca_components.hdat"),
    )
    loss = density.pca_recon_loss(model, flat)
    _write_json(
        os.path.join(args.out, "pca.json"),
        {"latent_dim": model.latent_dim, "recon_loss": loss},
    )
    _write_manifest(args.out, "pca-fit", cfg, args, {}, {})
    print(f"pca: d = {model.latent_dim}, reconstruction loss = {loss!r}")
    return 0


def cmd_kde_fit(args) -> int:
    cfg = load_config(args.config)
    if cfg.get("latent.source") == "external":
        lat = density.load_latents(cfg.path("latent.means"), cfg.path("latent.stds"))
        model = density.kde_fit(lat)
    else:
        ds = _load_dataset(cfg)
        latents, _ = _dataset_latents(cfg, ds, args.pca)
        model = density.kde_fit(latents)
    os.makedirs(args.out, exist_ok=True)
    save_container(model.centers.astype(np.float32), os.path.join(args.out, "kde_centers.hdat"))
    save_container(
        model.bandwidths.astype(np.float32), os.path.join(args.out, "kde_bandwidths.hdat")
    )
    _write_json(
        os.path.join(args.out, "kde.json"),
        {"count": model.count, "dim": model.dim, "source": cfg.get("latent.source")},
    )
    _write_manifest(args.out, "kde-fit", cfg, args, {}, {"pca": args.pca})
    print(f"kde: {model.count} components over {model.dim} dims")
    return 0


def cmd_sample(args) -> int:
    cfg = load_config(args.config)
    model = _load_kde(args.kde)
    base = _base_seed(cfg, args)
    count = args.count if args.count is not None else 1000
    sub = derive_seed(base, _TAG_SAMPLE)
    draws = density.kde_sample(model, count, sub)
    os.makedirs(args.out, exist_ok=True)
    save_container(draws.astype(np.float32), os.path.join(args.out, "samples.hdat"))
    _write_manifest(args.out, "sample", cfg, args, {"sample": sub}, {"kde": args.kde})
    print(f"sampled {count} latents into {args.out}/samples.hdat")
    return 0


def cmd_seeds(args) -> int:
    cfg = load_config(args.config)
    ds = _load_dataset(cfg)
    k = args.k if args.k is not None else cfg.get("select.k")
    if k < 1 or k > len(ds):
        raise ConfigError(f"k = {k} must lie in [1, dataset size {len(ds)}]")
    indicator = args.indicator if args.indicator is not None else cfg.get("select.indicator")
    budget = args.budget if args.budget is not None else cfg.get("select.budget")
    if budget is None:
        raise ConfigError("select.budget (or --budget) is required")
    if budget < k:
        raise ConfigError(f"budget M = {budget} must be >= k = {k}")
    kde = _load_kde(args.kde)
    latents, _ = _dataset_latents(cfg, ds, args.pca)
    backend = _open_backend(cfg)
    try:
        scores = seedsel.rank_seeds(backend, ds, kde, latents, indicator, k)
        budgets = seedsel.allocate_budget(scores, budget)
        queries = backend.queries
    finally:
        backend.close()
    os.makedirs(args.out, exist_ok=True)
    _write_lines(os.path.join(args.out, "seeds.csv"), seedsel.scores_csv_lines(scores, budgets))
    _write_manifest(
        args.out, "seeds", cfg, args, {}, {"kde": args.kde, "pca": args.pca}
    )
    print(f"ranked {k} seeds (indicator: {indicator}, budget: {budget}, queries: {queries})")
    return 0


def _gen_like_setup(args):
    cfg = load_config(args.config)
    ds = _load_dataset(cfg)
    rows = _parse_seed_table(args.seeds)
    for row in rows:
        if not 0 <= row["index"] < len(ds):
            raise ConfigError(f"seed index {row['index']} outside the dataset")
    base = _base_seed(cfg, args)
    radius, radius_info = _resolve_radius(cfg, ds, base)
    return cfg, ds, rows, base, radius, radius_info


def cmd_gen(args) -> int:
    cfg, ds, rows, base, radius, radius_info = _gen_like_setup(args)
    alpha = args.alpha if args.alpha is not None else cfg.get("ga.alpha")
    metric = args.metric if args.metric is not None else cfg.get("ga.metric")
    os.makedirs(args.out, exist_ok=True)
    backend = _open_backend(cfg)
    started = time.monotonic()
    case_lines = ["seed_index,case_id,loss,quality,eps,is_ae"]
    summaries = []
    seed_rngs = {}
    try:
        for row in rows:
            idx = row["index"]
            x = np.asarray(ds.images[idx], dtype=np.float64)
            y = int(ds.labels[idx])
            sub = derive_seed(base, _TAG_GA, idx)
            seed_rngs[str(idx)] = sub
            ga_cfg = attacks.GaConfig(
                population=cfg.get("ga.population"),
                max_iters=cfg.get("ga.iters"),
                radius=radius,
                outputs=min(row["m"], cfg.get("ga.population")),
                rng_seed=sub,
                alpha=alpha,
                metric=metric,
                mutation_rate=cfg.get("ga.mutation_rate"),
                plateau_window=cfg.get("ga.plateau_window"),
                plateau_tol=cfg.get("ga.plateau_tol"),
                mode=cfg.get("ga.mode"),
            )
            result = attacks.ga_generate(
                backend, x, y, ga_cfg,
                trace_path=os.path.join(args.out, f"trace_{idx}.csv"),
            )
            save_container(
                result.cases.astype(np.float32),
                os.path.join(args.out, f"cases_{idx}.hdat"),
            )
            eps = np.max(np.abs(result.cases - x), axis=(1, 2, 3))
            ae_count = 0
            for cid in range(result.cases.shape[0]):
                is_ae = result.losses[cid] >= 0.0
                ae_count += int(is_ae)
                case_lines.append(
                    f"{idx},{cid},{result.losses[cid]!r},{result.qualities[cid]!r},"
                    f"{eps[cid]!r},{int(is_ae)}"
                )
            summaries.append(
                {
                    "index": idx,
                    "label": y,
                    "p_g_norm": row["p_g_norm"],
                    "allocated": row["m"],
                    "case_count": int(result.cases.shape[0]),
                    "ae_count": ae_count,
                    "mean_loss": float(np.mean(result.losses)),
                    "mean_eps": float(np.mean(eps)) if eps.size else 0.0,
                    "generations": result.generations,
                    "converged": result.converged,
                    "case_file": f"cases_{idx}.hdat",
                }
            )
        queries = backend.queries
    finally:
        backend.close()
    _write_lines(os.path.join(args.out, "gen_cases.csv"), case_lines)
    _write_json(
        os.path.join(args.out, "gen.json"),
        {
            "radius": radius,
            "radius_info": radius_info,
            "alpha": alpha,
            "metric": str(metric),
            "mode": cfg.get("ga.mode"),
            "seeds": summaries,
            "query_count": queries,
            "wall_seconds": time.monotonic() - started,
        },
    )
    _write_manifest(args.out, "gen", cfg, args, seed_rngs, {"seeds": args.seeds})
    total_aes = sum(s["ae_count"] for s in summaries)
    total_cases = sum(s["case_count"] for s in summaries)
    print(f"generated {total_cases} cases ({total_aes} AEs) across {len(rows)} seeds")
    return 0


def cmd_pgd(args) -> int:
    cfg, ds, rows, base, radius, radius_info = _gen_like_setup(args)
    steps = cfg.get("pgd.steps")
    step_size = cfg.get("pgd.step_size")
    os.makedirs(args.out, exist_ok=True)
    backend = _open_backend(cfg)
    started = time.monotonic()
    case_lines = ["seed_index,case_id,loss,quality,eps,is_ae"]
    outputs = []
    summaries = []
    try:
        for row in rows:
            idx = row["index"]
            x = np.asarray(ds.images[idx], dtype=np.float64)
            y = int(ds.labels[idx])
            adv = attacks.pgd_baseline(backend, x, y, radius, steps, step_size)
            probs = backend.predict_probs(adv[None, ...])[0]
            loss = seedsel.prediction_loss(probs, y)
            quality = quality_score(PerceptMetricKind(cfg.get("ga.metric")), x, adv, radius)
            eps = float(np.max(np.abs(adv - x)))
            is_ae = loss >= 0.0
            outputs.append(adv)
            case_lines.append(
                f"{idx},0,{loss!r},{quality!r},{eps!r},{int(is_ae)}"
            )
            summaries.append(
                {
                    "index": idx,
                    "label": y,
                    "p_g_norm": row["p_g_norm"],
                    "loss": loss,
                    "eps": eps,
                    "is_ae": bool(is_ae),
                }
            )
        queries = backend.queries
    finally:
        backend.close()
    save_container(
        np.stack(outputs).astype(np.float32), os.path.join(args.out, "pgd_cases.hdat")
    )
    _write_lines(os.path.join(args.out, "pgd_cases.csv"), case_lines)
    _write_json(
        os.path.join(args.out, "pgd.json"),
        {
            "radius": radius,
            "radius_info": radius_info,
            "steps": steps,
            "step_size": step_size,
            "seeds": summaries,
            "query_count": queries,
            "wall_seconds": time.monotonic() - started,
        },
    )
    _write_manifest(args.out, "pgd", cfg, args, {}, {"seeds": args.seeds})
    aes = sum(1 for s in summaries if s["is_ae"])
    print(f"pgd: {aes}/{len(summaries)} seeds yielded AEs")
    return 0


def cmd_robust(args) -> int:
    cfg, ds, rows, base, radius, _ = _gen_like_setup(args)
    n_mc = args.nmc if args.nmc is not None else cfg.get("robust.n_mc")
    backend = _open_backend(cfg)
    lines = ["index,label,r_hat,n_mc,log_complement"]
    seeds_used = {}
    try:
        for row in rows:
            idx = row["index"]
            sub = derive_seed(base, _TAG_MC, idx)
            seeds_used[str(idx)] = sub
            est = robustness.mc_local_robustness(
                backend,
                np.asarray(ds.images[idx], dtype=np.float64),
                int(ds.labels[idx]),
                radius,
                n_mc,
                sub,
            )
            lines.append(
                f"{idx},{row['label']},{est.r_hat!r},{est.n_mc},{est.log_complement!r}"
            )
    finally:
        backend.close()
    os.makedirs(args.out, exist_ok=True)
    _write_lines(os.path.join(args.out, "robust.csv"), lines)
    _write_manifest(args.out, "robust", cfg, args, seeds_used, {"seeds": args.seeds})
    print(f"estimated local robustness for {len(rows)} seeds (n_mc = {n_mc})")
    return 0


def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    ds = _load_dataset(cfg)
    gen_path = os.path.join(args.gen, "gen.json")
    if not os.path.exists(gen_path):
        raise ConfigError(f"{args.gen} does not contain gen.json (run gen first)")
    with open(gen_path, "r", encoding="utf-8") as fh:
        gen_info = json.load(fh)
    radius = float(gen_info["radius"])
    started = time.monotonic()

    embed = None
    kde = None
    if args.pca is not None:
        embed = density.load_pca(
            os.path.join(args.pca, "pca_mean.hdat"),
            os.path.join(args.pca, "pca_components.hdat"),
        )
    if args.kde is not None:
        kde = _load_kde(args.kde)

    backend = _open_backend(cfg)
    case_records = []
    summaries = []
    seed_images = []
    ae_images = []
    try:
        for s in gen_info["seeds"]:
            idx = int(s["index"])
            label = int(s["label"])
            cases = load_container(os.path.join(args.gen, s["case_file"])).astype(np.float64)
            x = np.asarray(ds.images[idx], dtype=np.float64)
            seed_images.append(x)
            probs = backend.predict_probs(cases)
            losses = seedsel.prediction_loss_batch(probs, label)
            quals = quality_score_batch(
                PerceptMetricKind(gen_info["metric"]), x, cases, radius
            )
            eps = np.max(np.abs(cases - x), axis=(1, 2, 3))
            ae_mask = losses >= 0.0
            for cid in range(cases.shape[0]):
                case_records.append(
                    robustness.CaseRecord(
                        seed_index=idx,
                        case_id=cid,
                        loss=float(losses[cid]),
                        quality=float(quals[cid]),
                        eps=float(eps[cid]),
                        is_ae=bool(ae_mask[cid]),
                    )
                )
            if ae_mask.any():
                ae_images.extend(cases[ae_mask])
                preds = np.argmax(probs[ae_mask], axis=1)
                eval_acc = float(np.mean(preds == label))
            else:
                eval_acc = 1.0
            summaries.append(
                robustness.SeedSummary(
                    index=idx,
                    label=label,
                    allocated=int(s["allocated"]),
                    case_count=int(cases.shape[0]),
                    ae_count=int(ae_mask.sum()),
                    mean_loss=float(losses.mean()),
                    mean_eps=float(eps.mean()),
                    p_g_norm=float(s["p_g_norm"]),
                    eval_acc=eval_acc,
                )
            )
        queries = backend.queries
    finally:
        backend.close()

    seed_latents = ae_latents = None
    pg_of_aes = None
    if embed is not None:
        seed_flat = np.stack(seed_images).reshape(len(seed_images), -1)
        seed_latents = density.pca_transform(embed, seed_flat)
        if ae_images:
            ae_flat = np.stack(ae_images).reshape(len(ae_images), -1)
            ae_latents = density.pca_transform(embed, ae_flat)
            if kde is not None:
                ref = density.kde_log_density_batch(
                    kde,
                    density.pca_transform(
                        embed, np.asarray(ds.images, dtype=np.float64).reshape(len(ds), -1)
                    ),
                )
                query = density.kde_log_density_batch(kde, ae_latents)
                pg_of_aes = _normalize_against(ref, query)

    report = robustness.build_report(
        radius=radius,
        seed_summaries=summaries,
        case_records=case_records,
        wall_seconds=time.monotonic() - started,
        query_count=queries,
        seed_latents=seed_latents,
        ae_latents=ae_latents,
        pg_of_aes=pg_of_aes,
    )
    os.makedirs(args.out, exist_ok=True)
    robustness.write_report(report, args.out)
    _write_manifest(
        args.out, "eval", cfg, args, {},
        {"gen": args.gen, "kde": args.kde, "pca": args.pca},
    )
    print(robustness.report_to_text(report))
    return 0


# ---------------------------------------------------------------- wiring


def _add_common(p) -> None:
    p.add_argument("--config", required=True, help="campaign config file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override run.seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distprobe",
        description="distribution-aware adversarial testing for image classifiers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rsep", help="estimate the r-separation radius")
    _add_common(p)
    p.set_defaults(func=cmd_rsep)

    p = sub.add_parser("pca-fit", help="fit the PCA latent model")
    _add_common(p)
    p.set_defaults(func=cmd_pca_fit)

    p = sub.add_parser("kde-fit", help="fit the adaptive KDE over latents")
    _add_common(p)
    p.add_argument("--pca", default=None, help="pca-fit output dir (latent.source = pca)")
    p.set_defaults(func=cmd_kde_fit)

    p = sub.add_parser("sample", help="draw latents from a fitted KDE")
    _add_common(p)
    p.add_argument("--kde", required=True, help="kde-fit output dir")
    p.add_argument("--count", type=int, default=None, help="sample count (default 1000)")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("seeds", help="rank seeds and allocate the test budget")
    _add_common(p)
    p.add_argument("--kde", required=True, help="kde-fit output dir")
    p.add_argument("--pca", default=None, help="pca-fit output dir (latent.source = pca)")
    p.add_argument("--k", type=int, default=None, help="override select.k")
    p.add_argument("--indicator", choices=("grad", "sep"), default=None)
    p.add_argument("--budget", type=int, default=None, help="override select.budget")
    p.set_defaults(func=cmd_seeds)

    p = sub.add_parser("gen", help="run the GA around each selected seed")
    _add_common(p)
    p.add_argument("--seeds", required=True, help="seeds.csv from the seeds command")
    p.add_argument("--alpha", type=float, default=None, help="override ga.alpha")
    p.add_argument("--metric", choices=("mse", "psnr", "ssim"), default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("pgd", help="run the PGD baseline on each selected seed")
    _add_common(p)
    p.add_argument("--seeds", required=True, help="seeds.csv from the seeds command")
    p.set_defaults(func=cmd_pgd)

    p = sub.add_parser("robust", help="Monte-Carlo local robustness per seed")
    _add_common(p)
    p.add_argument("--seeds", required=True, help="seeds.csv from the seeds command")
    p.add_argument("--nmc", type=int, default=None, help="override robust.n_mc")
    p.set_defaults(func=cmd_robust)

    p = sub.add_parser("eval", help="aggregate a gen run into a campaign report")
    _add_common(p)
    p.add_argument("--gen", required=True, help="gen output dir")
    p.add_argument("--kde", default=None, help="kde-fit output dir (for p_g of AEs)")
    p.add_argument("--pca", default=None, help="pca-fit output dir (for latent FID)")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except ServerError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
