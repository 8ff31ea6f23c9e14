"""Acceptance gate: every shipped guarantee gets one test and one
printed verdict line.

The heavy fixtures (synthetic dataset, trained net, seed probes) live
in _desk and are cached across tests, so the suite stays well inside
the per-check time budgets on an ordinary laptop.
"""

from __future__ import annotations

import time
from types import SimpleNamespace

import numpy as np

from _desk import DESK_RADIUS, attackable_seeds, collapse_prone_seeds, desk_fixture
from distprobe.attacks import GaConfig, ae_filter, ga_generate, pgd_baseline
from distprobe.containers import LatentSet, assemble_dataset
from distprobe.density import (
    kde_fit,
    kde_log_density_batch,
    kde_sample,
    pca_fit,
    pca_recon_loss,
    pca_transform,
)
from distprobe.metrics import fid, mse, psnr, ssim
from distprobe.robustness import mc_local_robustness
from distprobe.seeds import allocate_budget, prediction_loss_batch, rank_seeds


def _verdict(name, ok, t0, budget_s, detail):
    elapsed = time.time() - t0
    in_time = budget_s is None or elapsed <= budget_s
    word = "PASS" if (ok and in_time) else "FAIL"
    cap = "" if budget_s is None else f" of {budget_s:.0f}s allowed"
    line = f"[{word}] {name}: {detail} ({elapsed:.1f}s{cap})"
    print(line, flush=True)
    assert ok, line
    assert in_time, line


def _desk_arrays():
    ds, h = desk_fixture()
    X = np.asarray(ds.images, np.float64)
    labels = np.asarray(ds.labels)
    probs = h.predict_probs(X)
    correct = np.flatnonzero(probs.argmax(1) == labels)
    return ds, h, X, labels, correct


def test_a1_metric_and_density_oracles():
    t0 = time.time()
    rng = np.random.Generator(np.random.PCG64(3))
    bad = []

    x = rng.random((1, 12, 12))
    if mse(x, x) != 0.0:
        bad.append("mse self")
    if psnr(x, x) != 100.0:
        bad.append("psnr self cap")
    if abs(ssim(x, x) - 1.0) > 1e-12:
        bad.append("ssim self")

    feats = rng.normal(size=(400, 6))
    if abs(fid(feats, feats)) > 1e-8:
        bad.append("fid self")
    delta = rng.normal(size=6) * 0.3
    if abs(fid(feats + delta, feats) - float(delta @ delta)) > 1e-6:
        bad.append("fid mean shift")

    # adaptive KDE against a direct product-of-normals sum
    worst = 0.0
    for n, d in ((3, 1), (20, 2), (60, 5), (100, 8)):
        centers = rng.normal(size=(n, d))
        bw = rng.uniform(0.2, 1.5, size=(n, d))
        kde = kde_fit(LatentSet(means=centers, stds=bw))
        qs = centers[: min(n, 10)] + rng.normal(size=(min(n, 10), d)) * 0.3
        got = kde_log_density_batch(kde, qs)
        for q, g in zip(qs, got):
            comp = np.exp(-0.5 * ((q - centers) / bw) ** 2) / (bw * np.sqrt(2 * np.pi))
            want = float(np.log(np.mean(np.prod(comp, axis=1))))
            worst = max(worst, abs(g - want) / max(abs(want), 1.0))
    if worst > 1e-9:
        bad.append(f"kde brute force rel={worst:.2e}")

    for d in (1, 3, 6):
        data = rng.normal(size=(80, d)) @ rng.normal(size=(d, 30))
        if pca_recon_loss(pca_fit(data, d), data) > 1e-8:
            bad.append(f"pca rank-{d}")

    ds, h, X, labels, correct = _desk_arrays()
    xi = int(correct[0])
    y = int(labels[xi])
    eps = 1e-5
    flat = X[xi].reshape(-1)
    eye = np.eye(flat.size) * eps
    plus = (flat[None, :] + eye).reshape((flat.size,) + X[xi].shape)
    minus = (flat[None, :] - eye).reshape((flat.size,) + X[xi].shape)
    fd = (
        prediction_loss_batch(h.predict_probs(plus), y)
        - prediction_loss_batch(h.predict_probs(minus), y)
    ) / (2 * eps)
    g = h.loss_gradient(X[xi], y).reshape(-1)
    rel = float(np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-30))
    if rel > 1e-4:
        bad.append(f"gradient fd rel={rel:.2e}")

    _verdict(
        "oracle suite",
        not bad,
        t0,
        60,
        "metric identities, fid shift, kde brute force, pca rank, gradient fd"
        + (f"; failed: {bad}" if bad else " all within tolerance"),
    )


def test_a2_ball_containment_and_determinism():
    t0 = time.time()
    ds, h, X, labels, correct = _desk_arrays()
    seeds = correct[:20]

    def run_once():
        stacks = []
        for i in seeds:
            cfg = GaConfig(
                population=500,
                max_iters=3,
                radius=DESK_RADIUS,
                outputs=500,
                rng_seed=1234 + int(i),
                alpha=1.0,
                metric="mse",
                mode="two_step",
            )
            res = ga_generate(h, X[i], int(labels[i]), cfg)
            stacks.append(np.asarray(res.cases))
        return stacks

    first = run_once()
    second = run_once()

    total = sum(len(s) for s in first)
    worst_ball = 0.0
    in_bounds = True
    for s, i in zip(first, seeds):
        worst_ball = max(worst_ball, float(np.max(np.abs(s - X[i]))))
        in_bounds = in_bounds and bool((s >= 0.0).all() and (s <= 1.0).all())
    identical = all(
        a.tobytes() == b.tobytes() for a, b in zip(first, second)
    )

    ok = (
        total == 10_000
        and worst_ball <= DESK_RADIUS + 1e-6
        and in_bounds
        and identical
    )
    _verdict(
        "ball containment + determinism",
        ok,
        t0,
        300,
        f"{total} cases over {len(seeds)} seeds, max |x'-x|_inf={worst_ball:.6f} "
        f"(r={DESK_RADIUS}), bounds ok={in_bounds}, rerun identical={identical}",
    )


def test_a3_two_step_versus_regular():
    t0 = time.time()
    ds, h, X, labels, _ = _desk_arrays()
    idxs = collapse_prone_seeds(h, ds, DESK_RADIUS, 8)

    alphas = (0.5, 1.0, 1.5, 2.0)
    pooled = {}
    for mode in ("two_step", "regular"):
        for alpha in alphas:
            props = []
            for i in idxs:
                cfg = GaConfig(
                    population=100,
                    max_iters=150,
                    radius=DESK_RADIUS,
                    outputs=20,
                    rng_seed=7000 + i,
                    alpha=alpha,
                    metric="mse",
                    mode=mode,
                )
                res = ga_generate(h, X[i], int(labels[i]), cfg)
                props.append(float(np.mean(res.losses >= 0.0)))
            pooled[(mode, alpha)] = float(np.mean(props))

    two = [pooled[("two_step", a)] for a in alphas]
    reg = [pooled[("regular", a)] for a in alphas]
    ok = len(idxs) == 8 and all(v >= 0.5 for v in two) and reg[-1] < 0.1
    _verdict(
        "two-step vs regular",
        ok,
        t0,
        600,
        f"AE proportion of emitted cases over alpha {alphas}: "
        f"two_step={[round(v, 3) for v in two]}, regular={[round(v, 3) for v in reg]}",
    )


def test_a4_indicator_correlation():
    t0 = time.time()
    from distprobe.seeds import indicator_grad, indicator_sep, predict_pool

    ds, h, X, labels, correct = _desk_arrays()
    seeds = correct[:240]
    pool_probs = predict_pool(h, ds)
    grads, seps, log_comp = [], [], []
    for i in seeds:
        y = int(labels[i])
        grads.append(indicator_grad(h, X[i], y))
        seps.append(indicator_sep(h, X[i], y, ds, pool_probs))
        est = mc_local_robustness(h, X[i], y, DESK_RADIUS, 2000, rng_seed=9000 + int(i))
        log_comp.append(est.log_complement)
    grads, seps, log_comp = map(np.asarray, (grads, seps, log_comp))
    c_grad = float(np.corrcoef(grads, log_comp)[0, 1])
    c_sep = float(np.corrcoef(seps, log_comp)[0, 1])

    ok = len(seeds) >= 200 and c_grad >= 0.3 and c_sep <= -0.3
    _verdict(
        "indicator correlation",
        ok,
        t0,
        900,
        f"{len(seeds)} seeds, n_mc=2000: pearson(grad, log-complement)={c_grad:+.3f}, "
        f"pearson(sep, log-complement)={c_sep:+.3f}",
    )


def test_a5_kde_sampling_fidelity():
    t0 = time.time()
    rng = np.random.Generator(np.random.PCG64(42))
    count = 1000

    # encoder-style latents: two correlated anisotropic clusters
    which = rng.random(count) < 0.55
    th = 0.7
    rot = np.array(
        [
            [np.cos(th), -np.sin(th), 0, 0],
            [np.sin(th), np.cos(th), 0, 0],
            [0, 0, 1, 0],
            [0, 0, 0, 1],
        ]
    )
    z = rng.standard_normal((count, 4))
    means = np.where(
        which[:, None],
        np.array([-2.0, 0.4, 0.0, 0.0]) + (z * [1.0, 0.12, 0.05, 0.03]) @ rot.T,
        np.array([2.0, -0.6, 0.3, 0.0]) + (z * [0.8, 0.10, 0.06, 0.03]) @ rot.T,
    )
    stds = rng.uniform(0.02, 0.08, size=(count, 4))

    train_m, train_s, held = means[:600], stds[:600], means[600:]
    kde = kde_fit(LatentSet(means=train_m, stds=train_s))
    from_kde = kde_sample(kde, 1000, rng_seed=77)
    lo, hi = train_m.min(0), train_m.max(0)
    from_box = np.random.Generator(np.random.PCG64(78)).uniform(
        lo, hi, size=(1000, 4)
    )
    f_kde = fid(from_kde, held)
    f_box = fid(from_box, held)

    ok = f_box >= 5.0 * f_kde
    _verdict(
        "kde sampling fidelity",
        ok,
        t0,
        120,
        f"latent fid: kde={f_kde:.4f}, uniform box={f_box:.4f} "
        f"(ratio {f_box / f_kde:.1f}x, need >= 5x)",
    )


def test_a6_perceptual_advantage_over_pgd():
    t0 = time.time()
    ds, h, X, labels, _ = _desk_arrays()
    seeds = attackable_seeds(h, ds, DESK_RADIUS, 50)

    flat = X.reshape(len(X), -1)
    pca = pca_fit(flat, 4)

    ga_best, pgd_hits = [], []
    ga_missing = pgd_missing = 0
    for i in seeds:
        y = int(labels[i])
        cfg = GaConfig(
            population=100,
            max_iters=150,
            radius=DESK_RADIUS,
            outputs=20,
            rng_seed=5000 + i,
            alpha=1.0,
            metric="mse",
            mode="two_step",
        )
        res = ga_generate(h, X[i], y, cfg)
        sub = ae_filter(res.cases, res.losses)
        if len(sub.cases):
            ga_best.append(sub.cases[0])
        else:
            ga_missing += 1
        adv = pgd_baseline(h, X[i], y, DESK_RADIUS, steps=32, step_size=2.0 / 255.0)
        if prediction_loss_batch(h.predict_probs(adv[None]), y)[0] >= 0.0:
            pgd_hits.append(adv)
        else:
            pgd_missing += 1

    seed_lat = pca_transform(pca, flat[seeds])
    ga_lat = pca_transform(pca, np.asarray(ga_best).reshape(len(ga_best), -1))
    pgd_lat = pca_transform(pca, np.asarray(pgd_hits).reshape(len(pgd_hits), -1))
    f_ga = fid(seed_lat, ga_lat)
    f_pgd = fid(seed_lat, pgd_lat)

    ok = (
        len(seeds) == 50
        and ga_missing == 0
        and pgd_missing == 0
        and f_ga <= 0.5 * f_pgd
    )
    _verdict(
        "perceptual advantage over pgd",
        ok,
        t0,
        900,
        f"50 seeds, alpha=1, mse: latent fid ga={f_ga:.4f}, pgd={f_pgd:.4f} "
        f"(ratio {f_ga / f_pgd:.3f}, need <= 0.5)",
    )


def test_a7_seed_selection_and_budget():
    t0 = time.time()
    ds, h, X, labels, _ = _desk_arrays()

    sub = assemble_dataset(np.asarray(ds.images[:50]), labels[:50], 2)
    flat = X.reshape(len(X), -1)
    pca = pca_fit(flat, 4)
    lat_all = pca_transform(pca, flat)
    kde = kde_fit(lat_all)
    sub_lat = lat_all[:50]

    probs = h.predict_probs(np.asarray(sub.images, np.float64))
    sub_labels = np.asarray(sub.labels)
    correct = np.flatnonzero(probs.argmax(1) == sub_labels)
    k = 30

    mismatches = []
    for indicator in ("grad", "sep"):
        # ranking rebuilt from scratch: density and fragility columns
        # min-max scaled over the correct candidates, product order,
        # ties broken by dataset index
        ld = kde_log_density_batch(kde, sub_lat[correct])
        dens = np.exp(ld - ld.max())
        pg = (dens - dens.min()) / (dens.max() - dens.min())
        raw = np.empty(correct.size)
        for j, idx in enumerate(correct):
            xi = np.asarray(sub.images[idx], np.float64)
            y = int(sub_labels[idx])
            if indicator == "grad":
                raw[j] = float(np.max(np.abs(h.loss_gradient(xi, y))))
            else:
                fx = h.predict_probs(xi[None])[0]
                mask = sub_labels != y
                pool_probs = h.predict_probs(np.asarray(sub.images, np.float64)[mask])
                raw[j] = float(np.max(np.abs(pool_probs - fx), axis=1).min())
        scaled = (raw - raw.min()) / (raw.max() - raw.min())
        unrob = scaled if indicator == "grad" else 1.0 - scaled
        comb = pg * unrob
        order = sorted(range(correct.size), key=lambda i: (-comb[i], correct[i]))
        want = [int(correct[i]) for i in order[:k]]

        got = [s.index for s in rank_seeds(h, sub, kde, sub_lat, indicator, k)]
        if got != want:
            mismatches.append(indicator)

    rng = np.random.Generator(np.random.PCG64(99))
    violations = 0
    for _ in range(1000):
        n = int(rng.integers(1, 41))
        budget = int(rng.integers(n, n + 5000))
        w = rng.random(n) * (rng.random(n) < 0.9)
        alloc = allocate_budget(
            [SimpleNamespace(p_g_norm=float(v)) for v in w], budget
        )
        if sum(alloc) != budget or min(alloc) < 1 or len(alloc) != n:
            violations += 1

    ok = not mismatches and violations == 0
    _verdict(
        "seed selection + budget",
        ok,
        t0,
        None,
        f"ordering matches brute force on 50 seeds for grad and sep"
        f"{' (mismatch: ' + str(mismatches) + ')' if mismatches else ''}, "
        f"budget conserved on 1000 random weight vectors ({violations} violations)",
    )
