"""Acceptance suite: one test per criterion, each printing a pass/fail line.

The Salinas and Pavia reproduction criteria need converted datasets (see the
README's dataset section); point HSIMDAE_SALINAS / HSIMDAE_PAVIA at the
portable dataset directories, or place them at data/salinas and data/pavia.
Without them those tests skip and the synthetic criteria stand alone.
"""

import json
import os
import time
from pathlib import Path

import numpy as np
import pytest

from hsimdae.augment import MixParams, build_augmented_set
from hsimdae.classifier import MlpTopology, SgdHyper, gradient_check, init_network
from hsimdae.cube import (
    apply_normalizer,
    fit_normalizer,
    load_cube,
    save_dataset,
    scene_interior_mask,
    stratified_split,
    synth_scene,
)
from hsimdae.features import train_models
from hsimdae.harness import ExperimentConfig, run_ablation
from hsimdae.mdae import (
    MdaeParams,
    add_bias_row,
    reconstruction_mse_batch,
    replicate_and_corrupt,
    solve_mdae,
)
from hsimdae.postproc import fill_holes

from conftest import three_class_spec
from test_mdae import gd_minimize
from test_postproc import bfs_fill_holes

REPO_ROOT = Path(__file__).resolve().parent.parent


def _passed(name, detail):
    print(f"ACCEPTANCE PASS: {name} ({detail})")


def _dataset_dir(env_var, default_subdir):
    candidate = os.environ.get(env_var)
    if candidate:
        return Path(candidate)
    return REPO_ROOT / "data" / default_subdir


def _require_dataset(env_var, default_subdir, label):
    path = _dataset_dir(env_var, default_subdir)
    if not (path / "meta.json").is_file():
        pytest.skip(
            f"{label} dataset not found at {path}; convert it first "
            f"(see README) or set {env_var}. Synthetic criteria stand alone."
        )
    return path


@pytest.fixture(scope="module")
def synthetic_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance-scene")
    spec = three_class_spec(noise_sigma=0.02)
    cube, labels = synth_scene(spec, seed=3)
    save_dataset(root, cube, labels)
    return root


def _default_config(dataset, seed, **overrides):
    base = dict(
        dataset=str(dataset),
        network_id=1,
        fractions=(0.1, 0.1, 0.8),
        split_seed=seed,
        mdae=MdaeParams(seed=seed),
        mix=MixParams(seed=seed),
        sgd=SgdHyper(seed=seed),
    )
    base.update(overrides)
    return ExperimentConfig(**base)


@pytest.mark.slow
def test_table_ii_salinas_reproduction():
    """Reference Salinas accuracies, best of three seeds, default parameters."""
    dataset = _require_dataset("HSIMDAE_SALINAS", "salinas", "Salinas")
    import resource

    runs = {}
    for seed in (0, 1, 2):
        records, _ = run_ablation(_default_config(dataset, seed))
        runs[seed] = records
        for r in records:
            assert (r.wall_time_s or 0) <= 600, (
                f"network {r.network_id} took {r.wall_time_s:.0f}s (> 10 min)"
            )
    peak_gb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024 ** 2
    assert peak_gb <= 2.0, f"peak memory {peak_gb:.2f} GB exceeds 2 GB"

    def best(metric):
        return min(runs, key=lambda s: abs(metric(runs[s])))

    net1_err = min(abs(runs[s][0].raw_oa - 93.33) for s in runs)
    net2_err = min(abs(runs[s][1].raw_oa - 94.55) for s in runs)
    net6_err = min(abs(runs[s][5].morph_oa - 98.54) for s in runs)
    assert net1_err <= 1.5, f"network 1 raw OA off by {net1_err:.2f} (allow 1.5)"
    assert net2_err <= 1.5, f"network 2 raw OA off by {net2_err:.2f} (allow 1.5)"
    assert net6_err <= 1.0, f"network 6 morph OA off by {net6_err:.2f} (allow 1.0)"
    morph_pattern = any(
        all(r.morph_oa >= r.raw_oa for r in runs[s]) for s in runs
    )
    assert morph_pattern, "no seed had morph OA >= raw OA on every network"
    _passed(
        "table-ii-salinas",
        f"net1 within {net1_err:.2f}, net2 within {net2_err:.2f}, "
        f"net6 morph within {net6_err:.2f}",
    )


@pytest.mark.slow
def test_table_iii_pavia_spot_check():
    """Reference Pavia University network-6 accuracies, default parameters."""
    dataset = _require_dataset("HSIMDAE_PAVIA", "pavia", "Pavia University")
    _, labels = load_cube(dataset)
    labeled = int(labels.labeled_indices().size)
    # commonly cited figures disagree: 32,776 labeled pixels on one hand,
    # split counts 4,273 + 4,273 + 34,230 = 42,776 on the other; the
    # standard ground truth carries 42,776
    print(f"pavia labeled pixels found: {labeled} "
          f"(cited: 32,776; split counts imply: 42,776)")
    best_raw = None
    best_morph = None
    for seed in (0, 1, 2):
        cfg = _default_config(dataset, seed, network_id=6)
        from hsimdae.harness import run_experiment

        record = run_experiment(cfg)
        raw_err = abs(record.raw_oa - 94.38)
        morph_err = abs(record.morph_oa - 96.96)
        best_raw = raw_err if best_raw is None else min(best_raw, raw_err)
        best_morph = morph_err if best_morph is None else min(best_morph, morph_err)
    assert best_raw <= 1.5, f"network 6 raw OA off by {best_raw:.2f} (allow 1.5)"
    assert best_morph <= 1.0, f"network 6 morph OA off by {best_morph:.2f} (allow 1.0)"
    _passed("table-iii-pavia",
            f"raw within {best_raw:.2f}, morph within {best_morph:.2f}")


def test_mdae_oracle_equivalence():
    """Closed form vs converged gradient descent on 20+ random instances."""
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(20):
        n_bands = int(rng.integers(2, 9))
        n = int(rng.integers(4, 21))
        X = rng.uniform(0, 1, (n_bands, n))
        params = MdaeParams(
            zero_prob=float(rng.uniform(0, 0.05)),
            n_noise_bands=int(rng.integers(1, n_bands + 1)),
            noise_variance=0.01,
            m_copies=int(rng.integers(2, 6)),
            seed=int(rng.integers(0, 2**32)),
        )
        xbar, xtilde = replicate_and_corrupt(X, params)
        xbar, xtilde = add_bias_row(xbar), add_bias_row(xtilde)
        w, _ = solve_mdae(xbar, xtilde, 1e-6)
        w_gd = gd_minimize(xbar, xtilde, 1e-6)
        rel = np.linalg.norm(w - w_gd) / np.linalg.norm(w_gd)
        worst = max(worst, rel)
        assert rel < 1e-4, f"closed form vs gradient descent differ by {rel:.2e}"

    # zero corruption, full rank: the solution is the identity map
    X = add_bias_row(rng.uniform(0, 1, (6, 50)))
    w, _ = solve_mdae(X, X, 0.0)
    ident_err = float(np.abs(w - np.eye(7)).max())
    assert ident_err < 1e-6
    _passed("mdae-oracle-equivalence",
            f"worst relative distance {worst:.2e}, identity error {ident_err:.2e}")


def test_mdae_class_discrimination():
    """Nearest-reconstruction class assignment on the noiseless scene.

    Class models are fitted on pure (interior) exemplars; border mixtures in
    a noiseless linear scene lie on the inter-endmember segment, which a
    linear reconstruction extrapolates, so they are not class-pure training
    material. Mixed pixels are excluded from scoring anyway.
    """
    spec = three_class_spec(noise_sigma=0.0)
    cube, labels = synth_scene(spec, seed=3)
    split = stratified_split(labels, (0.1, 0.1, 0.8), seed=5)
    cube = apply_normalizer(cube, fit_normalizer(cube, split.train))
    interior_train = split.train[
        scene_interior_mask(spec).reshape(-1)[split.train]
    ]
    X = cube.spectra(interior_train)
    y = labels.flat[interior_train].astype(np.int64)
    models = train_models(X, y, 3, MdaeParams(n_noise_bands=4, seed=11))
    spectra = cube.spectra()
    errors = np.stack([
        reconstruction_mse_batch(m, spectra) for m in models[:3]
    ])
    assigned = np.argmin(errors, axis=0) + 1
    interior = scene_interior_mask(spec).reshape(-1)
    agreement = float(np.mean(assigned[interior] == labels.flat[interior]))
    assert agreement >= 0.99, f"interior agreement {agreement:.4f} < 0.99"
    _passed("mdae-class-discrimination", f"interior agreement {agreement:.4f}")


def test_gradient_check():
    """Analytic vs central-difference gradients on a small 64-bit network."""
    rng = np.random.default_rng(7)
    net = init_network(MlpTopology(7, (9, 5), 3), seed=21)
    assert net.n_parameters <= 1000
    batch = rng.uniform(-1, 1, (7, 12))
    labels = rng.integers(1, 4, 12)
    err = gradient_check(net, batch, labels, n_samples=150, seed=22)
    assert err < 1e-4, f"max relative gradient error {err:.2e} >= 1e-4"
    _passed("gradient-check",
            f"{net.n_parameters} parameters, max relative error {err:.2e}")


def test_augmentation_exactness():
    """Every sample reconstructs bit-exactly; ratios and counts match."""
    rng = np.random.default_rng(13)
    sizes = {1: 37, 2: 18, 3: 25, 4: 9}
    y = np.concatenate([np.full(n, c) for c, n in sizes.items()])
    X = rng.uniform(0, 1, (12, y.size))
    params = MixParams(select_frac=0.25, ratio_step=0.1, min_abundance=0.55,
                       seed=3)
    samples = build_augmented_set(X, y, params)
    allowed = {0.6, 0.7, 0.8, 0.9}
    for s in samples:
        assert s.alpha in allowed
        recomputed = s.alpha * X[:, s.source_a] + (1.0 - s.alpha) * X[:, s.source_b]
        assert np.array_equal(s.spectrum, recomputed), "not bit-reconstructible"
    expected = sum(int(np.ceil(0.25 * n)) * 4 for n in sizes.values())
    assert len(samples) == expected, (
        f"{len(samples)} samples, expected {expected}"
    )
    _passed("augmentation-exactness",
            f"{len(samples)} samples bit-reconstructible, ratios {sorted(allowed)}")


def test_hole_filling_oracle():
    """1,000 random masks against the border-flood-fill oracle."""
    rng = np.random.default_rng(99)
    for i in range(1000):
        density = rng.uniform(0.25, 0.75)
        mask = rng.random((32, 32)) < density
        filled = fill_holes(mask)
        assert np.array_equal(filled, bfs_fill_holes(mask)), f"mask {i} differs"
        assert np.array_equal(fill_holes(filled), filled), f"mask {i} not idempotent"
        assert np.all(filled >= mask), f"mask {i} lost foreground"
    _passed("hole-filling-oracle", "1000/1000 masks match; idempotent; monotone")


def test_end_to_end_synthetic(synthetic_dataset):
    """Baseline >= 99% raw OA in 20 epochs; full network holds up after
    cleanup; everything inside a minute."""
    t0 = time.perf_counter()
    records, _ = run_ablation(_default_config(synthetic_dataset, 0,
                                            mdae=MdaeParams(n_noise_bands=6,
                                                            seed=0)))
    elapsed = time.perf_counter() - t0
    by_id = {r.network_id: r for r in records}
    assert by_id[1].raw_oa >= 99.0, f"network 1 raw OA {by_id[1].raw_oa:.2f}"
    assert by_id[6].morph_oa >= by_id[1].morph_oa - 1.0, (
        f"network 6 morph {by_id[6].morph_oa:.2f} vs "
        f"network 1 morph {by_id[1].morph_oa:.2f}"
    )
    assert elapsed <= 60.0, f"took {elapsed:.1f}s (> 1 minute)"
    _passed(
        "end-to-end-synthetic",
        f"net1 raw {by_id[1].raw_oa:.2f}%, net6 morph {by_id[6].morph_oa:.2f}%, "
        f"{elapsed:.1f}s",
    )


def test_ablation_determinism(synthetic_dataset, tmp_path):
    """Two serial ablate runs produce byte-identical results.json."""
    assert not os.environ.get("HSI_THREADS"), "determinism check needs serial mode"
    cfg = _default_config(
        synthetic_dataset, 0,
        mdae=MdaeParams(n_noise_bands=6, seed=0),
        sgd=SgdHyper(epochs=5, seed=0),
        hidden=(32, 16),
    )
    run_ablation(cfg, out_dir=tmp_path / "a")
    run_ablation(cfg, out_dir=tmp_path / "b")
    first = (tmp_path / "a" / "results.json").read_bytes()
    second = (tmp_path / "b" / "results.json").read_bytes()
    assert first == second, "results.json differs between serial reruns"
    _passed("ablation-determinism",
            f"results.json identical across reruns ({len(first)} bytes)")
