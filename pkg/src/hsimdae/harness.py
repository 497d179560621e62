"""End-to-end experiment driver.

Implements the seven ablation configurations (which feature blocks and
augmentation each network uses), overall-accuracy metrics, the full
load -> normalize -> split -> train -> predict -> clean pipeline, and the
multi-network ablation runner with its result tables.
"""

import json
import os
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import classifier as clf
from . import mdae as mdae_mod
from .augment import MixParams, build_augmented_set, samples_to_arrays, write_audit_csv
from .cube import (
    LabelMap,
    SplitAssignment,
    apply_normalizer,
    fit_normalizer,
    load_cube,
    stratified_split,
)
from .errors import ConfigError, EmptyTestSet, LabelOutOfRange, MissingFile
from .features import FeatureConfig, assemble_batch, assemble_spectra, train_models
from .postproc import ClassMap, clean_map, write_pgm, write_ppm

NETWORK_IDS = (1, 2, 3, 4, 5, 6, 7)
NETWORK_DESCRIPTIONS = {
    1: "baseline (raw spectra only)",
    2: "baseline + mixing augmentation",
    3: "baseline + autoencoder outputs",
    4: "baseline + reconstruction-MSE features",
    5: "baseline + autoencoder outputs + MSE features",
    6: "augmentation + autoencoder outputs + MSE features",
    7: "network 6 with zeroing probability 0.005",
}
_NETWORK7_ZERO_PROB = 0.005


def network_flags(network_id):
    """(use_augmentation, use_mdae_outputs, use_mse) for a network id."""
    table = {
        1: (False, False, False),
        2: (True, False, False),
        3: (False, True, False),
        4: (False, False, True),
        5: (False, True, True),
        6: (True, True, True),
        7: (True, True, True),
    }
    if network_id not in table:
        raise ConfigError(f"network_id must be in 1..7, got {network_id}")
    return table[network_id]


@dataclass
class ExperimentConfig:
    """Everything one run needs; defaults are the documented parameter set."""

    dataset: str
    network_id: int = 1
    fractions: tuple = (0.1, 0.1, 0.8)
    split_seed: int = 0
    mdae: mdae_mod.MdaeParams = field(default_factory=mdae_mod.MdaeParams)
    mix: MixParams = field(default_factory=MixParams)
    hidden: tuple = (512, 256, 128)
    sgd: clf.SgdHyper = field(default_factory=clf.SgdHyper)
    augment_mdae: bool = False
    prediction_chunk: int = 4096

    def __post_init__(self):
        network_flags(self.network_id)
        self.fractions = tuple(float(f) for f in self.fractions)
        self.hidden = tuple(int(h) for h in self.hidden)

    def effective_mdae(self):
        """Network 7 is network 6 with the zeroing probability forced to 0.005."""
        if self.network_id == 7:
            return replace(self.mdae, zero_prob=_NETWORK7_ZERO_PROB)
        return self.mdae

    def uses_augmentation(self):
        return network_flags(self.network_id)[0]

    def feature_config(self, n_classes):
        _, outputs, mse = network_flags(self.network_id)
        return FeatureConfig(
            use_raw=True, use_mdae_outputs=outputs, use_mse=mse,
            n_classes=n_classes,
        )

    def to_json_dict(self):
        return {
            "dataset": str(self.dataset),
            "network_id": self.network_id,
            "split": {"fractions": list(self.fractions), "seed": self.split_seed},
            "mdae": self.mdae.to_json_dict(),
            "mix": self.mix.to_json_dict(),
            "mlp": {"hidden": list(self.hidden), **self.sgd.to_json_dict()},
            "augment_mdae": self.augment_mdae,
        }

    @classmethod
    def from_json_dict(cls, d):
        try:
            dataset = d["dataset"]
        except KeyError as e:
            raise ConfigError("config must name a dataset directory") from e
        split = d.get("split", {})
        mlp = dict(d.get("mlp", {}))
        hidden = mlp.pop("hidden", (512, 256, 128))
        try:
            return cls(
                dataset=dataset,
                network_id=int(d.get("network_id", 1)),
                fractions=tuple(split.get("fractions", (0.1, 0.1, 0.8))),
                split_seed=int(split.get("seed", 0)),
                mdae=mdae_mod.MdaeParams.from_json_dict(d.get("mdae", {})),
                mix=MixParams.from_json_dict(d.get("mix", {})),
                hidden=tuple(hidden),
                sgd=clf.SgdHyper.from_json_dict(mlp),
                augment_mdae=bool(d.get("augment_mdae", False)),
            )
        except TypeError as e:
            raise ConfigError(f"malformed config: {e}") from e

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            return cls.from_json_dict(json.loads(path.read_text(encoding="utf-8")))
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from e


# -- metrics -------------------------------------------------------------------

def confusion_matrix(pred, truth, indices, n_classes):
    """Counts[i, j] = pixels with truth class i+1 predicted as class j+1."""
    pred = np.asarray(pred).reshape(-1)
    truth = np.asarray(truth).reshape(-1)
    idx = np.asarray(indices, dtype=np.int64)
    p = pred[idx].astype(np.int64)
    t = truth[idx].astype(np.int64)
    for name, v in (("truth", t), ("prediction", p)):
        if v.size and (v.min() < 1 or v.max() > n_classes):
            raise LabelOutOfRange(
                f"{name} labels must lie in 1..{n_classes}, got range "
                f"[{v.min()}, {v.max()}]"
            )
    flat = np.bincount((t - 1) * n_classes + (p - 1), minlength=n_classes * n_classes)
    return flat.reshape(n_classes, n_classes)


def overall_accuracy(cm):
    """100 * trace / total over a confusion matrix."""
    cm = np.asarray(cm)
    total = cm.sum()
    if total == 0:
        raise EmptyTestSet("confusion matrix has no counts")
    return 100.0 * float(np.trace(cm)) / float(total)


def per_class_accuracy(cm):
    """Diagonal over row sums; None where a class has no test pixels."""
    cm = np.asarray(cm)
    row = cm.sum(axis=1)
    return [
        float(cm[i, i]) / float(row[i]) * 100.0 if row[i] > 0 else None
        for i in range(cm.shape[0])
    ]


@dataclass
class ResultRecord:
    network_id: int
    raw_oa: float
    morph_oa: float
    per_class_raw: list
    per_class_morph: list
    confusion_raw: list
    confusion_morph: list
    n_train: int
    n_val: int
    n_test: int
    feature_dim: int
    seeds: dict
    wall_time_s: float | None = None

    def to_json_dict(self):
        return {
            "network_id": self.network_id,
            "raw_oa": self.raw_oa,
            "morph_oa": self.morph_oa,
            "per_class_raw": self.per_class_raw,
            "per_class_morph": self.per_class_morph,
            "confusion_raw": self.confusion_raw,
            "confusion_morph": self.confusion_morph,
            "n_train": self.n_train,
            "n_val": self.n_val,
            "n_test": self.n_test,
            "feature_dim": self.feature_dim,
            "seeds": self.seeds,
            "wall_time_s": self.wall_time_s,
        }

    @classmethod
    def from_json_dict(cls, d):
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


def worker_count():
    """Worker cap from HSI_THREADS; 0/unset means serial deterministic mode."""
    raw = os.environ.get("HSI_THREADS", "").strip()
    if not raw:
        return 0
    try:
        return max(0, int(raw))
    except ValueError:
        raise ConfigError(f"HSI_THREADS must be an integer, got {raw!r}") from None


@contextmanager
def _stage(name):
    """Prefix any escaping exception with the pipeline stage that failed."""
    try:
        yield
    except Exception as e:
        first = f"[{name}] {e.args[0]}" if e.args else f"[{name}] failed"
        e.args = (first, *e.args[1:])
        raise


# -- pipeline ------------------------------------------------------------------

@dataclass
class _Prepared:
    """Shared, network-independent state reused across an ablation run."""

    cube: object
    labels: LabelMap
    split: SplitAssignment
    norm_scale: float
    train_spectra: np.ndarray
    train_labels: np.ndarray
    val_spectra: np.ndarray
    val_labels: np.ndarray
    model_cache: dict = field(default_factory=dict)
    augment_cache: dict = field(default_factory=dict)


def _prepare(config):
    with _stage("load"):
        cube, labels = load_cube(config.dataset)
    with _stage("split"):
        split = stratified_split(labels, config.fractions, config.split_seed)
    with _stage("normalize"):
        stats = fit_normalizer(cube, split.train)
        cube = apply_normalizer(cube, stats)
    flat_labels = labels.flat
    return _Prepared(
        cube=cube,
        labels=labels,
        split=split,
        norm_scale=stats.scale,
        train_spectra=cube.spectra(split.train),
        train_labels=flat_labels[split.train].astype(np.int64),
        val_spectra=cube.spectra(split.val),
        val_labels=flat_labels[split.val].astype(np.int64),
    )


def _get_models(config, prep):
    params = config.effective_mdae()
    with_augmented = config.augment_mdae and config.uses_augmentation()
    key = (params, with_augmented)
    if key not in prep.model_cache:
        train_x, train_y = prep.train_spectra, prep.train_labels
        if with_augmented:
            aug_x, aug_y = samples_to_arrays(_get_augmented(config, prep))
            train_x = np.hstack([train_x, aug_x])
            train_y = np.concatenate([train_y, aug_y])
        prep.model_cache[key] = train_models(
            train_x, train_y, prep.labels.n_classes, params,
            workers=worker_count(),
        )
    return prep.model_cache[key]


def _get_augmented(config, prep):
    key = config.mix
    if key not in prep.augment_cache:
        prep.augment_cache[key] = build_augmented_set(
            prep.train_spectra, prep.train_labels, config.mix
        )
    return prep.augment_cache[key]


def predict_map(cube, models, feature_config, net, chunk=4096):
    """Classify every pixel of the cube, streaming features per chunk."""
    n = cube.n_pixels
    out = np.empty(n, dtype=np.int64)
    for start in range(0, n, chunk):
        idx = np.arange(start, min(start + chunk, n), dtype=np.int64)
        feats = assemble_batch(idx, cube, models, feature_config)
        out[idx] = clf.predict(net, feats)
    return ClassMap(cube.rows, cube.cols, out.reshape(cube.rows, cube.cols),
                    feature_config.n_classes)


def _run_prepared(config, prep, out_dir=None):
    t0 = time.perf_counter()
    n_classes = prep.labels.n_classes
    fconfig = config.feature_config(n_classes)
    models = []
    if fconfig.needs_models:
        with _stage("mdae-train"):
            models = _get_models(config, prep)

    train_x, train_y = prep.train_spectra, prep.train_labels
    augmented = []
    if config.uses_augmentation():
        with _stage("augment"):
            augmented = _get_augmented(config, prep)
            aug_x, aug_y = samples_to_arrays(augmented)
            train_x = np.hstack([train_x, aug_x])
            train_y = np.concatenate([train_y, aug_y])

    with _stage("features"):
        train_feats = assemble_spectra(train_x, models, fconfig)
        val_feats = (
            assemble_spectra(prep.val_spectra, models, fconfig)
            if prep.val_labels.size else None
        )

    with _stage("mlp-train"):
        topology = clf.MlpTopology(train_feats.shape[0], config.hidden, n_classes)
        net = clf.init_network(topology, config.sgd.seed)
        net, trace = clf.train(
            net, train_feats, train_y, config.sgd,
            val_feats, prep.val_labels if val_feats is not None else None,
        )

    with _stage("predict"):
        raw_map = predict_map(prep.cube, models, fconfig, net,
                              chunk=config.prediction_chunk)

    with _stage("evaluate"):
        cm_raw = confusion_matrix(
            raw_map.flat, prep.labels.flat, prep.split.test, n_classes
        )
        raw_oa = overall_accuracy(cm_raw)

    with _stage("postproc"):
        clean, fill_counts = clean_map(raw_map)
        cm_morph = confusion_matrix(
            clean.flat, prep.labels.flat, prep.split.test, n_classes
        )
        morph_oa = overall_accuracy(cm_morph)

    record = ResultRecord(
        network_id=config.network_id,
        raw_oa=raw_oa,
        morph_oa=morph_oa,
        per_class_raw=per_class_accuracy(cm_raw),
        per_class_morph=per_class_accuracy(cm_morph),
        confusion_raw=cm_raw.tolist(),
        confusion_morph=cm_morph.tolist(),
        n_train=int(prep.split.train.size),
        n_val=int(prep.split.val.size),
        n_test=int(prep.split.test.size),
        feature_dim=int(train_feats.shape[0]),
        seeds={
            "split": config.split_seed,
            "mdae": config.effective_mdae().seed,
            "mix": config.mix.seed,
            "mlp": config.sgd.seed,
        },
        wall_time_s=time.perf_counter() - t0,
    )

    if out_dir is not None:
        with _stage("persist"):
            _persist_run(out_dir, config, prep, models, net, fconfig,
                         raw_map, clean, augmented, record, trace, fill_counts)
    return record


def run_experiment(config, out_dir=None):
    """Execute one network configuration end to end; returns its record."""
    prep = _prepare(config)
    return _run_prepared(config, prep, out_dir=out_dir)


def _persist_run(out_dir, config, prep, models, net, fconfig, raw_map, clean,
                 augmented, record, trace, fill_counts):
    out = Path(out_dir)
    model_dir = out / "model"
    model_dir.mkdir(parents=True, exist_ok=True)

    meta = {
        "n_bands": prep.cube.bands,
        "n_classes": prep.labels.n_classes,
        "norm_scale": prep.norm_scale,
        "network_id": config.network_id,
        "feature": fconfig.to_json_dict(),
        "hidden": list(config.hidden),
    }
    (model_dir / "meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8"
    )
    clf.save_network(model_dir / "mlp.bin", net)
    for m in models:
        mdae_mod.save_model(model_dir / mdae_mod.model_filename(m.class_id), m)

    prep.split.save(out / "split.json")
    write_pgm(out / "map_raw.pgm", raw_map.labels)
    write_ppm(out / "map_raw.ppm", raw_map.labels)
    write_pgm(out / "map_clean.pgm", clean.labels)
    write_ppm(out / "map_clean.ppm", clean.labels)
    if augmented:
        write_audit_csv(out / "augment.csv", augmented)
    (out / "trace.json").write_text(
        json.dumps({"epochs": trace, "hole_fills": fill_counts},
                   indent=2, sort_keys=True),
        encoding="utf-8",
    )
    (out / "result.json").write_text(
        json.dumps(record.to_json_dict(), indent=2, sort_keys=True),
        encoding="utf-8",
    )


# -- ablation ------------------------------------------------------------------

def run_ablation(config, out_dir=None):
    """Run all seven networks on one shared split; returns (records, table).

    Only the per-network deltas vary: split, seeds, normalization, and the
    augmented sample set are shared. When ``out_dir`` is given, writes
    ``results.json`` (wall times nulled so serial reruns are byte-identical),
    an aligned ``table.txt``, per-network artifact directories, and a
    ``timings.txt`` sidecar holding the wall times.
    """
    prep = _prepare(config)
    records = []
    for nid in NETWORK_IDS:
        run_cfg = replace(config, network_id=nid)
        net_out = Path(out_dir) / f"network_{nid}" if out_dir is not None else None
        records.append(_run_prepared(run_cfg, prep, out_dir=net_out))

    table = format_table(records)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        payload = []
        for r in records:
            d = r.to_json_dict()
            d["wall_time_s"] = None     # keep results.json byte-reproducible
            payload.append(d)
        (out / "results.json").write_text(
            json.dumps({"config": config.to_json_dict(), "records": payload},
                       indent=2, sort_keys=True),
            encoding="utf-8",
        )
        (out / "table.txt").write_text(table, encoding="utf-8")
        (out / "timings.txt").write_text(
            "".join(
                f"network_{r.network_id}\t{r.wall_time_s:.3f}s\n" for r in records
            ),
            encoding="utf-8",
        )
    return records, table


def format_table(records):
    """Aligned text table (Exp. | Raw OA | Morph OA); per-column maxima are
    wrapped in ** markers."""
    best_raw = max(r.raw_oa for r in records)
    best_morph = max(r.morph_oa for r in records)

    def fmt(value, best):
        text = f"{value:.2f}"
        return f"**{text}**" if value == best else text

    rows = [("Exp.", "Raw OA(%)", "Morph OA(%)")]
    for r in records:
        rows.append((
            str(r.network_id), fmt(r.raw_oa, best_raw), fmt(r.morph_oa, best_morph),
        ))
    widths = [max(len(row[i]) for row in rows) for i in range(3)]
    lines = [
        "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
        for row in rows
    ]
    return "\n".join(lines) + "\n"


# -- model-dir loading (predict CLI) -------------------------------------------

def load_model_dir(model_dir):
    """Load meta, autoencoders and the network persisted by a training run."""
    model_dir = Path(model_dir)
    meta_path = model_dir / "meta.json"
    if not meta_path.is_file():
        raise MissingFile(f"missing model metadata: {meta_path}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    fconfig = FeatureConfig.from_json_dict(meta["feature"])
    models = []
    if fconfig.needs_models:
        order = list(range(1, fconfig.n_classes + 1)) + [0]
        models = [
            mdae_mod.load_model(model_dir / mdae_mod.model_filename(cid))
            for cid in order
        ]
    net = clf.load_network(model_dir / "mlp.bin")
    return meta, fconfig, models, net
