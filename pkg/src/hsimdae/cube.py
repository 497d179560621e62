"""Hyperspectral cube and label-map data model.

Covers the portable on-disk dataset format, max-scaling normalization,
stratified train/val/test splitting, and a synthetic linear-mixing scene
generator used for self-contained tests and demos.

Portable dataset directory layout:

* ``meta.json``   -- rows, cols, bands, n_classes, optional band/class names.
* ``cube.bin``    -- rows*cols*bands little-endian float32, band-sequential
  (the whole of band 0 in row-major order, then band 1, ...).
* ``labels.bin``  -- rows*cols little-endian uint16, row-major; 0 = unlabeled.

Pixels are addressed by their row-major flat index ``p = row * cols + col``
everywhere in this package.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import (
    ClassTooSmall,
    DimensionMismatch,
    EmptyIndexSet,
    InvalidSpec,
    MissingFile,
    NonFiniteValue,
)


@dataclass
class HsiCube:
    """Dense reflectance cube stored band-sequentially as (bands, rows, cols)."""

    rows: int
    cols: int
    bands: int
    data: np.ndarray
    band_names: list | None = None

    def __post_init__(self):
        if min(self.rows, self.cols, self.bands) < 1:
            raise DimensionMismatch(
                f"cube dimensions must be positive, got "
                f"{self.rows}x{self.cols}x{self.bands}"
            )
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        expected = (self.bands, self.rows, self.cols)
        if self.data.shape != expected:
            if self.data.size == self.rows * self.cols * self.bands:
                self.data = self.data.reshape(expected)
            else:
                raise DimensionMismatch(
                    f"cube data has {self.data.size} values, expected "
                    f"{self.rows * self.cols * self.bands}"
                )
        if not np.all(np.isfinite(self.data)):
            raise NonFiniteValue("cube contains non-finite values")
        if self.band_names is not None and len(self.band_names) != self.bands:
            raise DimensionMismatch(
                f"{len(self.band_names)} band names for {self.bands} bands"
            )

    @property
    def n_pixels(self):
        return self.rows * self.cols

    def spectra(self, pixel_indices=None):
        """Spectra as a float64 (bands, n) matrix, columns in index order.

        ``pixel_indices`` are row-major flat indices; None selects every pixel.
        """
        flat = self.data.reshape(self.bands, self.n_pixels)
        if pixel_indices is None:
            return flat.astype(np.float64)
        idx = np.asarray(pixel_indices, dtype=np.int64)
        return flat[:, idx].astype(np.float64)


@dataclass
class LabelMap:
    """Per-pixel integer class labels; 0 is reserved for unlabeled pixels."""

    rows: int
    cols: int
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint16)
        if self.labels.shape != (self.rows, self.cols):
            if self.labels.size == self.rows * self.cols:
                self.labels = self.labels.reshape(self.rows, self.cols)
            else:
                raise DimensionMismatch(
                    f"label map has {self.labels.size} entries, expected "
                    f"{self.rows * self.cols}"
                )
        if self.n_classes < 1:
            raise DimensionMismatch("n_classes must be >= 1")
        top = int(self.labels.max()) if self.labels.size else 0
        if top > self.n_classes:
            raise DimensionMismatch(
                f"label {top} exceeds declared n_classes={self.n_classes}"
            )

    @property
    def flat(self):
        return self.labels.reshape(-1)

    def labeled_indices(self):
        """Row-major flat indices of labeled (> 0) pixels, ascending."""
        return np.flatnonzero(self.flat > 0).astype(np.int64)

    def class_histogram(self):
        """Counts per class id 1..n_classes."""
        return np.bincount(self.flat, minlength=self.n_classes + 1)[1:]


@dataclass(frozen=True)
class NormStats:
    """Global divisor fitted on training pixels. Never re-fit or re-apply:
    normalization is meant to run exactly once per cube."""

    scale: float

    def __post_init__(self):
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise InvalidSpec(f"scale must be positive and finite, got {self.scale}")


@dataclass
class SplitAssignment:
    """Disjoint train/val/test pixel-index sets covering all labeled pixels."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int
    fractions: tuple

    def __post_init__(self):
        self.train = np.asarray(self.train, dtype=np.int64)
        self.val = np.asarray(self.val, dtype=np.int64)
        self.test = np.asarray(self.test, dtype=np.int64)
        self.fractions = tuple(float(f) for f in self.fractions)

    def to_json_dict(self):
        return {
            "seed": int(self.seed),
            "fractions": list(self.fractions),
            "train": self.train.tolist(),
            "val": self.val.tolist(),
            "test": self.test.tolist(),
        }

    @classmethod
    def from_json_dict(cls, d):
        return cls(
            train=np.asarray(d["train"], dtype=np.int64),
            val=np.asarray(d["val"], dtype=np.int64),
            test=np.asarray(d["test"], dtype=np.int64),
            seed=int(d["seed"]),
            fractions=tuple(d["fractions"]),
        )

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.is_file():
            raise MissingFile(f"split file not found: {path}")
        return cls.from_json_dict(json.loads(path.read_text(encoding="utf-8")))


# -- portable dataset directory ----------------------------------------------

def save_dataset(dataset_dir, cube, labels, class_names=None):
    """Write ``meta.json``, ``cube.bin`` and ``labels.bin`` for the pair."""
    if (labels.rows, labels.cols) != (cube.rows, cube.cols):
        raise DimensionMismatch(
            f"label map {labels.rows}x{labels.cols} does not match cube "
            f"{cube.rows}x{cube.cols}"
        )
    out = Path(dataset_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "rows": cube.rows,
        "cols": cube.cols,
        "bands": cube.bands,
        "n_classes": labels.n_classes,
    }
    if cube.band_names is not None:
        meta["band_names"] = list(cube.band_names)
    if class_names is not None:
        meta["class_names"] = list(class_names)
    (out / "meta.json").write_text(json.dumps(meta, indent=2), encoding="utf-8")
    (out / "cube.bin").write_bytes(
        np.ascontiguousarray(cube.data, dtype="<f4").tobytes()
    )
    (out / "labels.bin").write_bytes(
        np.ascontiguousarray(labels.labels, dtype="<u2").tobytes()
    )


def load_cube(dataset_dir):
    """Load a portable dataset directory; fails rather than truncating."""
    root = Path(dataset_dir)
    meta_path = root / "meta.json"
    cube_path = root / "cube.bin"
    labels_path = root / "labels.bin"
    for p in (meta_path, cube_path, labels_path):
        if not p.is_file():
            raise MissingFile(f"missing dataset file: {p}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    try:
        rows, cols, bands = int(meta["rows"]), int(meta["cols"]), int(meta["bands"])
        n_classes = int(meta["n_classes"])
    except KeyError as e:
        raise DimensionMismatch(f"meta.json missing key {e}") from e

    raw = cube_path.read_bytes()
    if len(raw) != rows * cols * bands * 4:
        raise DimensionMismatch(
            f"cube.bin holds {len(raw)} bytes, expected {rows * cols * bands * 4} "
            f"for {rows}x{cols}x{bands} float32"
        )
    data = np.frombuffer(raw, dtype="<f4").reshape(bands, rows, cols)

    raw_labels = labels_path.read_bytes()
    if len(raw_labels) != rows * cols * 2:
        raise DimensionMismatch(
            f"labels.bin holds {len(raw_labels)} bytes, expected {rows * cols * 2}"
        )
    label_arr = np.frombuffer(raw_labels, dtype="<u2").reshape(rows, cols)

    cube = HsiCube(rows, cols, bands, data.copy(), band_names=meta.get("band_names"))
    labels = LabelMap(rows, cols, label_arr.copy(), n_classes)
    return cube, labels


# -- normalization -----------------------------------------------------------

def fit_normalizer(cube, train_indices):
    """Global max-abs divisor over the training pixels' spectra (0 -> 1)."""
    idx = np.asarray(train_indices, dtype=np.int64)
    if idx.size == 0:
        raise EmptyIndexSet("cannot fit a normalizer on an empty index set")
    peak = float(np.abs(cube.spectra(idx)).max())
    return NormStats(scale=peak if peak > 0 else 1.0)


def apply_normalizer(cube, stats):
    """Divide every value by ``stats.scale`` and clamp into [0, 1]."""
    scaled = np.clip(cube.data.astype(np.float64) / stats.scale, 0.0, 1.0)
    return HsiCube(
        cube.rows, cube.cols, cube.bands,
        scaled.astype(np.float32), band_names=cube.band_names,
    )


# -- stratified split --------------------------------------------------------

def _round_half_up(x):
    return int(np.floor(x + 0.5))


def stratified_split(labels, fractions, seed):
    """Per-class shuffled split of labeled pixels; deterministic per seed.

    Per class the train count is round-half-up(train_frac * class size), the
    val count likewise, and test takes the remainder.
    """
    train_frac, val_frac, test_frac = (float(f) for f in fractions)
    if abs(train_frac + val_frac + test_frac - 1.0) > 1e-9:
        raise InvalidSpec(f"fractions must sum to 1, got {fractions}")
    if min(train_frac, val_frac, test_frac) < 0:
        raise InvalidSpec(f"fractions must be non-negative, got {fractions}")

    flat = labels.flat
    hist = labels.class_histogram()
    too_small = [c for c in range(1, labels.n_classes + 1) if hist[c - 1] < 3]
    if too_small:
        raise ClassTooSmall(
            f"classes {too_small} have fewer than 3 labeled pixels"
        )

    rng = np.random.default_rng(seed)
    train_parts, val_parts, test_parts = [], [], []
    for c in range(1, labels.n_classes + 1):
        idx = np.flatnonzero(flat == c).astype(np.int64)
        rng.shuffle(idx)
        n = idx.size
        n_train = min(_round_half_up(train_frac * n), n)
        n_val = min(_round_half_up(val_frac * n), n - n_train)
        train_parts.append(idx[:n_train])
        val_parts.append(idx[n_train:n_train + n_val])
        test_parts.append(idx[n_train + n_val:])

    def _gather(parts):
        if not parts:
            return np.empty(0, dtype=np.int64)
        return np.sort(np.concatenate(parts))

    return SplitAssignment(
        train=_gather(train_parts),
        val=_gather(val_parts),
        test=_gather(test_parts),
        seed=int(seed),
        fractions=(train_frac, val_frac, test_frac),
    )


# -- synthetic scenes --------------------------------------------------------

@dataclass
class SceneSpec:
    """Rectangular-region scene description for the synthetic generator.

    ``regions`` is a list of (class_id, row0, row1, col0, col1) half-open
    rectangles that must tile the image exactly. Pixels within ``mix_width``
    of a region border are linear mixtures of the two adjacent endmembers.
    """

    rows: int
    cols: int
    bands: int
    n_classes: int
    regions: list
    endmembers: np.ndarray
    noise_sigma: float = 0.0
    mix_width: float = 0.0
    class_names: list | None = None

    def __post_init__(self):
        if self.n_classes < 2:
            raise InvalidSpec(f"need n_classes >= 2, got {self.n_classes}")
        if self.bands < 4:
            raise InvalidSpec(f"need bands >= 4, got {self.bands}")
        if self.rows < 1 or self.cols < 1:
            raise InvalidSpec("scene must have positive rows and cols")
        if self.noise_sigma < 0:
            raise InvalidSpec("noise_sigma must be >= 0")
        if self.mix_width < 0:
            raise InvalidSpec("mix_width must be >= 0")
        self.endmembers = np.asarray(self.endmembers, dtype=np.float64)
        if self.endmembers.shape != (self.n_classes, self.bands):
            raise InvalidSpec(
                f"endmembers must be ({self.n_classes}, {self.bands}), "
                f"got {self.endmembers.shape}"
            )
        if not np.all(np.isfinite(self.endmembers)):
            raise InvalidSpec("endmembers must be finite")
        if self.endmembers.min() < 0 or self.endmembers.max() > 1:
            raise InvalidSpec("endmembers must lie in [0, 1]")
        self.regions = [tuple(int(v) for v in r) for r in self.regions]
        self._check_partition()

    def _check_partition(self):
        cover = np.zeros((self.rows, self.cols), dtype=np.int32)
        for cid, r0, r1, c0, c1 in self.regions:
            if not 1 <= cid <= self.n_classes:
                raise InvalidSpec(f"region class {cid} outside 1..{self.n_classes}")
            if not (0 <= r0 < r1 <= self.rows and 0 <= c0 < c1 <= self.cols):
                raise InvalidSpec(f"region ({r0},{r1},{c0},{c1}) out of bounds")
            cover[r0:r1, c0:c1] += 1
        if cover.min() < 1:
            raise InvalidSpec("regions do not cover every pixel")
        if cover.max() > 1:
            raise InvalidSpec("regions overlap")

    def to_json_dict(self):
        d = {
            "rows": self.rows, "cols": self.cols, "bands": self.bands,
            "n_classes": self.n_classes,
            "regions": [list(r) for r in self.regions],
            "endmembers": self.endmembers.tolist(),
            "noise_sigma": self.noise_sigma,
            "mix_width": self.mix_width,
        }
        if self.class_names is not None:
            d["class_names"] = list(self.class_names)
        return d

    @classmethod
    def from_json_dict(cls, d, seed=0):
        """Build from a JSON dict; missing regions/endmembers get
        deterministic defaults (vertical stripes, seeded random spectra)."""
        try:
            rows, cols = int(d["rows"]), int(d["cols"])
            bands, n_classes = int(d["bands"]), int(d["n_classes"])
        except KeyError as e:
            raise InvalidSpec(f"scene spec missing key {e}") from e
        regions = d.get("regions")
        if regions is None:
            regions = stripe_regions(rows, cols, n_classes)
        endmembers = d.get("endmembers")
        if endmembers is None:
            endmembers = default_endmembers(n_classes, bands, seed)
        return cls(
            rows=rows, cols=cols, bands=bands, n_classes=n_classes,
            regions=regions, endmembers=np.asarray(endmembers, dtype=np.float64),
            noise_sigma=float(d.get("noise_sigma", 0.0)),
            mix_width=float(d.get("mix_width", 0.0)),
            class_names=d.get("class_names"),
        )


def default_endmembers(n_classes, bands, seed):
    """Deterministic well-separated spectra in [0.1, 0.9]."""
    rng = np.random.default_rng(seed)
    return rng.uniform(0.1, 0.9, size=(n_classes, bands))


def stripe_regions(rows, cols, n_classes):
    """Vertical stripes, one per class, tiling the image."""
    edges = np.linspace(0, cols, n_classes + 1).astype(int)
    return [
        (c + 1, 0, rows, int(edges[c]), int(edges[c + 1]))
        for c in range(n_classes)
    ]


def _scene_geometry(spec):
    """Per-pixel (label, distance to nearest other region, neighbor class).

    Distances are Euclidean between pixel centers; deterministic.
    """
    label = np.zeros((spec.rows, spec.cols), dtype=np.int32)
    for cid, r0, r1, c0, c1 in spec.regions:
        label[r0:r1, c0:c1] = cid

    dist = np.zeros((spec.rows, spec.cols))
    neighbor = np.zeros((spec.rows, spec.cols), dtype=np.int32)
    for cid in np.unique(label):
        inside = label == cid
        if inside.all():
            dist[inside] = np.inf
            neighbor[inside] = cid
            continue
        d, (ir, ic) = ndimage.distance_transform_edt(inside, return_indices=True)
        dist[inside] = d[inside]
        neighbor[inside] = label[ir, ic][inside]
    return label, dist, neighbor


def scene_interior_mask(spec):
    """Pixels strictly farther than ``mix_width`` from any region border."""
    _, dist, _ = _scene_geometry(spec)
    return dist > spec.mix_width


def synth_scene(spec, seed):
    """Generate (cube, labels) for a SceneSpec; bit-reproducible per seed.

    Interior pixels are their class endmember plus optional Gaussian noise.
    A pixel at distance d <= mix_width from the nearest other region is the
    mixture alpha*own + (1-alpha)*other with alpha = 0.5*(1 + d/(mix_width+1)),
    so the labeled class always holds the majority abundance.
    """
    label, dist, neighbor = _scene_geometry(spec)
    own = spec.endmembers[label - 1]            # (rows, cols, bands)
    data = own.copy()

    mixed = dist <= spec.mix_width
    if mixed.any():
        other = spec.endmembers[neighbor[mixed] - 1]
        alpha = (0.5 * (1.0 + dist[mixed] / (spec.mix_width + 1.0)))[:, None]
        data[mixed] = alpha * own[mixed] + (1.0 - alpha) * other

    if spec.noise_sigma > 0:
        rng = np.random.default_rng(seed)
        data = data + rng.normal(0.0, spec.noise_sigma, size=data.shape)

    cube = HsiCube(
        spec.rows, spec.cols, spec.bands,
        np.moveaxis(data, -1, 0).astype(np.float32),
    )
    labels = LabelMap(spec.rows, spec.cols, label.astype(np.uint16), spec.n_classes)
    return cube, labels
