"""Mixed-pixel training augmentation.

For each class a fraction of its training spectra is paired with spectra
drawn from the pooled other classes, and each pair is linearly mixed at a
grid of majority ratios, emitting extra training samples labeled with the
majority class. Border pixels in real scenes are mixtures, which is what
these samples imitate.
"""

import csv
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .errors import AlphaOutOfRange, ConfigError, SingleClassTrainingSet
from .validation import as_label_vector, as_samples_matrix, as_spectra_matrix

_MASK_U64 = (1 << 64) - 1
_GRID_EPS = 1e-9


@dataclass(frozen=True)
class MixParams:
    """select_frac of each class is mixed at every ratio in the realized grid
    { k * ratio_step : min_abundance < k * ratio_step < 1 }."""

    select_frac: float = 0.25
    ratio_step: float = 0.1
    min_abundance: float = 0.55
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.select_frac <= 1.0:
            raise ConfigError(f"select_frac must be in (0, 1], got {self.select_frac}")
        if self.ratio_step <= 0:
            raise ConfigError(f"ratio_step must be positive, got {self.ratio_step}")
        if not 0.5 < self.min_abundance < 1.0:
            raise ConfigError(
                f"min_abundance must be in (0.5, 1), got {self.min_abundance}"
            )
        if not self.ratios():
            raise ConfigError(
                f"no ratio k*{self.ratio_step} lies in "
                f"({self.min_abundance}, 1); widen the grid"
            )

    def ratios(self):
        """Ascending majority-abundance grid; strict bounds are evaluated
        with a 1e-9 tolerance so decimal steps land exactly."""
        out = []
        k = 1
        while k * self.ratio_step < 1.0 - _GRID_EPS:
            alpha = k * self.ratio_step
            if alpha > self.min_abundance + _GRID_EPS:
                out.append(round(alpha, 12))
            k += 1
        return out

    def to_json_dict(self):
        return {
            "select_frac": self.select_frac,
            "ratio_step": self.ratio_step,
            "min_abundance": self.min_abundance,
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, d):
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass
class AugmentedSample:
    """One synthetic mixture: alpha * spectrum(source_a) + (1-alpha) *
    spectrum(source_b), labeled with source_a's class. Sources are column
    indices into the training-spectra matrix handed to the builder."""

    spectrum: np.ndarray
    label: int
    alpha: float
    source_a: int
    source_b: int


def mix_pair(a, b, alpha):
    """Convex combination alpha*a + (1-alpha)*b with majority alpha."""
    if not 0.5 < alpha < 1.0:
        raise AlphaOutOfRange(f"alpha must be in (0.5, 1), got {alpha}")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise AlphaOutOfRange(f"shape mismatch: {a.shape} vs {b.shape}")
    return alpha * a + (1.0 - alpha) * b


def _draw_without_replacement(rng, pool, count):
    """Draw ``count`` items from ``pool`` without replacement, reshuffling
    the pool whenever it runs out."""
    out = []
    while count > 0:
        perm = rng.permutation(pool)
        take = min(count, perm.size)
        out.append(perm[:take])
        count -= take
    return np.concatenate(out)


def build_augmented_set(train_spectra, train_labels, params):
    """Emit mixed samples for every class; deterministic per seed.

    Per class c: ceil(select_frac * |c|) spectra are sampled from c and an
    equal count from the pooled other classes, paired one-to-one, and every
    pair is mixed at each grid ratio. Output is ordered by ascending class,
    then pair index, then ascending ratio. Per-class draws use the sub-seed
    seed + class id so classes can be generated independently.
    """
    X = as_spectra_matrix(train_spectra, name="train_spectra")
    y = as_label_vector(train_labels, n=X.shape[1], name="train_labels")
    classes = np.unique(y)
    if classes.size < 2:
        raise SingleClassTrainingSet(
            f"augmentation needs >= 2 classes, got {classes.size}"
        )
    ratios = params.ratios()

    samples = []
    for c in classes:
        rng = np.random.default_rng((params.seed + int(c)) & _MASK_U64)
        own = np.flatnonzero(y == c)
        other = np.flatnonzero(y != c)
        k = int(np.ceil(params.select_frac * own.size))
        picked_own = rng.permutation(own)[:k]
        picked_other = _draw_without_replacement(rng, other, k)
        for a_idx, b_idx in zip(picked_own, picked_other):
            a = X[:, a_idx]
            b = X[:, b_idx]
            for alpha in ratios:
                samples.append(AugmentedSample(
                    spectrum=mix_pair(a, b, alpha),
                    label=int(c),
                    alpha=alpha,
                    source_a=int(a_idx),
                    source_b=int(b_idx),
                ))
    return samples


def samples_to_arrays(samples):
    """Stack samples into a (B, n) spectra matrix and an (n,) label vector."""
    if not samples:
        return np.empty((0, 0)), np.empty(0, dtype=np.int64)
    X = np.stack([s.spectrum for s in samples], axis=1)
    y = np.asarray([s.label for s in samples], dtype=np.int64)
    return X, y


def write_audit_csv(path, samples):
    """Reproducibility dump: one row per sample (class, sources, ratio)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "source_a", "source_b", "alpha"])
        for s in samples:
            writer.writerow([s.label, s.source_a, s.source_b, s.alpha])


class MixedPixelAugmenter(BaseEstimator):
    """Resampler over (n_samples, n_bands) arrays: fit_resample returns the
    originals with the synthetic mixtures appended."""

    def __init__(self, select_frac=0.25, ratio_step=0.1, min_abundance=0.55,
                 seed=0):
        self.select_frac = select_frac
        self.ratio_step = ratio_step
        self.min_abundance = min_abundance
        self.seed = seed

    def fit_resample(self, X, y):
        X = as_samples_matrix(X)
        y = as_label_vector(y, n=X.shape[0])
        params = MixParams(
            select_frac=self.select_frac, ratio_step=self.ratio_step,
            min_abundance=self.min_abundance, seed=self.seed,
        )
        self.samples_ = build_augmented_set(X.T, y, params)
        extra_X, extra_y = samples_to_arrays(self.samples_)
        if extra_y.size == 0:
            return X, y
        return np.vstack([X, extra_X.T]), np.concatenate([y, extra_y])
