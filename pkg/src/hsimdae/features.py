"""Classifier input assembly.

A feature vector concatenates, in this fixed order: the raw spectrum, the
reconstruction of every per-class autoencoder followed by the all-classes
one, and finally one reconstruction-MSE entry per autoencoder in the same
model order. Disabled blocks are omitted outright, never zero-filled, which
is what the ablation networks toggle.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import ConfigError, IndexOutOfRange, LengthMismatch, ModelCountMismatch
from .mdae import MdaeParams, encode_batch, train_class_mdae
from .validation import as_label_vector, as_samples_matrix, as_spectra_matrix


@dataclass(frozen=True)
class FeatureConfig:
    """Block toggles; n_classes fixes the expected model count (N + 1).

    mse_includes_all_model drops the all-data model's entry from the MSE
    block when False (ablation hook); the reconstruction block always spans
    all N + 1 models when enabled.
    """

    use_raw: bool = True
    use_mdae_outputs: bool = False
    use_mse: bool = False
    n_classes: int = 1
    mse_includes_all_model: bool = True

    def __post_init__(self):
        if not (self.use_raw or self.use_mdae_outputs or self.use_mse):
            raise ConfigError("at least one feature block must be enabled")
        if self.n_classes < 1:
            raise ConfigError("n_classes must be >= 1")

    @property
    def needs_models(self):
        return self.use_mdae_outputs or self.use_mse

    @property
    def n_mse_entries(self):
        return self.n_classes + (1 if self.mse_includes_all_model else 0)

    def dim(self, n_bands):
        d = 0
        if self.use_raw:
            d += n_bands
        if self.use_mdae_outputs:
            d += (self.n_classes + 1) * n_bands
        if self.use_mse:
            d += self.n_mse_entries
        return d

    def to_json_dict(self):
        return {
            "use_raw": self.use_raw,
            "use_mdae_outputs": self.use_mdae_outputs,
            "use_mse": self.use_mse,
            "n_classes": self.n_classes,
            "mse_includes_all_model": self.mse_includes_all_model,
        }

    @classmethod
    def from_json_dict(cls, d):
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass(frozen=True)
class FeatureLayout:
    """Slice arithmetic for one (n_bands, config) combination."""

    n_bands: int
    config: FeatureConfig

    @property
    def dim(self):
        return self.config.dim(self.n_bands)

    def raw_slice(self):
        if not self.config.use_raw:
            raise ConfigError("raw block is disabled")
        return slice(0, self.n_bands)

    def output_slice(self, k):
        """Reconstruction block of model k (0..N-1 per class, N = all-data)."""
        if not self.config.use_mdae_outputs:
            raise ConfigError("reconstruction block is disabled")
        base = self.n_bands if self.config.use_raw else 0
        return slice(base + k * self.n_bands, base + (k + 1) * self.n_bands)

    def mse_index(self, k):
        if not self.config.use_mse:
            raise ConfigError("MSE block is disabled")
        if k >= self.config.n_mse_entries:
            raise ConfigError(
                f"MSE entry {k} out of range (the all-data model is excluded)"
            )
        base = self.n_bands if self.config.use_raw else 0
        if self.config.use_mdae_outputs:
            base += (self.config.n_classes + 1) * self.n_bands
        return base + k


@dataclass
class FeatureVector:
    """Assembled values plus the layout needed to slice them back apart."""

    values: np.ndarray
    layout: FeatureLayout


def _check_models(models, config, n_bands):
    if not config.needs_models:
        return
    expected = config.n_classes + 1
    if len(models) != expected:
        raise ModelCountMismatch(
            f"need {expected} models (classes 1..{config.n_classes} then all), "
            f"got {len(models)}"
        )
    for m in models:
        if m.n_bands != n_bands:
            raise LengthMismatch(
                f"model for class {m.class_id} expects {m.n_bands} bands, "
                f"data has {n_bands}"
            )


def assemble_spectra(X, models, config):
    """Assemble features for spectra columns: (B, n) -> (D, n) float64."""
    X = as_spectra_matrix(X, name="X")
    n_bands, n = X.shape
    _check_models(models, config, n_bands)
    layout = FeatureLayout(n_bands, config)
    out = np.empty((layout.dim, n), dtype=np.float64)
    if config.use_raw:
        out[layout.raw_slice()] = X
    if config.needs_models:
        for k, model in enumerate(models):
            recon = encode_batch(model, X)
            if config.use_mdae_outputs:
                out[layout.output_slice(k)] = recon
            if config.use_mse and k < config.n_mse_entries:
                diff = X - recon
                out[layout.mse_index(k)] = np.mean(diff * diff, axis=0)
    return out


def assemble(x, models, config):
    """Assemble a single pixel's feature vector."""
    x = np.asarray(x, dtype=np.float64)
    values = assemble_spectra(x[:, None], models, config)[:, 0]
    return FeatureVector(values=values, layout=FeatureLayout(x.shape[0], config))


def assemble_batch(pixel_indices, cube, models, config, chunk_size=1024):
    """Assemble features for cube pixels as a (D, n) matrix.

    Spectra are pulled and encoded chunk by chunk so intermediates stay
    bounded regardless of how many pixels are requested.
    """
    idx = np.asarray(pixel_indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= cube.n_pixels):
        raise IndexOutOfRange(
            f"pixel indices must lie in [0, {cube.n_pixels}), "
            f"got range [{idx.min()}, {idx.max()}]"
        )
    layout = FeatureLayout(cube.bands, config)
    out = np.empty((layout.dim, idx.size), dtype=np.float64)
    for start in range(0, idx.size, chunk_size):
        sel = idx[start:start + chunk_size]
        out[:, start:start + sel.size] = assemble_spectra(
            cube.spectra(sel), models, config
        )
    return out


def train_models(train_spectra, train_labels, n_classes, params, workers=0):
    """Train the N per-class autoencoders plus the all-data one, in model
    order (class 1..N, then class id 0 = all). ``workers`` > 0 threads the
    per-class trainings; results are identical either way because each model
    derives its own seed."""
    X = as_spectra_matrix(train_spectra, name="train_spectra")
    y = as_label_vector(train_labels, n=X.shape[1], name="train_labels")
    class_ids = list(range(1, n_classes + 1)) + [0]
    if workers and workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(
                lambda cid: train_class_mdae(X, y, cid, params), class_ids
            ))
    return [train_class_mdae(X, y, cid, params) for cid in class_ids]


class MdaeFeatures(BaseEstimator, TransformerMixin):
    """Feature transformer over (n_samples, n_bands) arrays.

    fit(X, y) trains one autoencoder per class plus one on everything;
    transform(X) emits the concatenated feature blocks.
    """

    def __init__(self, zero_prob=0.001, n_noise_bands=40, noise_variance=0.01,
                 m_copies=20, ridge=1e-6, seed=0, use_raw=True,
                 use_mdae_outputs=True, use_mse=True):
        self.zero_prob = zero_prob
        self.n_noise_bands = n_noise_bands
        self.noise_variance = noise_variance
        self.m_copies = m_copies
        self.ridge = ridge
        self.seed = seed
        self.use_raw = use_raw
        self.use_mdae_outputs = use_mdae_outputs
        self.use_mse = use_mse

    def fit(self, X, y):
        X = as_samples_matrix(X)
        y = as_label_vector(y, n=X.shape[0])
        n_classes = int(y.max())
        params = MdaeParams(
            zero_prob=self.zero_prob, n_noise_bands=self.n_noise_bands,
            noise_variance=self.noise_variance, m_copies=self.m_copies,
            ridge=self.ridge, seed=self.seed,
        )
        self.config_ = FeatureConfig(
            use_raw=self.use_raw, use_mdae_outputs=self.use_mdae_outputs,
            use_mse=self.use_mse, n_classes=n_classes,
        )
        self.models_ = (
            train_models(X.T, y, n_classes, params)
            if self.config_.needs_models else []
        )
        return self

    def transform(self, X):
        X = as_samples_matrix(X)
        return assemble_spectra(X.T, self.models_, self.config_).T
