"""Closed-form denoising autoencoder trained on replicated, corrupted spectra.

Training stacks M copies of the clean spectra side by side (Xbar), corrupts
each copy independently (Xtilde), and solves the least-squares problem

    minimize  L(W) = || Xbar - W @ Xtilde ||_F^2

whose normal-equation solution is
W = (Xbar @ Xtilde.T) @ inv(Xtilde @ Xtilde.T + ridge * I), computed with a
symmetric positive-definite factorization rather than an explicit inverse.
Spectra are bias-augmented (constant-1 last coordinate) before the solve, so
the learned map is affine; the single layer stays linear, with no activation.
"""

import json
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import linalg
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import (
    ConfigError,
    EmptyClass,
    MissingFile,
    NoiseBandsExceedB,
    ShapeMismatch,
    SingularSystem,
)
from .validation import as_label_vector, as_samples_matrix, as_spectra_matrix, as_vector

_MASK_U64 = (1 << 64) - 1
_MODEL_MAGIC = b"MDAE"
_MODEL_VERSION = 1


@dataclass(frozen=True)
class MdaeParams:
    """Corruption and solver parameters.

    zero_prob is the per-entry probability of forcing a value to 0 during
    corruption; n_noise_bands bands per replica additionally receive i.i.d.
    Gaussian noise of the given variance. m_copies is the replication count.
    """

    zero_prob: float = 0.001
    n_noise_bands: int = 40
    noise_variance: float = 0.01
    m_copies: int = 20
    ridge: float = 1e-6
    n_layers: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.zero_prob < 1.0:
            raise ConfigError(f"zero_prob must be in [0, 1), got {self.zero_prob}")
        if self.n_noise_bands < 0:
            raise ConfigError("n_noise_bands must be >= 0")
        if self.noise_variance <= 0:
            raise ConfigError("noise_variance must be positive")
        if self.m_copies < 1:
            raise ConfigError("m_copies must be >= 1")
        if self.ridge < 0:
            raise ConfigError("ridge must be >= 0")
        if self.n_layers != 1:
            # Kept as a field for format stability; stacking is unsupported.
            raise ConfigError(f"n_layers is fixed to 1, got {self.n_layers}")

    def to_json_dict(self):
        return {
            "zero_prob": self.zero_prob,
            "n_noise_bands": self.n_noise_bands,
            "noise_variance": self.noise_variance,
            "m_copies": self.m_copies,
            "ridge": self.ridge,
            "n_layers": self.n_layers,
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, d):
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass
class MdaeModel:
    """Trained affine reconstruction map for one class (class_id 0 = all)."""

    weights: np.ndarray          # (B+1, B+1); last input coordinate is the bias
    class_id: int
    params: MdaeParams
    training_loss: float

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        d = self.weights.shape[0]
        if self.weights.ndim != 2 or self.weights.shape != (d, d) or d < 2:
            raise ShapeMismatch(f"weights must be square (B+1, B+1), got {self.weights.shape}")
        if not np.all(np.isfinite(self.weights)):
            raise SingularSystem("model weights are not finite")
        if self.training_loss < 0:
            raise ShapeMismatch("training_loss must be >= 0")
        self.weights.setflags(write=False)   # weights are kept constant once trained

    @property
    def n_bands(self):
        return self.weights.shape[0] - 1


def replicate_and_corrupt(X, params):
    """Return (Xbar, Xtilde): M tiled copies of X and their corrupted version.

    Per replica (not per pixel) n_noise_bands distinct band indices are drawn
    and every pixel in that replica gets i.i.d. Gaussian noise on those bands;
    afterwards each entry is independently zeroed with probability zero_prob.
    Corrupted values are not clamped. Draw order (bands then noise per replica,
    then one global zero mask) is fixed so results are deterministic per seed.
    """
    X = as_spectra_matrix(X, name="X")
    n_bands, n = X.shape
    if n < 1:
        raise ShapeMismatch("need at least one pixel")
    if params.n_noise_bands > n_bands:
        raise NoiseBandsExceedB(
            f"n_noise_bands={params.n_noise_bands} exceeds {n_bands} bands"
        )

    xbar = np.tile(X, (1, params.m_copies))
    xtilde = xbar.copy()
    rng = np.random.default_rng(params.seed)
    sigma = float(np.sqrt(params.noise_variance))
    for r in range(params.m_copies):
        if params.n_noise_bands == 0:
            continue
        bands = rng.choice(n_bands, size=params.n_noise_bands, replace=False)
        noise = rng.normal(0.0, sigma, size=(params.n_noise_bands, n))
        xtilde[bands, r * n:(r + 1) * n] += noise
    if params.zero_prob > 0:
        xtilde[rng.random(xtilde.shape) < params.zero_prob] = 0.0
    return xbar, xtilde


def add_bias_row(X):
    """Append the constant-1 coordinate used by the affine solve."""
    return np.vstack([X, np.ones((1, X.shape[1]))])


def solve_mdae(xbar, xtilde, ridge):
    """Normal-equation solve for W; returns (W, achieved loss).

    Both inputs must already carry the constant-1 bias row. The Gram matrix
    factorization is Cholesky; a numerically singular system with ridge = 0
    raises SingularSystem. The reported loss is L(W) itself (no ridge term),
    evaluated through Gram/cross products so no (B+1, n*M) temporary is formed.
    """
    if xbar.shape != xtilde.shape:
        raise ShapeMismatch(
            f"shape mismatch: {xbar.shape} vs {xtilde.shape}"
        )
    d = xbar.shape[0]
    gram = xtilde @ xtilde.T
    cross = xbar @ xtilde.T
    system = gram + ridge * np.eye(d) if ridge > 0 else gram
    try:
        cho = linalg.cho_factor(system, lower=True, check_finite=False)
    except linalg.LinAlgError as e:
        raise SingularSystem(
            f"Gram matrix is numerically singular (ridge={ridge})"
        ) from e
    if ridge == 0:
        # Cholesky can survive an exactly-singular matrix on rounding noise;
        # reject anything whose reciprocal condition is at machine level.
        anorm = np.abs(system).sum(axis=0).max()
        rcond, _ = linalg.lapack.dpocon(cho[0], anorm, uplo=b"L")
        if rcond < d * np.finfo(np.float64).eps:
            raise SingularSystem(
                f"Gram matrix is numerically singular (rcond={rcond:.2e})"
            )
    weights = linalg.cho_solve(cho, cross.T, check_finite=False).T

    # L(W) = ||Xbar||^2 - 2 <W, Cross> + <W, W @ Gram>
    loss = float(
        np.sum(xbar * xbar)
        - 2.0 * np.sum(weights * cross)
        + np.sum(weights * (weights @ gram))
    )
    return weights, max(loss, 0.0)


def train_class_mdae(train_spectra, labels, class_id, params):
    """Train one autoencoder on the spectra of a single class.

    class_id 0 trains on every training spectrum. The effective corruption
    seed is params.seed + class_id so per-class trainings are independent
    and may run concurrently.
    """
    X = as_spectra_matrix(train_spectra, name="train_spectra")
    y = as_label_vector(labels, n=X.shape[1], name="labels")
    if class_id > 0:
        X = X[:, y == class_id]
    if X.shape[1] < (2 if class_id > 0 else 1):
        raise EmptyClass(
            f"class {class_id} has {X.shape[1]} training pixels, need "
            f"{'>= 2' if class_id > 0 else '>= 1'}"
        )
    eff = replace(params, seed=(params.seed + class_id) & _MASK_U64)
    xbar, xtilde = replicate_and_corrupt(X, eff)
    weights, loss = solve_mdae(add_bias_row(xbar), add_bias_row(xtilde), params.ridge)
    return MdaeModel(weights=weights, class_id=int(class_id), params=params,
                     training_loss=loss)


def encode(model, x):
    """First B coordinates of W @ [x; 1]; purely affine, no activation."""
    x = as_vector(x, length=model.n_bands, name="x")
    b = model.n_bands
    return model.weights[:b, :b] @ x + model.weights[:b, b]


def encode_batch(model, X):
    """Column-wise encode of a (B, n) matrix."""
    X = as_spectra_matrix(X, n_bands=model.n_bands, name="X")
    b = model.n_bands
    return model.weights[:b, :b] @ X + model.weights[:b, b:b + 1]


def reconstruction_mse(model, x):
    """(1/B) * sum_b (x_b - encode(x)_b)^2."""
    x = as_vector(x, length=model.n_bands, name="x")
    diff = x - encode(model, x)
    return float(diff @ diff / model.n_bands)


def reconstruction_mse_batch(model, X):
    """Per-column reconstruction MSE of a (B, n) matrix."""
    diff = as_spectra_matrix(X, n_bands=model.n_bands, name="X") - encode_batch(model, X)
    return np.mean(diff * diff, axis=0)


# -- serialization -----------------------------------------------------------

def save_model(path, model):
    """Write ``mdae_<class_id>.bin``: magic, version/class/B header, float64
    weights row-major, then the parameters as a trailing JSON blob."""
    d = model.n_bands + 1
    tail = dict(model.params.to_json_dict(), training_loss=model.training_loss)
    blob = (
        _MODEL_MAGIC
        + struct.pack("<III", _MODEL_VERSION, model.class_id, model.n_bands)
        + np.ascontiguousarray(model.weights, dtype="<f8").tobytes()
        + json.dumps(tail, sort_keys=True).encode("utf-8")
    )
    Path(path).write_bytes(blob)


def load_model(path):
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"model file not found: {path}")
    raw = path.read_bytes()
    if raw[:4] != _MODEL_MAGIC:
        raise ShapeMismatch(f"{path} is not an autoencoder model file")
    version, class_id, n_bands = struct.unpack("<III", raw[4:16])
    if version != _MODEL_VERSION:
        raise ShapeMismatch(f"unsupported model version {version}")
    d = n_bands + 1
    end = 16 + d * d * 8
    weights = np.frombuffer(raw[16:end], dtype="<f8").reshape(d, d).copy()
    tail = json.loads(raw[end:].decode("utf-8"))
    loss = float(tail.pop("training_loss"))
    return MdaeModel(
        weights=weights, class_id=int(class_id),
        params=MdaeParams.from_json_dict(tail), training_loss=loss,
    )


def model_filename(class_id):
    return f"mdae_{class_id}.bin"


# -- sklearn-style wrapper ----------------------------------------------------

class ClassMdae(BaseEstimator, TransformerMixin):
    """Denoising-autoencoder transformer over (n_samples, n_bands) arrays.

    fit() learns the affine reconstruction map on the given samples,
    transform() reconstructs, and reconstruction_error() scores per sample.
    """

    def __init__(self, zero_prob=0.001, n_noise_bands=40, noise_variance=0.01,
                 m_copies=20, ridge=1e-6, seed=0):
        self.zero_prob = zero_prob
        self.n_noise_bands = n_noise_bands
        self.noise_variance = noise_variance
        self.m_copies = m_copies
        self.ridge = ridge
        self.seed = seed

    def _params(self):
        return MdaeParams(
            zero_prob=self.zero_prob, n_noise_bands=self.n_noise_bands,
            noise_variance=self.noise_variance, m_copies=self.m_copies,
            ridge=self.ridge, seed=self.seed,
        )

    def fit(self, X, y=None):
        X = as_samples_matrix(X)
        self.model_ = train_class_mdae(
            X.T, np.zeros(X.shape[0], dtype=np.int64), 0, self._params()
        )
        return self

    def transform(self, X):
        X = as_samples_matrix(X)
        return encode_batch(self.model_, X.T).T

    def reconstruction_error(self, X):
        X = as_samples_matrix(X)
        return reconstruction_mse_batch(self.model_, X.T)
