"""Small input-validation helpers used at estimator and function boundaries."""

import numpy as np

from .errors import LengthMismatch, NonFiniteValue, ShapeMismatch


def as_spectra_matrix(X, n_bands=None, name="X"):
    """Coerce to a float64 (bands, n_pixels) matrix and check finiteness."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeMismatch(f"{name} must be 2-D (bands, pixels), got ndim={X.ndim}")
    if n_bands is not None and X.shape[0] != n_bands:
        raise LengthMismatch(f"{name} has {X.shape[0]} bands, expected {n_bands}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteValue(f"{name} contains non-finite values")
    return X


def as_vector(x, length=None, name="x"):
    """Coerce to a finite float64 1-D vector of the expected length."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeMismatch(f"{name} must be 1-D, got ndim={x.ndim}")
    if length is not None and x.shape[0] != length:
        raise LengthMismatch(f"{name} has length {x.shape[0]}, expected {length}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteValue(f"{name} contains non-finite values")
    return x


def as_label_vector(y, n=None, name="y"):
    y = np.asarray(y)
    if y.ndim != 1:
        raise ShapeMismatch(f"{name} must be 1-D, got ndim={y.ndim}")
    if n is not None and y.shape[0] != n:
        raise LengthMismatch(f"{name} has length {y.shape[0]}, expected {n}")
    return y.astype(np.int64, copy=False)


def as_samples_matrix(X, name="X"):
    """sklearn-style (n_samples, n_features) coercion for the estimator API."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ShapeMismatch(f"{name} must be 2-D (samples, features), got ndim={X.ndim}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteValue(f"{name} contains non-finite values")
    return X
