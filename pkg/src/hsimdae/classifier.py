"""Feedforward softmax network trained with mini-batch SGD plus momentum.

Hidden layers are rectified affine maps; the head is a softmax over class
logits trained against categorical cross-entropy. Everything runs in 64-bit
so the analytic gradients can be validated against central finite
differences. Matrices are column-major over samples: a batch is (D, k).
"""

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .errors import (
    InvalidTopology,
    LabelOutOfRange,
    MissingFile,
    NonFiniteLoss,
    ShapeMismatch,
)
from .validation import as_label_vector, as_samples_matrix

_NET_MAGIC = b"MLPN"
_NET_VERSION = 1


@dataclass(frozen=True)
class MlpTopology:
    input_dim: int
    hidden: tuple
    output_dim: int

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        dims = (self.input_dim, *self.hidden, self.output_dim)
        if any(d < 1 for d in dims):
            raise InvalidTopology(f"all layer widths must be >= 1, got {dims}")

    @property
    def dims(self):
        return (self.input_dim, *self.hidden, self.output_dim)


@dataclass(frozen=True)
class SgdHyper:
    """Defaults: lr 0.04, momentum 0.92, batch 256, 20 epochs.

    learning_rate 0 is allowed (null update) so training can be exercised
    as a no-op.
    """

    learning_rate: float = 0.04
    momentum: float = 0.92
    batch_size: int = 256
    epochs: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise InvalidTopology("learning_rate must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise InvalidTopology(f"momentum must be in [0, 1), got {self.momentum}")
        if self.batch_size < 1 or self.epochs < 1:
            raise InvalidTopology("batch_size and epochs must be >= 1")

    def to_json_dict(self):
        return {
            "learning_rate": self.learning_rate, "momentum": self.momentum,
            "batch_size": self.batch_size, "epochs": self.epochs,
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, d):
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


class MlpNetwork:
    """Parameters, matching velocity buffers, and the init seed."""

    def __init__(self, topology, weights, biases, seed):
        self.topology = topology
        self.weights = weights
        self.biases = biases
        self.velocity_w = [np.zeros_like(w) for w in weights]
        self.velocity_b = [np.zeros_like(b) for b in biases]
        self.seed = seed

    @property
    def n_parameters(self):
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)


def init_network(topology, seed):
    """Fan-balanced uniform init: W ~ U(+-sqrt(6/(fan_in+fan_out))), b = 0."""
    rng = np.random.default_rng(seed)
    dims = topology.dims
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpNetwork(topology, weights, biases, int(seed))


def _check_batch(net, batch):
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[0] != net.topology.input_dim:
        raise ShapeMismatch(
            f"batch must be ({net.topology.input_dim}, k), got {batch.shape}"
        )
    if batch.shape[1] < 1:
        raise ShapeMismatch("batch must contain at least one column")
    return batch


def _forward_cached(net, batch):
    """Returns (activations per layer incl. input, log-probs, probs)."""
    acts = [batch]
    a = batch
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = w @ a + b[:, None]
        if i < last:
            a = np.maximum(z, 0.0)
            acts.append(a)
        else:
            z -= z.max(axis=0, keepdims=True)
            log_probs = z - np.log(np.exp(z).sum(axis=0, keepdims=True))
            probs = np.exp(log_probs)
            return acts, log_probs, probs
    raise AssertionError("unreachable")


def forward(net, batch):
    """Class probabilities (N, k); columns sum to 1."""
    batch = _check_batch(net, batch)
    return _forward_cached(net, batch)[2]


def _one_hot(labels, n_classes, k):
    y = np.zeros((n_classes, k))
    y[labels - 1, np.arange(k)] = 1.0
    return y


def cross_entropy_loss(net, batch, labels):
    """Mean categorical cross-entropy of the batch."""
    batch = _check_batch(net, batch)
    labels = _validate_labels(net, labels, batch.shape[1])
    _, log_probs, _ = _forward_cached(net, batch)
    return float(-log_probs[labels - 1, np.arange(batch.shape[1])].mean())


def _validate_labels(net, labels, k):
    labels = as_label_vector(labels, n=k, name="labels")
    n_classes = net.topology.output_dim
    if labels.size and (labels.min() < 1 or labels.max() > n_classes):
        raise LabelOutOfRange(
            f"labels must lie in 1..{n_classes}, got range "
            f"[{labels.min()}, {labels.max()}]"
        )
    return labels


def backward(net, batch, labels):
    """Analytic gradients of the mean cross-entropy loss.

    Returns (loss, grads_w, grads_b).
    """
    batch = _check_batch(net, batch)
    labels = _validate_labels(net, labels, batch.shape[1])
    k = batch.shape[1]
    acts, log_probs, probs = _forward_cached(net, batch)
    loss = float(-log_probs[labels - 1, np.arange(k)].mean())

    grads_w = [None] * len(net.weights)
    grads_b = [None] * len(net.biases)
    delta = (probs - _one_hot(labels, net.topology.output_dim, k)) / k
    for i in range(len(net.weights) - 1, -1, -1):
        grads_w[i] = delta @ acts[i].T
        grads_b[i] = delta.sum(axis=1)
        if i > 0:
            delta = (net.weights[i].T @ delta) * (acts[i] > 0)
    return loss, grads_w, grads_b


def accuracy(net, batch, labels):
    labels = np.asarray(labels)
    return float(np.mean(predict(net, batch) == labels))


def train(net, features, labels, hyper, val_features=None, val_labels=None):
    """SGD with classical momentum: v <- momentum*v - lr*g; theta <- theta + v.

    Runs exactly epochs * ceil(n/batch) updates with a fresh shuffle per
    epoch (seeded by [hyper.seed, epoch]); no early stopping. Validation
    accuracy, when a validation set is given, is recorded per epoch for
    diagnostics only. Returns (net, trace); the net is updated in place.
    """
    features = _check_batch(net, features)
    labels = _validate_labels(net, labels, features.shape[1])
    n = features.shape[1]
    trace = []
    for epoch in range(hyper.epochs):
        order = np.random.default_rng([hyper.seed, epoch]).permutation(n)
        loss_sum = 0.0
        for start in range(0, n, hyper.batch_size):
            sel = order[start:start + hyper.batch_size]
            loss, grads_w, grads_b = backward(net, features[:, sel], labels[sel])
            if not np.isfinite(loss):
                raise NonFiniteLoss(
                    f"non-finite loss at epoch {epoch}, batch offset {start}"
                )
            for i in range(len(net.weights)):
                net.velocity_w[i] = (
                    hyper.momentum * net.velocity_w[i]
                    - hyper.learning_rate * grads_w[i]
                )
                net.velocity_b[i] = (
                    hyper.momentum * net.velocity_b[i]
                    - hyper.learning_rate * grads_b[i]
                )
                net.weights[i] = net.weights[i] + net.velocity_w[i]
                net.biases[i] = net.biases[i] + net.velocity_b[i]
                # sum is one pass and goes NaN/inf if any entry does
                if not np.isfinite(np.sum(net.weights[i])):
                    raise NonFiniteLoss(
                        f"non-finite parameters at epoch {epoch}, "
                        f"batch offset {start}, layer {i}"
                    )
            loss_sum += loss * sel.size
        entry = {"epoch": epoch, "train_loss": loss_sum / n}
        if val_features is not None and val_labels is not None:
            entry["val_accuracy"] = accuracy(net, val_features, val_labels)
        trace.append(entry)
    return net, trace


def predict(net, features):
    """Argmax class per column, ties broken toward the lowest class index."""
    probs = forward(net, features)
    return np.argmax(probs, axis=0).astype(np.int64) + 1


def gradient_check(net, batch, labels, n_samples=120, step=1e-5, seed=0):
    """Max relative error between analytic and central-difference gradients.

    Samples up to n_samples parameters across all layers. The relative error
    denominator is floored at 1e-6 so parameters with near-zero gradient
    (dead rectifier paths) do not amplify finite-difference noise.
    """
    batch = _check_batch(net, batch)
    labels = _validate_labels(net, labels, batch.shape[1])
    _, grads_w, grads_b = backward(net, batch, labels)

    params = list(net.weights) + list(net.biases)
    grads = list(grads_w) + list(grads_b)
    sizes = [p.size for p in params]
    total = sum(sizes)
    rng = np.random.default_rng(seed)
    picks = (
        np.arange(total) if total <= n_samples
        else rng.choice(total, size=n_samples, replace=False)
    )

    offsets = np.cumsum([0] + sizes)
    worst = 0.0
    for flat_idx in picks:
        layer = int(np.searchsorted(offsets, flat_idx, side="right") - 1)
        local = int(flat_idx - offsets[layer])
        p = params[layer]
        orig = p.flat[local]
        p.flat[local] = orig + step
        up = cross_entropy_loss(net, batch, labels)
        p.flat[local] = orig - step
        down = cross_entropy_loss(net, batch, labels)
        p.flat[local] = orig
        numeric = (up - down) / (2.0 * step)
        analytic = grads[layer].flat[local]
        denom = max(abs(analytic), abs(numeric), 1e-6)
        worst = max(worst, abs(analytic - numeric) / denom)
    return worst


# -- serialization -----------------------------------------------------------

def save_network(path, net):
    """``mlp.bin``: magic, version, layer-dim vector, then per layer the
    float64 weight matrix (row-major) and bias vector."""
    dims = net.topology.dims
    blob = [_NET_MAGIC, struct.pack("<II", _NET_VERSION, len(dims))]
    blob.append(struct.pack(f"<{len(dims)}I", *dims))
    for w, b in zip(net.weights, net.biases):
        blob.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        blob.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(blob))


def load_network(path):
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"network file not found: {path}")
    raw = path.read_bytes()
    if raw[:4] != _NET_MAGIC:
        raise ShapeMismatch(f"{path} is not a network file")
    version, n_dims = struct.unpack("<II", raw[4:12])
    if version != _NET_VERSION:
        raise ShapeMismatch(f"unsupported network version {version}")
    dims = struct.unpack(f"<{n_dims}I", raw[12:12 + 4 * n_dims])
    topology = MlpTopology(dims[0], tuple(dims[1:-1]), dims[-1])
    off = 12 + 4 * n_dims
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w_end = off + fan_out * fan_in * 8
        weights.append(
            np.frombuffer(raw[off:w_end], dtype="<f8").reshape(fan_out, fan_in).copy()
        )
        off = w_end + fan_out * 8
        biases.append(np.frombuffer(raw[w_end:off], dtype="<f8").copy())
    return MlpNetwork(topology, weights, biases, seed=0)


# -- sklearn-style wrapper ----------------------------------------------------

class SoftmaxMlpClassifier(BaseEstimator, ClassifierMixin):
    """Classifier over (n_samples, n_features) arrays with labels 1..N."""

    def __init__(self, hidden=(512, 256, 128), learning_rate=0.04,
                 momentum=0.92, batch_size=256, epochs=20, seed=0):
        self.hidden = hidden
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed

    def fit(self, X, y, X_val=None, y_val=None):
        X = as_samples_matrix(X)
        y = as_label_vector(y, n=X.shape[0])
        if y.min() < 1:
            raise LabelOutOfRange("labels must start at 1")
        n_classes = int(y.max())
        self.classes_ = np.arange(1, n_classes + 1)
        topology = MlpTopology(X.shape[1], tuple(self.hidden), n_classes)
        self.net_ = init_network(topology, self.seed)
        hyper = SgdHyper(
            learning_rate=self.learning_rate, momentum=self.momentum,
            batch_size=self.batch_size, epochs=self.epochs, seed=self.seed,
        )
        val_f = as_samples_matrix(X_val).T if X_val is not None else None
        val_y = as_label_vector(y_val) if y_val is not None else None
        _, self.trace_ = train(self.net_, X.T, y, hyper, val_f, val_y)
        return self

    def predict_proba(self, X):
        return forward(self.net_, as_samples_matrix(X).T).T

    def predict(self, X):
        return predict(self.net_, as_samples_matrix(X).T)
