"""Sigmoid quality head trained with RMSLE loss and momentum SGD.

The embeddings are treated as fixed inputs, so the whole trainable model is a
weight vector and a bias: ``quality(x) = logistic(w . x + b)``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from .core import DataError, Dataset, FaceQAError, NumericError
from .labeler import QualityLabel


class ConfigError(FaceQAError, ValueError):
    """Invalid hyperparameters."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    momentum: float = 0.99
    weight_decay: float = 1e-5
    batch_size: int = 64
    epochs: int = 30
    train_fraction: float = 0.7
    seed: int = 0
    log_epsilon: float = 1e-7

    def __post_init__(self):
        checks = [
            (self.learning_rate > 0, "learning_rate must be > 0"),
            (0 <= self.momentum < 1, "momentum must be in [0, 1)"),
            (self.weight_decay >= 0, "weight_decay must be >= 0"),
            (self.batch_size >= 1, "batch_size must be >= 1"),
            (self.epochs >= 1, "epochs must be >= 1"),
            (0 < self.train_fraction < 1, "train_fraction must be in (0, 1)"),
            (self.log_epsilon > 0, "log_epsilon must be > 0"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)


@dataclass
class RegressionHead:
    weights: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = float(self.bias)
        if self.weights.ndim != 1:
            raise DataError("weights must be a vector")
        if not (np.all(np.isfinite(self.weights)) and math.isfinite(self.bias)):
            raise NumericError("head parameters must be finite")

    @classmethod
    def zeros(cls, dim: int) -> "RegressionHead":
        return cls(np.zeros(dim), 0.0)

    @property
    def dim(self) -> int:
        return self.weights.shape[0]


@dataclass
class Velocity:
    weights: np.ndarray
    bias: float = 0.0

    @classmethod
    def zeros(cls, dim: int) -> "Velocity":
        return cls(np.zeros(dim), 0.0)


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    test_loss: list[float] = field(default_factory=list)
    train_keys: list[tuple[str, str]] = field(default_factory=list)
    test_keys: list[tuple[str, str]] = field(default_factory=list)


def predict(head: RegressionHead, vectors) -> float | np.ndarray:
    """Quality in (0, 1) for one vector (returns float) or rows of a matrix."""
    x = np.asarray(vectors, dtype=np.float64)
    if x.shape[-1] != head.dim:
        raise DataError(f"dimension mismatch: vector {x.shape[-1]}, head {head.dim}")
    out = expit(x @ head.weights + head.bias)
    return float(out) if x.ndim == 1 else out


def _check_pair(targets, predictions):
    y = np.asarray(targets, dtype=np.float64).ravel()
    yhat = np.asarray(predictions, dtype=np.float64).ravel()
    if y.size == 0:
        raise DataError("empty input")
    if y.shape != yhat.shape:
        raise DataError(f"length mismatch: {y.size} targets, {yhat.size} predictions")
    for name, arr in (("targets", y), ("predictions", yhat)):
        if not np.all((arr >= 0) & (arr <= 1)):
            raise DataError(f"{name} must lie in [0, 1]")
    return y, yhat


def rmsle_loss(targets, predictions, log_epsilon: float = 1e-7) -> float:
    """Root mean squared difference of ``log(. + eps)`` between targets and predictions."""
    y, yhat = _check_pair(targets, predictions)
    r = np.log(y + log_epsilon) - np.log(yhat + log_epsilon)
    return math.sqrt(float(np.mean(r * r)))


def loss_gradient(head: RegressionHead, vectors, targets, log_epsilon: float = 1e-7):
    """Gradient of the RMSLE of ``predict(head, vectors)`` against ``targets``.

    Returns ``(grad_weights, grad_bias)``. At zero loss the gradient is defined
    as zero.
    """
    x = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    yhat = predict(head, x)
    y, yhat = _check_pair(targets, yhat)
    n = y.size
    r = np.log(y + log_epsilon) - np.log(yhat + log_epsilon)
    loss = math.sqrt(float(np.mean(r * r)))
    if loss == 0.0:
        return np.zeros(head.dim), 0.0
    # dL/dz_i = -r_i * yhat_i (1 - yhat_i) / (n * L * (yhat_i + eps))
    dz = -r * yhat * (1.0 - yhat) / (n * loss * (yhat + log_epsilon))
    return x.T @ dz, float(dz.sum())


def sgd_step(head: RegressionHead, velocity: Velocity, grad_w, grad_b: float,
             config: TrainConfig) -> tuple[RegressionHead, Velocity]:
    """Classical momentum with L2 decay on the weights only.

    ``v <- momentum * v - lr * (g + weight_decay * w)``; ``w <- w + v``.
    """
    grad_w = np.asarray(grad_w, dtype=np.float64)
    if grad_w.shape != head.weights.shape:
        raise DataError(f"gradient shape {grad_w.shape} != weights {head.weights.shape}")
    if not (np.all(np.isfinite(grad_w)) and math.isfinite(grad_b)):
        raise NumericError(
            f"non-finite gradient (|g_w|={np.linalg.norm(grad_w)}, g_b={grad_b})"
        )
    lr, m = config.learning_rate, config.momentum
    vw = m * velocity.weights - lr * (grad_w + config.weight_decay * head.weights)
    vb = m * velocity.bias - lr * grad_b
    return RegressionHead(head.weights + vw, head.bias + vb), Velocity(vw, vb)


def _resolve(labels: Sequence[QualityLabel], dataset: Dataset):
    x = np.empty((len(labels), dataset.dim))
    for i, lab in enumerate(labels):
        if lab.key not in dataset:
            raise DataError(f"label key {lab.key} has no embedding")
        x[i] = dataset.get(*lab.key).vector
    return x, np.array([lab.target for lab in labels], dtype=np.float64)


def train(labels: Sequence[QualityLabel], dataset: Dataset,
          config: TrainConfig = TrainConfig(),
          init: RegressionHead | None = None) -> tuple[RegressionHead, TrainHistory]:
    """Fit a head on a seeded train/test split of ``labels``.

    Training starts from ``init`` when given, otherwise from all-zero parameters.

    The first ``floor(train_fraction * n)`` samples of a seeded permutation are
    used for training and the rest are held out. The training set is reshuffled
    every epoch and swept in mini-batches. Losses in the history are full-set
    RMSLE values measured at the end of each epoch.
    """
    if len(labels) < 2:
        raise DataError(f"need at least 2 labelled samples, got {len(labels)}")
    x, y = _resolve(labels, dataset)
    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(labels))
    n_train = math.floor(config.train_fraction * len(labels))
    if n_train < 1 or n_train >= len(labels):
        raise DataError(
            f"train_fraction {config.train_fraction} leaves an empty split for {len(labels)} samples"
        )
    tr, te = order[:n_train], order[n_train:]

    if init is None:
        head = RegressionHead.zeros(dataset.dim)
    elif init.dim != dataset.dim:
        raise DataError(f"init head has dimension {init.dim}, data {dataset.dim}")
    else:
        head = RegressionHead(init.weights.copy(), init.bias)
    vel = Velocity.zeros(dataset.dim)
    hist = TrainHistory(train_keys=[labels[i].key for i in tr],
                        test_keys=[labels[i].key for i in te])
    eps = config.log_epsilon
    for _ in range(config.epochs):
        perm = tr[rng.permutation(n_train)]
        for start in range(0, n_train, config.batch_size):
            idx = perm[start:start + config.batch_size]
            gw, gb = loss_gradient(head, x[idx], y[idx], eps)
            head, vel = sgd_step(head, vel, gw, gb, config)
        hist.train_loss.append(rmsle_loss(y[tr], predict(head, x[tr]), eps))
        hist.test_loss.append(rmsle_loss(y[te], predict(head, x[te]), eps))
    return head, hist


# --- files --------------------------------------------------------------------

def save_model(head: RegressionHead, path, config: TrainConfig | None = None) -> None:
    # json writes floats with repr(), the shortest string that round-trips exactly
    obj = {
        "dim": head.dim,
        "weights": [float(w) for w in head.weights],
        "bias": head.bias,
        "config": asdict(config) if config is not None else None,
        "seed": config.seed if config is not None else None,
    }
    Path(path).write_text(json.dumps(obj, indent=1) + "\n", encoding="utf-8")


def load_model(path) -> tuple[RegressionHead, TrainConfig | None]:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        head = RegressionHead(obj["weights"], obj["bias"])
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"{path}: malformed model file ({exc})") from None
    if head.dim != obj["dim"]:
        raise DataError(f"{path}: dim {obj['dim']} but {head.dim} weights")
    config = TrainConfig(**obj["config"]) if obj.get("config") else None
    return head, config


def save_history(hist: TrainHistory, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "test_loss"])
        for e, (a, b) in enumerate(zip(hist.train_loss, hist.test_loss), start=1):
            w.writerow([e, format(a, ".17g"), format(b, ".17g")])
