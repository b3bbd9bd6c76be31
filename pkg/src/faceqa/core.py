"""Embedding records, datasets, distances and the triplet loss."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

DEFAULT_DIM = 128


class FaceQAError(Exception):
    """Base class for errors raised by this package."""


class DataError(FaceQAError, ValueError):
    """Input data violates a contract (bad shapes, missing keys, malformed files)."""


class NumericError(FaceQAError, ArithmeticError):
    """A computation hit a degenerate or non-finite value."""


def _as_vector(x, name: str = "vector") -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise DataError(f"{name} must be one-dimensional, got shape {v.shape}")
    return v


def _check_same_dim(*vectors: np.ndarray) -> None:
    dims = {v.shape[0] for v in vectors}
    if len(dims) != 1:
        raise DataError(f"dimension mismatch: {sorted(dims)}")


@dataclass(frozen=True)
class EmbeddingRecord:
    """One face image: identity keys plus its embedding vector."""

    subject_id: str
    image_id: str
    vector: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = _as_vector(self.vector)
        if not np.all(np.isfinite(v)):
            raise DataError(f"non-finite embedding for {self.key}")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "vector", v)

    @property
    def key(self) -> tuple[str, str]:
        return (self.subject_id, self.image_id)

    @property
    def dim(self) -> int:
        return self.vector.shape[0]


class Dataset:
    """Ordered, immutable collection of embedding records sharing one dimension.

    Parameters
    ----------
    records : iterable of EmbeddingRecord
        Records in their canonical order. Keys ``(subject_id, image_id)`` must be unique.
    dim : int, optional
        Expected embedding dimension. Inferred from the first record when omitted;
        required for an empty dataset (defaults to 128 then).
    """

    def __init__(self, records: Iterable[EmbeddingRecord], dim: int | None = None):
        self._records = tuple(records)
        if dim is None:
            dim = self._records[0].dim if self._records else DEFAULT_DIM
        self.dim = int(dim)
        self._index: dict[tuple[str, str], int] = {}
        for i, rec in enumerate(self._records):
            if rec.dim != self.dim:
                raise DataError(
                    f"record {rec.key} has dimension {rec.dim}, expected {self.dim}"
                )
            if rec.key in self._index:
                raise DataError(f"duplicate record key {rec.key}")
            self._index[rec.key] = i

    @classmethod
    def from_arrays(cls, subjects, images, vectors) -> "Dataset":
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise DataError("vectors must be a 2-D array")
        recs = [
            EmbeddingRecord(str(s), str(i), v)
            for s, i, v in zip(subjects, images, vectors)
        ]
        return cls(recs, dim=vectors.shape[1])

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[EmbeddingRecord]:
        return iter(self._records)

    def __getitem__(self, i: int) -> EmbeddingRecord:
        return self._records[i]

    def __contains__(self, key) -> bool:
        return key in self._index

    @property
    def records(self) -> tuple[EmbeddingRecord, ...]:
        return self._records

    def get(self, subject_id: str, image_id: str) -> EmbeddingRecord:
        try:
            return self._records[self._index[(subject_id, image_id)]]
        except KeyError:
            raise DataError(f"no record for key {(subject_id, image_id)}") from None

    def index_of(self, key: tuple[str, str]) -> int:
        return self._index[key]

    def by_subject(self) -> dict[str, list[EmbeddingRecord]]:
        """Group records by subject, in order of first appearance."""
        groups: dict[str, list[EmbeddingRecord]] = {}
        for rec in self._records:
            groups.setdefault(rec.subject_id, []).append(rec)
        return groups

    def matrix(self) -> np.ndarray:
        if not self._records:
            return np.empty((0, self.dim))
        return np.stack([r.vector for r in self._records])

    def subject_labels(self) -> list[str]:
        return [r.subject_id for r in self._records]


def euclidean_distance(a, b) -> float:
    a = _as_vector(a, "a")
    b = _as_vector(b, "b")
    _check_same_dim(a, b)
    diff = a - b
    return math.sqrt(float(np.dot(diff, diff)))


def triplet_loss(anchor, positive, negative, margin: float = 0.0) -> float:
    """Hinge triplet loss ``max(0, |a-p|^2 - |a-n|^2 + margin)`` for one triplet.

    ``margin`` defaults to 0, i.e. the plain hinge without a separation margin.
    """
    a, p, n = (_as_vector(v) for v in (anchor, positive, negative))
    _check_same_dim(a, p, n)
    if margin < 0:
        raise DataError(f"margin must be non-negative, got {margin}")
    return max(0.0, _triplet_expr(a, p, n, margin))


def _triplet_expr(a, p, n, margin):
    dp = a - p
    dn = a - n
    return float(np.dot(dp, dp)) - float(np.dot(dn, dn)) + margin


def triplet_loss_grad(anchor, positive, negative, margin: float = 0.0):
    """Gradients of :func:`triplet_loss` w.r.t. anchor, positive and negative.

    At the hinge boundary (expression exactly 0) the active branch is used.
    """
    a, p, n = (_as_vector(v) for v in (anchor, positive, negative))
    _check_same_dim(a, p, n)
    if margin < 0:
        raise DataError(f"margin must be non-negative, got {margin}")
    if _triplet_expr(a, p, n, margin) < 0:
        zero = np.zeros_like(a)
        return zero, zero.copy(), zero.copy()
    return 2.0 * (n - p), 2.0 * (p - a), 2.0 * (a - n)


def batch_triplet_loss(anchors, positives, negatives, margin: float = 0.0) -> float:
    """Sum of per-triplet hinge losses over rows of three (N, D) arrays."""
    a = np.atleast_2d(np.asarray(anchors, dtype=np.float64))
    p = np.atleast_2d(np.asarray(positives, dtype=np.float64))
    n = np.atleast_2d(np.asarray(negatives, dtype=np.float64))
    if not (a.shape == p.shape == n.shape):
        raise DataError(f"shape mismatch: {a.shape}, {p.shape}, {n.shape}")
    if margin < 0:
        raise DataError(f"margin must be non-negative, got {margin}")
    expr = ((a - p) ** 2).sum(axis=1) - ((a - n) ** 2).sum(axis=1) + margin
    return float(np.maximum(expr, 0.0).sum())


# --- JSON Lines ingestion ---------------------------------------------------

def load_jsonl(path) -> Dataset:
    """Read ``{"subject", "image", "vec"}`` records, one per line.

    Blank lines are ignored. Errors carry the 1-based line number.
    """
    path = Path(path)
    records: list[EmbeddingRecord] = []
    seen: set[tuple[str, str]] = set()
    dim = None
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                subject, image, vec = str(obj["subject"]), str(obj["image"]), obj["vec"]
                rec = EmbeddingRecord(subject, image, vec)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: malformed record ({exc})") from None
            if dim is None:
                dim = rec.dim
            elif rec.dim != dim:
                raise DataError(
                    f"{path}:{lineno}: dimension {rec.dim} differs from {dim}"
                )
            if rec.key in seen:
                raise DataError(f"{path}:{lineno}: duplicate key {rec.key}")
            seen.add(rec.key)
            records.append(rec)
    return Dataset(records, dim=dim)


def save_jsonl(dataset: Dataset, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for rec in dataset:
            obj = {"subject": rec.subject_id, "image": rec.image_id,
                   "vec": [float(x) for x in rec.vector]}
            fh.write(json.dumps(obj) + "\n")
