"""Verification metrics over same/different-subject pairs.

A pair is accepted at threshold ``d`` when its distance is ``<= d`` and
rejected when it is ``> d``. FAR is the accepted fraction of different-subject
pairs and FRR the rejected fraction of same-subject pairs.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist

from .core import DataError, Dataset

DEFAULT_GRID_SIZE = 512


@dataclass(frozen=True)
class PairSet:
    """Unordered record pairs split by subject equality.

    ``same_idx``/``diff_idx`` are ``(k, 2)`` arrays of record indices ``i < j``
    into the source dataset (empty when built from raw distances).
    """

    same_dist: np.ndarray
    diff_dist: np.ndarray
    same_idx: np.ndarray | None = None
    diff_idx: np.ndarray | None = None

    def __post_init__(self):
        for name in ("same_dist", "diff_dist"):
            arr = np.asarray(getattr(self, name), dtype=np.float64).ravel()
            if np.any(~np.isfinite(arr)) or np.any(arr < 0):
                raise DataError(f"{name} must be finite and non-negative")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "_same_sorted", np.sort(self.same_dist))
        object.__setattr__(self, "_diff_sorted", np.sort(self.diff_dist))

    @classmethod
    def from_distances(cls, same, diff) -> "PairSet":
        return cls(same, diff)

    @property
    def n_same(self) -> int:
        return self.same_dist.size

    @property
    def n_diff(self) -> int:
        return self.diff_dist.size

    def max_distance(self) -> float:
        return float(max(self.same_dist.max(initial=0.0), self.diff_dist.max(initial=0.0)))


@dataclass(frozen=True)
class EvalCurve:
    thresholds: np.ndarray
    far: np.ndarray
    frr: np.ndarray

    def __len__(self) -> int:
        return self.thresholds.size


@dataclass(frozen=True)
class EerResult:
    eer: float
    threshold: float


@dataclass(frozen=True)
class Histograms:
    edges: np.ndarray
    intra: np.ndarray
    inter: np.ndarray


def build_pairs(dataset: Dataset) -> PairSet:
    """All unordered cross-record pairs with their Euclidean distances."""
    n = len(dataset)
    if n < 2:
        raise DataError(f"need at least 2 records to form pairs, got {n}")
    dist = pdist(dataset.matrix(), metric="euclidean")
    i, j = np.triu_indices(n, k=1)  # same order as pdist's condensed output
    codes = np.unique(dataset.subject_labels(), return_inverse=True)[1]
    same = codes[i] == codes[j]
    pairs = np.stack([i, j], axis=1)
    return PairSet(dist[same], dist[~same], pairs[same], pairs[~same])


def far_at(pairs: PairSet, d):
    if pairs.n_diff == 0:
        raise DataError("FAR undefined: no different-subject pairs")
    accepted = np.searchsorted(pairs._diff_sorted, d, side="right")
    out = accepted / pairs.n_diff
    return float(out) if np.ndim(out) == 0 else out


def frr_at(pairs: PairSet, d):
    if pairs.n_same == 0:
        raise DataError("FRR undefined: no same-subject pairs")
    accepted = np.searchsorted(pairs._same_sorted, d, side="right")
    out = (pairs.n_same - accepted) / pairs.n_same
    return float(out) if np.ndim(out) == 0 else out


def default_grid(pairs: PairSet, size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    if size < 2:
        raise DataError(f"grid size must be >= 2, got {size}")
    return np.linspace(0.0, pairs.max_distance(), size)


def curve(pairs: PairSet, thresholds=None) -> EvalCurve:
    thr = default_grid(pairs) if thresholds is None else np.asarray(thresholds, dtype=np.float64).ravel()
    if thr.size == 0:
        raise DataError("threshold grid is empty")
    if np.any(np.diff(thr) <= 0):
        raise DataError("threshold grid must be strictly increasing")
    return EvalCurve(thr, far_at(pairs, thr), frr_at(pairs, thr))


def eer(c: EvalCurve) -> EerResult:
    """Equal error rate by linear interpolation at the sign change of FAR - FRR."""
    delta = c.far - c.frr
    nonneg = np.flatnonzero(delta >= 0)
    if nonneg.size == 0 or delta[0] > 0:
        raise DataError(
            "FAR - FRR does not change sign on this grid; widen the threshold range"
        )
    k = int(nonneg[0])
    if delta[k] == 0:
        return EerResult(float(c.far[k]), float(c.thresholds[k]))
    t = delta[k - 1] / (delta[k - 1] - delta[k])
    thr = c.thresholds[k - 1] + t * (c.thresholds[k] - c.thresholds[k - 1])
    rate = c.far[k - 1] + t * (c.far[k] - c.far[k - 1])
    return EerResult(float(rate), float(thr))


def distance_histograms(pairs: PairSet, bins: int = 32) -> Histograms:
    if bins < 1:
        raise DataError(f"bins must be >= 1, got {bins}")
    both = np.concatenate([pairs.same_dist, pairs.diff_dist])
    if both.size == 0:
        raise DataError("no pairs to histogram")
    lo, hi = float(both.min()), float(both.max())
    edges = np.histogram_bin_edges(both, bins=bins, range=(lo, hi))
    intra, _ = np.histogram(pairs.same_dist, bins=edges)
    inter, _ = np.histogram(pairs.diff_dist, bins=edges)
    return Histograms(edges, intra, inter)


# --- files --------------------------------------------------------------------

def _fmt(x) -> str:
    return format(float(x), ".17g")


def save_curve(c: EvalCurve, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "far", "frr"])
        for row in zip(c.thresholds, c.far, c.frr):
            w.writerow([_fmt(v) for v in row])


def load_curve(path) -> EvalCurve:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return EvalCurve(data[:, 0], data[:, 1], data[:, 2])


def save_eer(result: EerResult, pairs: PairSet, path) -> None:
    obj = {"eer": result.eer, "threshold": result.threshold,
           "n_same": pairs.n_same, "n_diff": pairs.n_diff}
    Path(path).write_text(json.dumps(obj, indent=1) + "\n", encoding="utf-8")


def save_histograms(h: Histograms, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", "intra_count", "inter_count"])
        for lo, hi, a, b in zip(h.edges[:-1], h.edges[1:], h.intra, h.inter):
            w.writerow([_fmt(lo), _fmt(hi), int(a), int(b)])
