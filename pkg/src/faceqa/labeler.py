"""Quality targets from genuine/impostor distance statistics.

For a probe ``j`` of subject ``i`` the genuine distance ``d`` is its distance to
the subject's template, and ``mu``/``sigma`` are the mean and population
standard deviation of its distances to every other subject's template. The
normalized score is ``z = (d - mu) / sigma``; since a small genuine distance is
good, the training target is ``logistic(-z)``.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import DataError, EmbeddingRecord, NumericError, euclidean_distance
from .gallery import GalleryPartition

log = logging.getLogger(__name__)

LABEL_FIELDS = ("subject", "image", "genuine_dist", "imp_mean", "imp_std", "z", "target")


@dataclass(frozen=True)
class QualityLabel:
    subject_id: str
    image_id: str
    genuine_dist: float
    impostor_mean: float
    impostor_std: float
    z_score: float
    target: float

    @property
    def key(self) -> tuple[str, str]:
        return (self.subject_id, self.image_id)


class LabelingError(DataError):
    """A probe could not be labelled; carries the probe key."""

    def __init__(self, key, message):
        super().__init__(f"probe {key}: {message}")
        self.key = key


class DegenerateImpostorError(NumericError):
    """All impostor distances are equal, so the z-score is undefined."""


def genuine_score(probe: EmbeddingRecord, part: GalleryPartition) -> float:
    template = part.template_for(probe.subject_id)
    return euclidean_distance(probe.vector, template.vector)


def _impostor_distances(probe: EmbeddingRecord, part: GalleryPartition) -> np.ndarray:
    subjects, tmat = part.template_matrix
    mask = subjects != probe.subject_id
    if mask.sum() < 2:
        raise DataError(
            f"probe {probe.key} has {int(mask.sum())} impostor templates; need at least 2"
        )
    diff = tmat[mask] - probe.vector
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def impostor_stats(probe: EmbeddingRecord, part: GalleryPartition) -> tuple[float, float]:
    """Mean and population std of distances from ``probe`` to impostor templates.

    Raises
    ------
    DataError
        Fewer than two impostor templates.
    DegenerateImpostorError
        All impostor distances are identical (std is zero).
    """
    d = _impostor_distances(probe, part)
    mean = float(d.mean())
    std = float(d.std())
    if not std > 0:
        raise DegenerateImpostorError(
            f"probe {probe.key}: impostor distances are constant ({mean!r}); std is 0"
        )
    return mean, std


def normalize(genuine_dist: float, impostor_mean: float, impostor_std: float) -> float:
    if not impostor_std > 0:
        raise NumericError(f"impostor std must be positive, got {impostor_std}")
    return (genuine_dist - impostor_mean) / impostor_std


def to_target(z_score: float) -> float:
    """Map a z-score to (0, 1); lower (better) scores give higher targets."""
    if not math.isfinite(z_score):
        raise NumericError(f"z-score must be finite, got {z_score}")
    # numerically stable logistic(-z)
    if z_score >= 0:
        e = math.exp(-z_score)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(z_score))


def label_probe(probe: EmbeddingRecord, part: GalleryPartition) -> QualityLabel:
    d = genuine_score(probe, part)
    mu, sigma = impostor_stats(probe, part)
    z = normalize(d, mu, sigma)
    return QualityLabel(probe.subject_id, probe.image_id, d, mu, sigma, z, to_target(z))


def label_dataset(part: GalleryPartition, skip_errors: bool = False) -> list[QualityLabel]:
    """Label every probe of ``part`` in probe order.

    With ``skip_errors`` set, probes that cannot be labelled are logged at
    WARNING level and left out; otherwise the first failure raises
    :class:`LabelingError` (or :class:`DegenerateImpostorError`) naming the probe.
    """
    labels = []
    skipped = 0
    for probe in part.probes:
        try:
            labels.append(label_probe(probe, part))
        except DegenerateImpostorError:
            if not skip_errors:
                raise
            log.warning("skipping probe %s: degenerate impostor distribution", probe.key)
            skipped += 1
        except DataError as exc:
            if not skip_errors:
                raise LabelingError(probe.key, str(exc)) from exc
            log.warning("skipping probe %s: %s", probe.key, exc)
            skipped += 1
    if skipped:
        log.warning("skipped %d of %d probes", skipped, len(part.probes))
    return labels


def _fmt(x: float) -> str:
    return format(x, ".17g")


def save_labels(labels, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LABEL_FIELDS)
        for lab in labels:
            w.writerow([lab.subject_id, lab.image_id, _fmt(lab.genuine_dist),
                        _fmt(lab.impostor_mean), _fmt(lab.impostor_std),
                        _fmt(lab.z_score), _fmt(lab.target)])


def load_labels(path) -> list[QualityLabel]:
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != LABEL_FIELDS:
            raise DataError(f"{path}: expected header {','.join(LABEL_FIELDS)}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            try:
                out.append(QualityLabel(
                    row["subject"], row["image"], float(row["genuine_dist"]),
                    float(row["imp_mean"]), float(row["imp_std"]),
                    float(row["z"]), float(row["target"])))
            except (TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return out
