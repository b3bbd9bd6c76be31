"""Seeded synthetic embeddings with a known per-image noise level.

Each subject gets a centroid uniformly distributed on a sphere of radius
``centroid_scale``; each image adds isotropic Gaussian noise whose scale ``tau``
is drawn uniformly from ``[noise_low, noise_high]``. ``tau`` is the ground-truth
"badness" of an image: larger ``tau`` means a worse sample.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import DataError, Dataset, EmbeddingRecord


@dataclass(frozen=True)
class SynthSpec:
    n_subjects: int = 50
    images_per_subject: int = 10
    dim: int = 32
    noise_low: float = 0.05
    noise_high: float = 1.0
    centroid_scale: float = 1.0
    seed: int = 0
    # optional per-subject image counts; overrides images_per_subject
    image_counts: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.n_subjects < 2:
            raise DataError(f"n_subjects must be >= 2, got {self.n_subjects}")
        if self.images_per_subject < 1:
            raise DataError(f"images_per_subject must be >= 1, got {self.images_per_subject}")
        if self.dim < 1:
            raise DataError(f"dim must be >= 1, got {self.dim}")
        if not 0 <= self.noise_low <= self.noise_high:
            raise DataError(
                f"need 0 <= noise_low <= noise_high, got {self.noise_low}, {self.noise_high}"
            )
        if not self.centroid_scale > 0:
            raise DataError(f"centroid_scale must be positive, got {self.centroid_scale}")
        if self.image_counts is not None:
            counts = tuple(int(c) for c in self.image_counts)
            if len(counts) != self.n_subjects or min(counts) < 1:
                raise DataError("image_counts needs one count >= 1 per subject")
            object.__setattr__(self, "image_counts", counts)

    def counts(self) -> tuple[int, ...]:
        if self.image_counts is not None:
            return self.image_counts
        return (self.images_per_subject,) * self.n_subjects


@dataclass(frozen=True)
class SynthTruth:
    tau: dict[tuple[str, str], float]

    def __getitem__(self, key) -> float:
        return self.tau[key]

    def __len__(self) -> int:
        return len(self.tau)


def subject_name(i: int) -> str:
    return f"s{i:05d}"


def image_name(j: int) -> str:
    return f"img{j:04d}"


def generate(spec: SynthSpec) -> tuple[Dataset, SynthTruth]:
    rng = np.random.default_rng(spec.seed)
    centroids = rng.standard_normal((spec.n_subjects, spec.dim))
    centroids *= spec.centroid_scale / np.linalg.norm(centroids, axis=1, keepdims=True)

    records = []
    tau = {}
    for i, n_img in enumerate(spec.counts()):
        taus = rng.uniform(spec.noise_low, spec.noise_high, size=n_img)
        noise = rng.standard_normal((n_img, spec.dim)) * taus[:, None]
        vecs = centroids[i] + noise
        for j in range(n_img):
            rec = EmbeddingRecord(subject_name(i), image_name(j), vecs[j])
            records.append(rec)
            tau[rec.key] = float(taus[j])
    return Dataset(records, dim=spec.dim), SynthTruth(tau)


# LFW composition: 5749 subjects, 13233 images, 1680 subjects with >= 2 images.
LFW_MULTI_SUBJECTS = 1680
LFW_SINGLE_SUBJECTS = 4069
LFW_IMAGES = 13233


def lfw_shaped_counts() -> tuple[int, ...]:
    """Per-subject image counts matching LFW's subject/image totals."""
    multi_images = LFW_IMAGES - LFW_SINGLE_SUBJECTS
    base, extra = divmod(multi_images, LFW_MULTI_SUBJECTS)
    counts = [base + 1] * extra + [base] * (LFW_MULTI_SUBJECTS - extra)
    return tuple(counts) + (1,) * LFW_SINGLE_SUBJECTS


def lfw_shaped_spec(dim: int = 8, seed: int = 0, **kwargs) -> SynthSpec:
    counts = lfw_shaped_counts()
    return SynthSpec(n_subjects=len(counts), images_per_subject=1, dim=dim, seed=seed,
                     image_counts=counts, **kwargs)


def save_truth(truth: SynthTruth, path, order: Sequence[tuple[str, str]] | None = None) -> None:
    keys = order if order is not None else list(truth.tau)
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject", "image", "tau"])
        for key in keys:
            w.writerow([key[0], key[1], format(truth.tau[key], ".17g")])


def load_truth(path) -> SynthTruth:
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        return SynthTruth({(r["subject"], r["image"]): float(r["tau"])
                           for r in csv.DictReader(fh)})
