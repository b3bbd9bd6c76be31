"""Template/probe partitioning of a labelled embedding dataset.

Every subject contributes exactly one template. Subjects with two or more
images contribute the remaining images as probes; single-image subjects only
enlarge the template gallery (and therefore the impostor population).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .core import DataError, Dataset, EmbeddingRecord

POLICIES = ("first", "random")


@dataclass(frozen=True)
class GalleryPartition:
    templates: dict[str, EmbeddingRecord]
    probes: tuple[EmbeddingRecord, ...]
    policy_tag: str
    seed: int

    def template_for(self, subject_id: str) -> EmbeddingRecord:
        try:
            return self.templates[subject_id]
        except KeyError:
            raise DataError(f"no template for subject {subject_id!r}") from None

    @cached_property
    def template_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """Template subject ids and their stacked vectors, in template order."""
        subjects = np.array(list(self.templates), dtype=object)
        if len(subjects) == 0:
            return subjects, np.empty((0, 0))
        return subjects, np.stack([r.vector for r in self.templates.values()])

    def to_manifest(self) -> dict:
        return {
            "templates": [[r.subject_id, r.image_id] for r in self.templates.values()],
            "probes": [[r.subject_id, r.image_id] for r in self.probes],
            "policy_tag": self.policy_tag,
            "seed": self.seed,
        }


def partition(dataset: Dataset, policy: str = "first", seed: int = 0) -> GalleryPartition:
    """Split ``dataset`` into one template per subject and a probe set.

    ``policy="first"`` picks the lexicographically smallest ``image_id`` of each
    subject; ``policy="random"`` picks uniformly with a generator seeded by
    ``seed``. Subjects are visited in order of first appearance, and probes keep
    the dataset's record order.
    """
    if len(dataset) == 0:
        raise DataError("cannot partition an empty dataset")
    if policy not in POLICIES:
        raise DataError(f"unknown template policy {policy!r}; expected one of {POLICIES}")

    rng = np.random.default_rng(seed)
    templates: dict[str, EmbeddingRecord] = {}
    for subject, recs in dataset.by_subject().items():
        if policy == "first":
            templates[subject] = min(recs, key=lambda r: r.image_id)
        else:
            templates[subject] = recs[int(rng.integers(len(recs)))]

    chosen = {r.key for r in templates.values()}
    probes = tuple(r for r in dataset if r.key not in chosen)
    return GalleryPartition(templates, probes, policy, int(seed))


def from_manifest(dataset: Dataset, manifest: dict) -> GalleryPartition:
    """Rebuild a partition from its manifest, resolving keys against ``dataset``."""
    try:
        templates = {}
        for subject, image in manifest["templates"]:
            if subject in templates:
                raise DataError(f"manifest lists two templates for subject {subject!r}")
            templates[subject] = dataset.get(subject, image)
        probes = tuple(dataset.get(s, i) for s, i in manifest["probes"])
        return GalleryPartition(templates, probes, str(manifest["policy_tag"]),
                                int(manifest["seed"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"malformed partition manifest ({exc})") from None


def save_manifest(part: GalleryPartition, path) -> None:
    text = json.dumps(part.to_manifest(), indent=1)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_manifest(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})") from None
