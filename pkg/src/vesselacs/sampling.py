"""Stratified, seeded selection of labeled training pixels."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .features import (CSV_HEADER, N_FEATURES, WindowSpec, feature_matrix)
from .imaging import DatasetEntry

VESSEL = 1
NONVESSEL = 0


@dataclass(frozen=True)
class SamplePlan:
    n_vessel_per_image: int = 1000
    n_nonvessel_per_image: int = 7000
    seed: int = 0

    def __post_init__(self):
        if self.n_vessel_per_image <= 0 or self.n_nonvessel_per_image <= 0:
            raise DataError("sample counts must be positive")


@dataclass
class SampleSet:
    """Labeled feature rows; y is 1 for vessel, 0 for non-vessel."""

    image_ids: list[str]
    coords: np.ndarray  # (N, 2) int, (x, y)
    X: np.ndarray  # (N, 14) float64
    y: np.ndarray  # (N,) int
    shortfalls: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.X.shape[0]

    def to_csv(self, path, header_lines=()) -> None:
        with open(path, "w") as f:
            for line in header_lines:
                f.write(f"# {line}\n")
            f.write(CSV_HEADER + ",label\n")
            for image_id, (x, y), row, label in zip(
                    self.image_ids, self.coords, self.X, self.y):
                vals = ",".join(repr(float(v)) for v in row)
                name = "vessel" if label == VESSEL else "nonvessel"
                f.write(f"{image_id},{x},{y},{vals},{name}\n")

    @classmethod
    def from_csv(cls, path) -> "SampleSet":
        image_ids, coords, X, y = [], [], [], []
        with open(path) as f:
            for line in f:
                line = line.strip()
                if not line or line.startswith("#") or line.startswith("image_id"):
                    continue
                parts = line.split(",")
                image_ids.append(parts[0])
                coords.append((int(parts[1]), int(parts[2])))
                X.append([float(v) for v in parts[3:3 + N_FEATURES]])
                y.append(VESSEL if parts[3 + N_FEATURES] == "vessel"
                         else NONVESSEL)
        return cls(image_ids=image_ids,
                   coords=np.array(coords, dtype=int).reshape(-1, 2),
                   X=np.array(X, dtype=np.float64).reshape(-1, N_FEATURES),
                   y=np.array(y, dtype=int))


def _image_rng(seed: int, image_id: str) -> np.random.Generator:
    # Substream derived from (seed, image_id) so per-image sampling is
    # order-independent across workers.
    entropy = [seed] + list(image_id.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(entropy))


def stratified_sample(entry: DatasetEntry, plan: SamplePlan,
                      w: WindowSpec = WindowSpec()) -> SampleSet:
    """Sample vessel / non-vessel pixels without replacement from one entry.

    When a stratum holds fewer pixels than requested, all of it is taken
    and the shortfall recorded in SampleSet.shortfalls.
    """
    if entry.truth is None:
        raise DataError(f"{entry.image_id}: truth mask required for sampling")
    if not entry.fov.any():
        raise DataError(f"{entry.image_id}: empty FOV")
    rng = _image_rng(plan.seed, entry.image_id)
    strata = [(VESSEL, entry.truth & entry.fov, plan.n_vessel_per_image),
              (NONVESSEL, ~entry.truth & entry.fov,
               plan.n_nonvessel_per_image)]
    pixels: list[tuple[int, int]] = []
    labels: list[int] = []
    shortfalls = {}
    for label, mask, wanted in strata:
        ys, xs = np.nonzero(mask)
        n_avail = len(ys)
        take = min(wanted, n_avail)
        if take < wanted:
            key = "vessel" if label == VESSEL else "nonvessel"
            shortfalls[key] = wanted - take
        idx = rng.choice(n_avail, size=take, replace=False) if n_avail else []
        for i in idx:
            pixels.append((int(xs[i]), int(ys[i])))
            labels.append(label)
    fm = feature_matrix(entry, pixels, w)
    sf = {entry.image_id: shortfalls} if shortfalls else {}
    return SampleSet(image_ids=fm.image_ids, coords=fm.coords, X=fm.values,
                     y=np.array(labels, dtype=int), shortfalls=sf)


def combine(sample_sets) -> SampleSet:
    """Concatenate per-image sample sets."""
    sample_sets = list(sample_sets)
    if not sample_sets:
        raise DataError("no sample sets to combine")
    shortfalls = {}
    for s in sample_sets:
        shortfalls.update(s.shortfalls)
    return SampleSet(
        image_ids=[i for s in sample_sets for i in s.image_ids],
        coords=np.concatenate([s.coords for s in sample_sets]),
        X=np.concatenate([s.X for s in sample_sets]),
        y=np.concatenate([s.y for s in sample_sets]),
        shortfalls=shortfalls)
