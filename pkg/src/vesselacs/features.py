"""Per-pixel feature vector: green level, windowed gray statistics, and
eight moment invariants.

Windows are clipped at image borders. Moment invariants are computed on
mass-normalized windows so they are exactly invariant to uniform intensity
scaling, and reported log-compressed to tame their dynamic range.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import DataError

LOG_EPS = 1e-30
N_FEATURES = 14


class FeatureId(IntEnum):
    GREEN = 0
    F1 = 1
    F2 = 2
    F3 = 3
    F4 = 4
    F5 = 5
    HU1 = 6
    HU2 = 7
    HU3 = 8
    HU4 = 9
    HU5 = 10
    HU6 = 11
    HU7 = 12
    HU8 = 13


FEATURE_NAMES = ["green", "f1", "f2", "f3", "f4", "f5",
                 "hu1", "hu2", "hu3", "hu4", "hu5", "hu6", "hu7", "hu8"]

CSV_HEADER = "image_id,x,y," + ",".join(FEATURE_NAMES)


@dataclass(frozen=True)
class WindowSpec:
    gray_window: int = 9
    hu_window: int = 17

    def __post_init__(self):
        for name in ("gray_window", "hu_window"):
            v = getattr(self, name)
            if v < 3 or v % 2 == 0:
                raise DataError(f"{name} must be odd and >= 3, got {v}")


def _window(img: np.ndarray, x: int, y: int, side: int) -> np.ndarray:
    r = side // 2
    h, w = img.shape
    return img[max(0, y - r):min(h, y + r + 1),
               max(0, x - r):min(w, x + r + 1)]


def gray_level_features(img: np.ndarray, x: int, y: int,
                        w: WindowSpec = WindowSpec()) -> np.ndarray:
    """f1..f5 for the pixel (x, y): center-vs-window min/max/mean/std plus
    the raw intensity."""
    s = _window(img, x, y, w.gray_window)
    center = img[y, x]
    return np.array([center - s.min(), s.max() - center,
                     center - s.mean(), s.std(), center])


def hu_raw_invariants(window: np.ndarray) -> tuple[np.ndarray, bool]:
    """Eight raw moment invariants of a gray window.

    Returns (invariants, degenerate). A zero-mass window is degenerate and
    yields all zeros. The window is normalized to unit mass first, which
    makes every invariant exactly invariant to uniform intensity scaling.
    """
    window = np.asarray(window, dtype=np.float64)
    m00 = window.sum()
    if m00 == 0.0:
        return np.zeros(8), True
    w = window / m00
    hgt, wid = w.shape
    ys = np.arange(hgt, dtype=np.float64)
    xs = np.arange(wid, dtype=np.float64)
    col = w.sum(axis=0)
    row = w.sum(axis=1)
    xbar = xs @ col
    ybar = ys @ row
    dx = xs - xbar
    dy = ys - ybar

    def mu(p, q):
        return (dy ** q) @ w @ (dx ** p)

    mu00 = 1.0
    norm = lambda p, q: mu(p, q) / mu00 ** (1 + (p + q) / 2.0)
    n20, n02, n11 = norm(2, 0), norm(0, 2), norm(1, 1)
    n30, n03 = norm(3, 0), norm(0, 3)
    n21, n12 = norm(2, 1), norm(1, 2)

    a = n30 + n12
    b = n21 + n03
    c = n30 - 3 * n12
    d = 3 * n21 - n03
    hu = np.empty(8)
    hu[0] = n20 + n02
    hu[1] = (n20 - n02) ** 2 + 4 * n11 ** 2
    hu[2] = c ** 2 + d ** 2
    hu[3] = a ** 2 + b ** 2
    hu[4] = c * a * (a ** 2 - 3 * b ** 2) + d * b * (3 * a ** 2 - b ** 2)
    hu[5] = (n20 - n02) * (a ** 2 - b ** 2) + 4 * n11 * a * b
    hu[6] = d * a * (a ** 2 - 3 * b ** 2) - c * b * (3 * a ** 2 - b ** 2)
    hu[7] = n11 * (a ** 2 - b ** 2) - (n20 - n02) * a * b
    return hu, False


def log_compress(h: np.ndarray) -> np.ndarray:
    """Map a raw invariant to -sign(h) * log10(|h| + eps)."""
    h = np.asarray(h, dtype=np.float64)
    return -np.sign(h) * np.log10(np.abs(h) + LOG_EPS)


def hu_moment_features(img: np.ndarray, x: int, y: int,
                       w: WindowSpec = WindowSpec()) -> np.ndarray:
    """Log-compressed Hu1..Hu8 for the window centered at (x, y).

    Degenerate (zero-mass) windows report all zeros.
    """
    raw, degenerate = hu_raw_invariants(_window(img, x, y, w.hu_window))
    if degenerate:
        return np.zeros(8)
    return log_compress(raw)


def feature_vector(img: np.ndarray, x: int, y: int,
                   w: WindowSpec = WindowSpec()) -> np.ndarray:
    """The full 14-feature vector for one pixel."""
    out = np.empty(N_FEATURES)
    out[0] = img[y, x]
    out[1:6] = gray_level_features(img, x, y, w)
    out[6:] = hu_moment_features(img, x, y, w)
    return out


@dataclass
class FeatureMatrix:
    """Feature rows keyed by (image_id, x, y)."""

    image_ids: list[str]
    coords: np.ndarray  # (N, 2) int, columns (x, y)
    values: np.ndarray  # (N, 14) float64

    def __len__(self) -> int:
        return self.values.shape[0]

    def stats(self):
        """Per-feature (mean, std, min, max); None for an empty matrix."""
        if len(self) == 0:
            return None
        v = self.values
        return v.mean(axis=0), v.std(axis=0), v.min(axis=0), v.max(axis=0)

    def to_csv(self, path, header_lines=()) -> None:
        with open(path, "w") as f:
            for line in header_lines:
                f.write(f"# {line}\n")
            f.write(CSV_HEADER + "\n")
            for image_id, (x, y), row in zip(self.image_ids, self.coords,
                                             self.values):
                vals = ",".join(repr(float(v)) for v in row)
                f.write(f"{image_id},{x},{y},{vals}\n")

    @classmethod
    def from_csv(cls, path) -> "FeatureMatrix":
        image_ids, coords, values = [], [], []
        with open(path) as f:
            for line in f:
                line = line.strip()
                if not line or line.startswith("#") or line.startswith("image_id"):
                    continue
                parts = line.split(",")
                image_ids.append(parts[0])
                coords.append((int(parts[1]), int(parts[2])))
                values.append([float(v) for v in parts[3:3 + N_FEATURES]])
        return cls(image_ids=image_ids,
                   coords=np.array(coords, dtype=int).reshape(-1, 2),
                   values=np.array(values, dtype=np.float64).reshape(
                       -1, N_FEATURES))

    def write_stats_json(self, path) -> None:
        st = self.stats()
        doc = {"n_rows": len(self), "features": FEATURE_NAMES}
        if st is None:
            doc["stats"] = None
        else:
            mean, std, lo, hi = st
            doc["stats"] = {
                name: {"mean": mean[i], "std": std[i],
                       "min": lo[i], "max": hi[i]}
                for i, name in enumerate(FEATURE_NAMES)}
        Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def feature_matrix(entry, pixels, w: WindowSpec = WindowSpec()) -> FeatureMatrix:
    """Compute feature rows for the given (x, y) pixels of a dataset entry."""
    from .imaging import green_channel

    gray = green_channel(entry.image)
    values = np.empty((len(pixels), N_FEATURES))
    coords = np.empty((len(pixels), 2), dtype=int)
    for i, (x, y) in enumerate(pixels):
        if not entry.fov[y, x]:
            raise DataError(
                f"{entry.image_id}: pixel ({x}, {y}) outside the FOV")
        coords[i] = (x, y)
        values[i] = feature_vector(gray, x, y, w)
    return FeatureMatrix(image_ids=[entry.image_id] * len(pixels),
                         coords=coords, values=values)


def fov_pixels(fov: np.ndarray) -> list[tuple[int, int]]:
    """All (x, y) pixels inside a FOV mask, row-major order."""
    ys, xs = np.nonzero(fov)
    return list(zip(xs.tolist(), ys.tolist()))


def normalize(m: FeatureMatrix, ref_mean: np.ndarray,
              ref_std: np.ndarray) -> FeatureMatrix:
    """Z-score the matrix against reference statistics.

    Features with zero reference std pass through as 0.
    """
    std = np.where(ref_std > 0, ref_std, 1.0)
    values = (m.values - ref_mean) / std
    values[:, ref_std == 0] = 0.0
    return FeatureMatrix(image_ids=list(m.image_ids), coords=m.coords.copy(),
                         values=values)
