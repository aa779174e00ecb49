"""Raster ingestion, green-channel extraction, and synthetic retina generation.

Images are numpy arrays throughout: color images are (H, W, 3) uint8, gray
images (H, W) float64, masks (H, W) bool. Masks are binarized at 128 on load.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DataError, DimensionMismatchError

MASK_THRESHOLD = 128
BACKGROUND_LEVEL = 150.0
VESSEL_DROP = 60.0
NOISE_SIGMA = 8.0


@dataclass(frozen=True)
class DatasetEntry:
    """One retinal image with its FOV mask and optional vessel ground truth."""

    image_id: str
    image: np.ndarray  # (H, W, 3) uint8
    fov: np.ndarray  # (H, W) bool
    truth: np.ndarray | None = None  # (H, W) bool

    def __post_init__(self):
        h, w = self.image.shape[:2]
        if self.image.ndim != 3 or self.image.shape[2] != 3:
            raise DataError(f"{self.image_id}: color image must be (H, W, 3)")
        if h == 0 or w == 0:
            raise DataError(f"{self.image_id}: empty raster")
        if self.fov.shape != (h, w):
            raise DimensionMismatchError(
                f"{self.image_id}: fov {self.fov.shape} vs image {(h, w)}")
        if self.truth is not None and self.truth.shape != (h, w):
            raise DimensionMismatchError(
                f"{self.image_id}: truth {self.truth.shape} vs image {(h, w)}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.image.shape[:2]


@dataclass(frozen=True)
class FovStats:
    vessel: int
    nonvessel: int
    ratio: float | None  # nonvessel / vessel; None when vessel == 0


def _read_raster(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    try:
        with Image.open(path) as im:
            return np.asarray(im)
    except Exception as exc:
        raise DataError(f"cannot decode raster {path}: {exc}") from exc


def _as_mask(arr: np.ndarray, path) -> np.ndarray:
    if arr.ndim == 3:
        arr = arr[..., 0]
    if arr.dtype == bool:
        return arr
    return arr.astype(np.float64) >= MASK_THRESHOLD


def _as_color(arr: np.ndarray, path) -> np.ndarray:
    if arr.ndim == 2:
        arr = np.stack([arr] * 3, axis=-1)
    if arr.ndim != 3 or arr.shape[2] < 3:
        raise DataError(f"{path}: expected a color raster, got shape {arr.shape}")
    return arr[..., :3].astype(np.uint8)


def load_entry(image_path, fov_path, truth_path=None, image_id=None) -> DatasetEntry:
    """Load an image + FOV mask (+ optional truth mask) into a DatasetEntry.

    Masks are binarized at 128. All rasters must share dimensions.
    """
    image = _as_color(_read_raster(image_path), image_path)
    fov = _as_mask(_read_raster(fov_path), fov_path)
    truth = None
    if truth_path is not None:
        truth = _as_mask(_read_raster(truth_path), truth_path)
    if image_id is None:
        image_id = Path(image_path).stem
    return DatasetEntry(image_id=image_id, image=image, fov=fov, truth=truth)


def load_dataset(root, ids=None) -> list[DatasetEntry]:
    """Load entries following the <root>/{images,fov,truth}/<id>.png layout.

    `ids` defaults to the manifest file <root>/manifest.txt if present, else
    every stem found under images/. Truth masks are optional per entry.
    """
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset root not found: {root}")
    if ids is None:
        manifest = root / "manifest.txt"
        if manifest.exists():
            ids = [line.strip() for line in manifest.read_text().splitlines()
                   if line.strip()]
        else:
            ids = sorted(p.stem for p in (root / "images").glob("*")
                         if p.suffix.lower() in (".png", ".ppm", ".pgm"))
    if not ids:
        raise DataError(f"no images found under {root}")
    entries = []
    for image_id in ids:
        image_path = _find_raster(root / "images", image_id)
        fov_path = _find_raster(root / "fov", image_id)
        truth_path = None
        truth_dir = root / "truth"
        if truth_dir.is_dir():
            try:
                truth_path = _find_raster(truth_dir, image_id)
            except DataError:
                truth_path = None
        entries.append(load_entry(image_path, fov_path, truth_path, image_id))
    return entries


def _find_raster(directory: Path, image_id: str) -> Path:
    for ext in (".png", ".ppm", ".pgm"):
        p = directory / f"{image_id}{ext}"
        if p.exists():
            return p
    raise DataError(f"no raster for id '{image_id}' under {directory}")


def save_entry(entry: DatasetEntry, root) -> None:
    """Write an entry back out in the dataset directory layout."""
    root = Path(root)
    for sub in ("images", "fov", "truth"):
        os.makedirs(root / sub, exist_ok=True)
    Image.fromarray(entry.image).save(root / "images" / f"{entry.image_id}.png")
    Image.fromarray((entry.fov * np.uint8(255))).save(
        root / "fov" / f"{entry.image_id}.png")
    if entry.truth is not None:
        Image.fromarray((entry.truth * np.uint8(255))).save(
            root / "truth" / f"{entry.image_id}.png")


def green_channel(image: np.ndarray) -> np.ndarray:
    """Extract the green channel as a float gray image."""
    if image.ndim != 3 or image.shape[2] < 3:
        raise DataError(f"expected (H, W, 3) color image, got {image.shape}")
    return image[..., 1].astype(np.float64)


def fov_statistics(entries) -> FovStats:
    """Count vessel / non-vessel pixels inside the FOV across entries."""
    vessel = 0
    nonvessel = 0
    for entry in entries:
        if entry.truth is None:
            raise DataError(f"{entry.image_id}: truth mask required")
        inside = entry.fov
        v = int(np.count_nonzero(entry.truth & inside))
        vessel += v
        nonvessel += int(np.count_nonzero(inside)) - v
    ratio = (nonvessel / vessel) if vessel > 0 else None
    return FovStats(vessel=vessel, nonvessel=nonvessel, ratio=ratio)


def _stamp_stroke(mask: np.ndarray, p0, p1, p2, radius: float) -> None:
    """Rasterize a quadratic Bezier stroke of the given half-width onto mask."""
    h, w = mask.shape
    approx_len = np.linalg.norm(p1 - p0) + np.linalg.norm(p2 - p1)
    n = max(16, int(approx_len * 2))
    t = np.linspace(0.0, 1.0, n)[:, None]
    pts = (1 - t) ** 2 * p0 + 2 * (1 - t) * t * p1 + t ** 2 * p2
    r = max(1.0, radius)
    ri = int(np.ceil(r))
    yy, xx = np.mgrid[-ri:ri + 1, -ri:ri + 1]
    disk = (xx ** 2 + yy ** 2) <= r ** 2
    for py, px in pts:
        cy, cx = int(round(py)), int(round(px))
        y0, y1b = max(0, cy - ri), min(h, cy + ri + 1)
        x0, x1b = max(0, cx - ri), min(w, cx + ri + 1)
        if y0 >= y1b or x0 >= x1b:
            continue
        mask[y0:y1b, x0:x1b] |= disk[y0 - cy + ri:y1b - cy + ri,
                                     x0 - cx + ri:x1b - cx + ri]


def synth_retina(seed: int, width: int, height: int, n_vessels: int) -> DatasetEntry:
    """Generate a deterministic synthetic retina entry.

    Dark Bezier strokes on a noisy bright background inside a circular FOV;
    the truth mask marks stroke pixels. Stroke widths are sized so the
    vessel : non-vessel ratio lands near 1:7 when n_vessels > 0.
    """
    if width < 64 or height < 64:
        raise DataError("synthetic retina requires width, height >= 64")
    rng = np.random.default_rng(
        np.random.SeedSequence([seed, width, height, n_vessels]))
    cy, cx = (height - 1) / 2.0, (width - 1) / 2.0
    radius = 0.46 * min(width, height)
    yy, xx = np.mgrid[0:height, 0:width]
    fov = ((yy - cy) ** 2 + (xx - cx) ** 2) <= radius ** 2
    fov_count = int(np.count_nonzero(fov))

    strokes = np.zeros((height, width), dtype=bool)

    def random_stroke(half_width=None):
        angles = rng.uniform(0, 2 * np.pi, size=2)
        rr = rng.uniform(0.75, 0.98, size=2) * radius
        p0 = np.array([cy + rr[0] * np.sin(angles[0]),
                       cx + rr[0] * np.cos(angles[0])])
        p2 = np.array([cy + rr[1] * np.sin(angles[1]),
                       cx + rr[1] * np.cos(angles[1])])
        p1 = np.array([cy, cx]) + rng.uniform(-0.4, 0.4, size=2) * radius
        if half_width is None:
            chord = max(np.linalg.norm(p2 - p0), 0.5 * radius)
            budget = fov_count / 8.0 / max(n_vessels, 1)
            half_width = np.clip(budget / chord / 2.0, 1.0, 3.0)
        _stamp_stroke(strokes, p0, p1, p2, half_width)

    for _ in range(n_vessels):
        random_stroke()

    # Steer toward a 1:7 vessel ratio by topping up with thin strokes.
    if n_vessels > 0:
        for _ in range(40):
            vessel = int(np.count_nonzero(strokes & fov))
            if vessel == 0 or (fov_count - vessel) / vessel <= 8.4:
                break
            random_stroke(half_width=1.0)

    truth = strokes & fov
    gray = np.full((height, width), BACKGROUND_LEVEL)
    gray += rng.normal(0.0, NOISE_SIGMA, size=gray.shape)
    gray[truth] -= VESSEL_DROP
    gray = np.clip(np.rint(gray), 0, 255).astype(np.uint8)
    image = np.stack([(gray * 0.6).astype(np.uint8), gray,
                      (gray * 0.4).astype(np.uint8)], axis=-1)
    image[~fov] = 0
    return DatasetEntry(image_id=f"synth-{seed}", image=image, fov=fov,
                        truth=truth)
