"""Point-set loading, synthetic data generation, and the in-memory Dataset type."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803  # unsigned byte, rank 3
IDX_LABELS_MAGIC = 0x00000801  # unsigned byte, rank 1


class DatasetError(ValueError):
    """Raised for malformed input files or invalid dataset contents."""


@dataclass(frozen=True)
class Dataset:
    """N points in D dimensions with optional ground-truth labels and 2-D display coordinates.

    Immutable after construction; arrays are marked read-only so instances can
    be shared across threads.
    """

    points: np.ndarray
    labels: np.ndarray | None = None
    display_xy: np.ndarray | None = None
    ids: np.ndarray = field(init=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise DatasetError(f"points must be 2-D, got shape {pts.shape}")
        n, d = pts.shape
        if n < 1 or d < 1:
            raise DatasetError(f"need at least one point and one dimension, got {n}x{d}")
        if not np.all(np.isfinite(pts)):
            bad = np.argwhere(~np.isfinite(pts))[0]
            raise DatasetError(f"non-finite value at point {bad[0]}, coordinate {bad[1]}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "ids", np.arange(n, dtype=np.int64))
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.int64)
            if lab.shape != (n,):
                raise DatasetError(f"labels must have length {n}, got shape {lab.shape}")
            object.__setattr__(self, "labels", lab)
            lab.flags.writeable = False
        if self.display_xy is not None:
            xy = np.asarray(self.display_xy, dtype=np.float64)
            if xy.shape != (n, 2):
                raise DatasetError(f"display_xy must have shape ({n}, 2), got {xy.shape}")
            if not np.all(np.isfinite(xy)):
                raise DatasetError("non-finite value in display_xy")
            object.__setattr__(self, "display_xy", xy)
            xy.flags.writeable = False
        pts.flags.writeable = False
        self.ids.flags.writeable = False

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def load_csv(path, has_header: bool = False, label_column: int | None = None) -> Dataset:
    """Load a comma-separated point set, optionally extracting an integer label column.

    For 2-D data the display coordinates default to the points themselves.
    """
    path = Path(path)
    rows: list[list[float]] = []
    labels: list[int] = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if has_header and lineno == 1:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
                if label_column is not None and not (0 <= label_column < width):
                    raise DatasetError(
                        f"label column {label_column} out of range for {width} columns"
                    )
            elif len(cells) != width:
                raise DatasetError(
                    f"{path}: row {lineno} has {len(cells)} cells, expected {width}"
                )
            vals = []
            for col, cell in enumerate(cells):
                if col == label_column:
                    try:
                        labels.append(int(float(cell)))
                    except ValueError:
                        raise DatasetError(
                            f"{path}: row {lineno}, column {col}: bad label {cell!r}"
                        ) from None
                    continue
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise DatasetError(
                        f"{path}: row {lineno}, column {col}: cannot parse {cell!r}"
                    ) from None
            rows.append(vals)
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    points = np.array(rows, dtype=np.float64)
    lab = np.array(labels, dtype=np.int64) if label_column is not None else None
    xy = points if points.shape[1] == 2 else None
    return Dataset(points=points, labels=lab, display_xy=xy)


def save_csv(dataset: Dataset, path, label_column: bool = False) -> None:
    """Write points (and optionally a trailing label column) as plain CSV."""
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(dataset.n):
            cells = [repr(float(v)) for v in dataset.points[i]]
            if label_column:
                if dataset.labels is None:
                    raise DatasetError("dataset has no labels to save")
                cells.append(str(dataset.labels[i]))
            fh.write(",".join(cells) + "\n")


def _read_idx_bytes(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def load_idx_images(path) -> Dataset:
    """Load an idx rank-3 unsigned-byte image file; pixels become coordinates in [0, 255]."""
    raw = _read_idx_bytes(path)
    if len(raw) < 16:
        raise DatasetError(f"{path}: truncated idx header ({len(raw)} bytes)")
    magic, n, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IDX_IMAGES_MAGIC:
        raise DatasetError(
            f"{path}: bad magic 0x{magic:08X}, expected 0x{IDX_IMAGES_MAGIC:08X}"
        )
    expected = 16 + n * rows * cols
    if len(raw) != expected:
        raise DatasetError(
            f"{path}: payload size mismatch, expected {expected} bytes, got {len(raw)}"
        )
    pixels = np.frombuffer(raw, dtype=np.uint8, offset=16)
    points = pixels.reshape(n, rows * cols).astype(np.float64)
    return Dataset(points=points)


def load_idx_labels(path) -> np.ndarray:
    """Load an idx rank-1 unsigned-byte label file."""
    raw = _read_idx_bytes(path)
    if len(raw) < 8:
        raise DatasetError(f"{path}: truncated idx header ({len(raw)} bytes)")
    magic, n = struct.unpack(">II", raw[:8])
    if magic != IDX_LABELS_MAGIC:
        raise DatasetError(
            f"{path}: bad magic 0x{magic:08X}, expected 0x{IDX_LABELS_MAGIC:08X}"
        )
    if n < 1:
        raise DatasetError(f"{path}: empty label file")
    expected = 8 + n
    if len(raw) != expected:
        raise DatasetError(
            f"{path}: payload size mismatch, expected {expected} bytes, got {len(raw)}"
        )
    return np.frombuffer(raw, dtype=np.uint8, offset=8).astype(np.int64)


def gen_two_spirals(
    n_per_arm: int, turns: float = 2.0, noise_sigma: float = 0.0, seed: int = 0
) -> Dataset:
    """Generate two interleaved planar spiral arms with Gaussian coordinate noise.

    Arm 0 follows (r cos phi, r sin phi) with phi sweeping ``turns * 2*pi`` and
    radius growing linearly from 1; arm 1 is the same curve rotated by pi.
    Labels carry the arm index. Deterministic for a fixed seed.
    """
    if n_per_arm < 2:
        raise DatasetError(f"n_per_arm must be >= 2, got {n_per_arm}")
    if noise_sigma < 0:
        raise DatasetError(f"noise_sigma must be >= 0, got {noise_sigma}")
    phi = np.linspace(0.0, turns * 2.0 * np.pi, n_per_arm)
    r = 1.0 + phi
    arm0 = np.column_stack([r * np.cos(phi), r * np.sin(phi)])
    arm1 = -arm0
    points = np.vstack([arm0, arm1])
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        points = points + rng.normal(0.0, noise_sigma, size=points.shape)
    labels = np.repeat(np.array([0, 1], dtype=np.int64), n_per_arm)
    return Dataset(points=points, labels=labels, display_xy=points)


def subsample(dataset: Dataset, n: int, seed: int = 0) -> Dataset:
    """Take a uniform random subsample of n points (without replacement)."""
    if not (1 <= n <= dataset.n):
        raise DatasetError(f"subsample size {n} out of range 1..{dataset.n}")
    if n == dataset.n:
        return dataset
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(dataset.n, size=n, replace=False))
    return Dataset(
        points=dataset.points[idx],
        labels=None if dataset.labels is None else dataset.labels[idx],
        display_xy=None if dataset.display_xy is None else dataset.display_xy[idx],
    )
