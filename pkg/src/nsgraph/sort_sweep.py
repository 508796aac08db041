"""Threshold-sweep adjacency-matrix sorting and raster rendering.

The sweep walks a uniform threshold grid from 1 down to 0. At each step it
drops edges whose combined score falls below the threshold, finds strongly
connected components, and reorders nodes so that every component occupies a
contiguous block, components and sub-blocks appear in decreasing-size order,
and the ordering from the previous (stricter) step survives inside each block.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .edge_similarity import EdgeScores
from .filter_components import ComponentLabeling, scc
from .knn_graph import KnnGraph

EDGE_BLACK = 0
REMOVED_GRAY = 160
BACKGROUND_WHITE = 255


class SweepError(ValueError):
    """Raised for invalid sweep parameters or malformed sweep files."""


@dataclass(frozen=True)
class SweepResult:
    """Per-threshold node permutations and component labelings, strictest first."""

    thresholds: np.ndarray  # (steps,), descending from 1 to 0
    perms: tuple[np.ndarray, ...]  # each (n,): node id at each display position
    labelings: tuple[ComponentLabeling, ...]

    @property
    def steps(self) -> int:
        return self.thresholds.size

    def step_at(self, threshold: float) -> int:
        """Index of the largest sweep threshold <= the query (clamped to the grid ends)."""
        candidates = np.flatnonzero(self.thresholds <= threshold)
        return int(candidates[0]) if candidates.size else self.steps - 1


def sweep_sort(graph: KnnGraph, scores: EdgeScores, steps: int = 50) -> SweepResult:
    """Run the sorting sweep over a uniform combined-score threshold grid."""
    if not (2 <= steps <= 1000):
        raise SweepError(f"steps must be in 2..1000, got {steps}")
    n = graph.n
    thresholds = np.linspace(1.0, 0.0, steps)
    prev_pos = np.arange(n, dtype=np.int64)  # node -> position in previous ordering
    prev_block = np.arange(n, dtype=np.int64)  # node -> previous-step component (singletons first)
    perms: list[np.ndarray] = []
    labelings: list[ComponentLabeling] = []
    for t in thresholds:
        keep = scores.sa >= t
        labeling = scc(graph, keep)
        comp = labeling.component_id
        n_blocks = int(prev_block.max()) + 1
        block_size = np.bincount(prev_block, minlength=n_blocks)
        block_min_id = np.full(n_blocks, n, dtype=np.int64)
        np.minimum.at(block_min_id, prev_block, np.arange(n, dtype=np.int64))
        block_comp = np.empty(n_blocks, dtype=np.int64)
        block_comp[prev_block] = comp
        block_order = np.lexsort((block_min_id, -block_size, block_comp))
        block_rank = np.empty(n_blocks, dtype=np.int64)
        block_rank[block_order] = np.arange(n_blocks, dtype=np.int64)
        perm = np.lexsort((prev_pos, block_rank[prev_block]))
        perm.flags.writeable = False
        perms.append(perm)
        labelings.append(labeling)
        inv = np.empty(n, dtype=np.int64)
        inv[perm] = np.arange(n, dtype=np.int64)
        prev_pos = inv
        prev_block = comp
    return SweepResult(
        thresholds=thresholds, perms=tuple(perms), labelings=tuple(labelings)
    )


def permutation_inverse(perm: np.ndarray) -> np.ndarray:
    inv = np.empty(perm.size, dtype=np.int64)
    inv[perm] = np.arange(perm.size, dtype=np.int64)
    return inv


def render_adjacency(
    perm: np.ndarray,
    graph: KnnGraph,
    keep_mask: np.ndarray,
    labeling: ComponentLabeling | None = None,
    downsample: int = 1,
    min_box_size: int = 2,
) -> tuple[np.ndarray, list[dict]]:
    """Grayscale adjacency raster under a node permutation, plus component boxes.

    Pixel (perm^-1(u), perm^-1(v)) is black for a kept edge u->v, mid-gray for
    a removed edge, white otherwise. With downsample=m the raster is pooled by
    m x m cells, darkest value winning. Boxes (one per component of at least
    min_box_size nodes, in pooled coordinates) are returned when a labeling is
    supplied.
    """
    perm = np.asarray(perm, dtype=np.int64)
    n = graph.n
    if perm.shape != (n,) or np.any(np.sort(perm) != np.arange(n)):
        raise SweepError("perm must be a permutation of 0..n-1")
    keep_mask = np.asarray(keep_mask, dtype=bool)
    if keep_mask.shape != (graph.n_edges,):
        raise SweepError("keep_mask not aligned with graph edges")
    if downsample < 1:
        raise SweepError(f"downsample must be >= 1, got {downsample}")
    inv = permutation_inverse(perm)
    side = -(-n // downsample)
    raster = np.full((side, side), BACKGROUND_WHITE, dtype=np.uint8)
    rows = inv[graph.edge_sources()] // downsample
    cols = inv[graph.edge_targets()] // downsample
    vals = np.where(keep_mask, EDGE_BLACK, REMOVED_GRAY).astype(np.uint8)
    np.minimum.at(raster, (rows, cols), vals)

    boxes: list[dict] = []
    if labeling is not None:
        n_comp = labeling.n_components
        lo = np.full(n_comp, n, dtype=np.int64)
        hi = np.full(n_comp, -1, dtype=np.int64)
        np.minimum.at(lo, labeling.component_id, inv)
        np.maximum.at(hi, labeling.component_id, inv)
        for c in range(n_comp):
            if labeling.sizes[c] < min_box_size:
                continue
            start = int(lo[c]) // downsample
            stop = int(hi[c]) // downsample
            boxes.append({"id": int(c), "start": start, "size": stop - start + 1,
                          "nodes": int(labeling.sizes[c])})
    return raster, boxes


def write_pgm(raster: np.ndarray) -> bytes:
    """Encode a 2-D uint8 array as a binary PGM (P5, maxval 255)."""
    raster = np.asarray(raster, dtype=np.uint8)
    if raster.ndim != 2:
        raise SweepError(f"raster must be 2-D, got shape {raster.shape}")
    h, w = raster.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + raster.tobytes()


def read_pgm(data: bytes) -> np.ndarray:
    """Decode a binary PGM produced by write_pgm."""
    if not data.startswith(b"P5"):
        raise SweepError("not a binary PGM")
    parts = data.split(b"\n", 3)
    if len(parts) != 4:
        raise SweepError("malformed PGM header")
    w, h = (int(tok) for tok in parts[1].split())
    if parts[2] != b"255":
        raise SweepError("unsupported PGM maxval")
    pixels = np.frombuffer(parts[3], dtype=np.uint8, count=w * h)
    return pixels.reshape(h, w)


def save_pgm(raster: np.ndarray, path) -> None:
    Path(path).write_bytes(write_pgm(raster))


def save_sweep(result: SweepResult, path) -> None:
    """Dump one "threshold n_components permutation..." record per step."""
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(result.steps):
            perm_txt = " ".join(str(p) for p in result.perms[i])
            fh.write(
                f"{result.thresholds[i]:.17g} {result.labelings[i].n_components} {perm_txt}\n"
            )


def load_sweep_records(path) -> list[tuple[float, int, np.ndarray]]:
    """Read (threshold, n_components, permutation) records written by save_sweep."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if len(parts) < 3:
                raise SweepError(f"{path}: malformed sweep record")
            records.append(
                (float(parts[0]), int(parts[1]), np.array(parts[2:], dtype=np.int64))
            )
    if not records:
        raise SweepError(f"{path}: empty sweep file")
    return records
