import struct

import numpy as np
import pytest

from nsgraph import Dataset, KnnGraph, build_knn


def write_idx_images(path, images: np.ndarray) -> None:
    """Test-side idx writer: images is (n, rows, cols) uint8."""
    n, rows, cols = images.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        fh.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", 0x00000801, len(labels)))
        fh.write(np.asarray(labels, dtype=np.uint8).tobytes())


def random_dataset(rng: np.random.Generator, n: int, d: int) -> Dataset:
    return Dataset(points=rng.standard_normal((n, d)))


def random_knn_graph(rng: np.random.Generator, n: int, k: int, d: int = 3) -> KnnGraph:
    return build_knn(random_dataset(rng, n, d), k)


def synthetic_graph(neighbors: np.ndarray, dists: np.ndarray | None = None) -> KnnGraph:
    """KnnGraph straight from a neighbor table (dists default to 1, 2, ... per row)."""
    neighbors = np.asarray(neighbors, dtype=np.int64)
    if dists is None:
        dists = np.tile(
            np.arange(1, neighbors.shape[1] + 1, dtype=np.float64),
            (neighbors.shape[0], 1),
        )
    return KnnGraph(neighbors=neighbors, dists=np.asarray(dists, dtype=np.float64),
                    metric_tag="synthetic")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
