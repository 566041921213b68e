"""Synthetic graphs, partitions, and images for experiments and tests.

These recipes make every experiment runnable without external datasets.
Graph builders return node coordinates alongside the graph so partitions
can be formed from spatial cells, mirroring how real point-cloud graphs
are grouped.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .graphs import SparseGraph
from .groups import GroupPartition


def path_graph(n: int) -> SparseGraph:
    return SparseGraph.from_edges(n, [(i, i + 1, 1.0) for i in range(n - 1)])


def grid_graph(rows: int, cols: int) -> tuple[SparseGraph, np.ndarray]:
    """Unit-weight 4-neighbour grid; coordinates are (row, col)."""
    edges = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                edges.append((i, i + 1, 1.0))
            if r + 1 < rows:
                edges.append((i, i + cols, 1.0))
    coords = np.array([(r, c) for r in range(rows) for c in range(cols)], dtype=float)
    return SparseGraph.from_edges(rows * cols, edges), coords


def sensor_graph(
    n: int, seed: int = 0, k_nn: int = 6, sigma: float | None = None
) -> tuple[SparseGraph, np.ndarray]:
    """Random geometric graph: uniform points in the unit square, Gaussian
    weights on the k nearest neighbours, symmetrised by averaging."""
    rng = np.random.default_rng((seed, 0x7A))
    coords = rng.uniform(size=(n, 2))
    tree = cKDTree(coords)
    dists, idx = tree.query(coords, k=k_nn + 1)
    dists, idx = dists[:, 1:], idx[:, 1:]
    if sigma is None:
        sigma = float(np.percentile(dists, 50))
    sigma = max(sigma, 1e-9)
    w = np.exp(-(dists**2) / sigma**2)
    rows = np.repeat(np.arange(n), k_nn)
    directed = sp.csr_array((w.ravel(), (rows, idx.ravel())), shape=(n, n))
    return SparseGraph((directed + directed.T) * 0.5), coords


def community_graph(
    sizes,
    p_in: float = 0.3,
    w_in: float = 1.0,
    w_bridge: float = 0.05,
    bridges_per_pair: int = 1,
    seed: int = 0,
    chain: bool = True,
) -> tuple[SparseGraph, np.ndarray]:
    """Random communities with dense internal edges and weak bridges.

    Communities are laid out on a circle so that spatial-cell partitions
    separate them. ``chain=True`` bridges consecutive communities only,
    otherwise every pair is bridged.
    """
    sizes = list(sizes)
    n = sum(sizes)
    rng = np.random.default_rng((seed, 0x8B))
    offsets = np.concatenate(([0], np.cumsum(sizes)))
    edges = []
    for c, size in enumerate(sizes):
        lo = offsets[c]
        for i in range(size):
            for j in range(i + 1, size):
                if rng.uniform() < p_in:
                    edges.append((lo + i, lo + j, w_in * rng.uniform(0.5, 1.5)))
        # keep each community connected regardless of the random draw
        for i in range(size - 1):
            edges.append((lo + i, lo + i + 1, w_in))
    pairs = (
        [(c, c + 1) for c in range(len(sizes) - 1)]
        if chain
        else [(a, b) for a in range(len(sizes)) for b in range(a + 1, len(sizes))]
    )
    for a, b in pairs:
        for _ in range(bridges_per_pair):
            i = offsets[a] + rng.integers(sizes[a])
            j = offsets[b] + rng.integers(sizes[b])
            edges.append((int(i), int(j), w_bridge))
    centers = np.stack(
        [
            np.cos(2 * np.pi * np.arange(len(sizes)) / len(sizes)),
            np.sin(2 * np.pi * np.arange(len(sizes)) / len(sizes)),
        ],
        axis=1,
    )
    coords = np.concatenate(
        [centers[c] + 0.25 * rng.standard_normal((size, 2)) / np.sqrt(size) * np.sqrt(30)
         for c, size in enumerate(sizes)]
    )
    graph = SparseGraph.from_edges(n, edges)
    return graph, coords


def grid_cell_partition(coords: np.ndarray, cells_x: int, cells_y: int) -> GroupPartition:
    """Group nodes by an axis-aligned uniform grid over the bounding box of
    their coordinates; empty cells are dropped."""
    coords = np.asarray(coords, dtype=float)
    mins = coords.min(axis=0)
    spans = np.maximum(coords.max(axis=0) - mins, 1e-12)
    ix = np.minimum((cells_x * (coords[:, 0] - mins[0]) / spans[0]).astype(int), cells_x - 1)
    iy = np.minimum((cells_y * (coords[:, 1] - mins[1]) / spans[1]).astype(int), cells_y - 1)
    cell = ix * cells_y + iy
    _, labels = np.unique(cell, return_inverse=True)
    return GroupPartition.from_labels(labels)


def random_partition(n: int, n_groups: int, seed: int = 0) -> GroupPartition:
    """Strict partition with every group nonempty and otherwise random sizes."""
    if n_groups > n:
        raise ValueError("more groups than nodes")
    rng = np.random.default_rng((seed, 0x9C))
    labels = np.concatenate([np.arange(n_groups), rng.integers(n_groups, size=n - n_groups)])
    rng.shuffle(labels)
    return GroupPartition.from_labels(labels)


def two_region_image(
    height: int = 64, width: int = 96, seed: int = 0, noise: float = 0.01
) -> tuple[np.ndarray, np.ndarray]:
    """Synthetic two-region RGB image plus its binary ground-truth mask.

    A bright irregular object (two overlapping ellipses) over a dark,
    homogeneous background. The contrast is strong enough that the pixel
    similarity graph nearly disconnects at the object boundary, which is
    what makes sampling-distribution differences visible at this scale.
    """
    rng = np.random.default_rng((seed, 0xAD))
    rr, cc = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    cy, cx = height * 0.42, width * 0.40
    ry, rx = height * 0.26, width * 0.20
    ellipse = ((rr - cy) / ry) ** 2 + ((cc - cx) / rx) ** 2 <= 1.0
    lobe = ((rr - height * 0.60) / (height * 0.18)) ** 2 + (
        (cc - width * 0.58) / (width * 0.16)
    ) ** 2 <= 1.0
    mask = ellipse | lobe
    img = np.empty((height, width, 3))
    img[..., 0] = np.where(mask, 0.95, 0.05)
    img[..., 1] = np.where(mask, 0.85, 0.10)
    img[..., 2] = np.where(mask, 0.75, 0.15)
    img += noise * rng.standard_normal(img.shape)
    return np.clip(img, 0.0, 1.0), mask.astype(float)
