"""Sparse undirected graphs, their Laplacians, and graph-file loading."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class GraphFormatError(ValueError):
    """A graph file could not be parsed."""


class SparseGraph:
    """Undirected weighted graph stored as a symmetric CSR adjacency matrix.

    Off-diagonal weights are strictly positive, the diagonal is empty, and
    ``degree[i]`` is the sum of weights incident to node ``i``.
    """

    def __init__(self, adjacency, validate: bool = True):
        adjacency = sp.csr_array(adjacency)
        if adjacency.shape[0] != adjacency.shape[1]:
            raise ValueError(f"adjacency must be square, got {adjacency.shape}")
        adjacency = adjacency.copy()
        adjacency.setdiag(0.0)
        adjacency.eliminate_zeros()
        adjacency.sum_duplicates()
        if validate:
            if adjacency.nnz and adjacency.data.min() <= 0:
                raise ValueError("edge weights must be strictly positive")
            diff = adjacency - adjacency.T
            if diff.nnz and np.abs(diff.data).max() > 0:
                raise ValueError("adjacency must be symmetric")
        self.adjacency = adjacency
        self.n = adjacency.shape[0]
        self.degree = np.asarray(adjacency.sum(axis=1)).ravel()

    @classmethod
    def from_edges(cls, n: int, edges) -> "SparseGraph":
        """Build from an iterable of (i, j, w) with 0-based node indices.

        Each triple is an undirected edge; both orientations are stored.
        """
        rows, cols, data = [], [], []
        for i, j, w in edges:
            if w < 0:
                raise ValueError(f"negative weight on edge ({i}, {j})")
            if i == j or w == 0:
                continue
            rows.extend((i, j))
            cols.extend((j, i))
            data.extend((w, w))
        w = sp.coo_array((data, (rows, cols)), shape=(n, n), dtype=float)
        return cls(w.tocsr())

    @property
    def edge_count(self) -> int:
        return self.adjacency.nnz // 2

    def __repr__(self):
        return f"SparseGraph(n={self.n}, edges={self.edge_count})"


class Laplacian:
    """Graph Laplacian with an O(|E|) matrix-vector action.

    ``variant`` is ``"combinatorial"`` (degree matrix minus adjacency) or
    ``"normalized"`` (identity minus the degree-normalised adjacency).
    """

    VARIANTS = ("combinatorial", "normalized")

    def __init__(self, graph: SparseGraph, variant: str = "combinatorial"):
        if variant not in self.VARIANTS:
            raise ValueError(f"unknown Laplacian variant {variant!r}")
        w = graph.adjacency
        deg = graph.degree
        if variant == "combinatorial":
            matrix = sp.diags_array(deg) - w
        else:
            zero = np.flatnonzero(deg == 0)
            if zero.size:
                raise ValueError(
                    f"normalized Laplacian undefined: node {int(zero[0])} has degree 0"
                )
            inv_sqrt = 1.0 / np.sqrt(deg)
            scaled = w.multiply(inv_sqrt[:, None]).multiply(inv_sqrt[None, :])
            matrix = sp.eye_array(graph.n) - scaled
        self.graph = graph
        self.variant = variant
        self.n = graph.n
        self._matrix = sp.csr_array(matrix)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Return L @ x for a vector or a stack of column signals."""
        return self._matrix @ x

    def __matmul__(self, x):
        return self._matrix @ x

    def dense(self, guard: int = 5000) -> np.ndarray:
        if self.n > guard:
            raise ValueError(f"graph too large for a dense Laplacian (n={self.n} > {guard})")
        return self._matrix.toarray()


def build_laplacian(graph: SparseGraph, variant: str = "combinatorial") -> Laplacian:
    return Laplacian(graph, variant)


_HEADER_N = re.compile(r"#\s*n\s*=\s*(\d+)\s*$")


def _parse_edge_list(path: Path) -> SparseGraph:
    rows, cols, data = [], [], []
    declared_n = None
    max_index = 0
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                m = _HEADER_N.match(line)
                if m:
                    declared_n = int(m.group(1))
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise GraphFormatError(f"{path}:{lineno}: expected 'i j [w]', got {line!r}")
            try:
                i, j = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError as exc:
                raise GraphFormatError(f"{path}:{lineno}: {exc}") from None
            if i < 1 or j < 1:
                raise GraphFormatError(f"{path}:{lineno}: node indices are 1-based")
            if w < 0:
                raise ValueError(f"{path}:{lineno}: negative weight {w}")
            max_index = max(max_index, i, j)
            if i == j or w == 0.0:
                continue
            rows.append(i - 1)
            cols.append(j - 1)
            data.append(w)
    n = declared_n if declared_n is not None else max_index
    if declared_n is not None and max_index > declared_n:
        raise GraphFormatError(f"{path}: node index {max_index} exceeds declared n={declared_n}")
    directed = sp.csr_array(sp.coo_array((data, (rows, cols)), shape=(n, n), dtype=float))
    directed.sum_duplicates()
    return SparseGraph(_asymmetric_average(directed))


def _asymmetric_average(directed: sp.csr_array) -> sp.csr_array:
    # Lines are undirected edges; when both (i,j) and (j,i) were listed the
    # conflicting weights are averaged, matching W <- (W + W^T)/2.
    both = sp.csr_array((directed > 0).multiply(directed.T > 0))
    total = sp.csr_array(directed + directed.T)
    return total - sp.csr_array(total.multiply(both)) * 0.5


def _parse_matrix_market(path: Path) -> SparseGraph:
    from scipy.io import mmread

    try:
        w = sp.csr_array(mmread(path))
    except Exception as exc:
        raise GraphFormatError(f"{path}: not a readable matrix-market file ({exc})") from None
    if w.nnz and w.data.min() < 0:
        raise ValueError(f"{path}: negative weights in matrix-market file")
    w = (w + w.T) * 0.5
    return SparseGraph(w)


def load_graph(path, fmt: str | None = None) -> SparseGraph:
    """Load a graph from an edge-list or matrix-market file.

    Edge lists hold whitespace-separated ``i j w`` lines with 1-based
    indices and an optional ``# n=<int>`` header; indices are converted to
    0-based internally. Self-loops and zero weights are dropped.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    if fmt is None:
        with open(path) as fh:
            first = fh.readline()
        fmt = "matrix-market" if first.startswith("%%MatrixMarket") else "edge-list"
    if fmt == "matrix-market":
        return _parse_matrix_market(path)
    if fmt == "edge-list":
        return _parse_edge_list(path)
    raise ValueError(f"unknown graph format {fmt!r}")
