"""Shared fixture builders for the test suite."""

import numpy as np

from groupsamp.graphs import SparseGraph
from groupsamp.groups import GroupPartition


def random_connected_graph(rng, n, extra_edges=None):
    """Ring backbone plus random chords, random positive weights."""
    if extra_edges is None:
        extra_edges = 2 * n
    edges = [(i, (i + 1) % n, float(rng.uniform(0.2, 2.0))) for i in range(n)]
    for _ in range(extra_edges):
        i, j = rng.integers(n, size=2)
        if i != j:
            edges.append((int(i), int(j), float(rng.uniform(0.2, 2.0))))
    return SparseGraph.from_edges(n, edges)


def random_strict_partition(rng, n, n_groups):
    labels = np.concatenate([np.arange(n_groups), rng.integers(n_groups, size=n - n_groups)])
    rng.shuffle(labels)
    return GroupPartition.from_labels(labels)


def random_overlapping_partition(rng, n, n_groups):
    """Strict partition plus extra random memberships."""
    base = random_strict_partition(rng, n, n_groups)
    groups = [set(g.tolist()) for g in base.groups]
    for _ in range(n):
        groups[rng.integers(n_groups)].add(int(rng.integers(n)))
    return GroupPartition(n, [sorted(g) for g in groups])


def random_positive_distribution(rng, n_groups):
    raw = rng.uniform(0.05, 1.0, size=n_groups)
    return raw / raw.sum()
