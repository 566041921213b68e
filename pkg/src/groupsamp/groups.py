"""Node groups and the restriction, averaging, and sampling operators.

A partition assigns every node to one or more of N groups. Restriction
selects the entries of a signal on one group (scaled by the inverse square
root of the node multiplicity when groups overlap), averaging maps a signal
to per-group scaled sums, and a draw of s group indices induces the stacked
sampling operators used for measurement and for the reduced-dimension
reconstruction.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class OverlapError(ValueError):
    """An operation that requires disjoint groups met an overlapping partition."""


class GroupPartition:
    """Assignment of ``n`` nodes to ``N`` groups, possibly overlapping.

    ``groups[g]`` is the sorted array of member nodes of group ``g`` and
    ``beta[i]`` counts how many groups node ``i`` belongs to. Strict
    partitions (``beta == 1`` everywhere) additionally expose a per-node
    ``labels`` array.
    """

    def __init__(self, n: int, groups):
        members = []
        beta = np.zeros(n, dtype=int)
        for g, nodes in enumerate(groups):
            nodes = np.unique(np.asarray(nodes, dtype=int))
            if nodes.size == 0:
                raise ValueError(f"group {g} is empty")
            if nodes.min() < 0 or nodes.max() >= n:
                raise ValueError(f"group {g} has node indices outside [0, {n})")
            beta[nodes] += 1
            members.append(nodes)
        if not members:
            raise ValueError("a partition needs at least one group")
        uncovered = np.flatnonzero(beta == 0)
        if uncovered.size:
            raise ValueError(f"node {int(uncovered[0])} belongs to no group")
        self.n = n
        self.groups = tuple(members)
        self.beta = beta
        self.sizes = np.array([g.size for g in members])
        self.is_strict = bool((beta == 1).all())
        if self.is_strict:
            labels = np.empty(n, dtype=int)
            for g, nodes in enumerate(members):
                labels[nodes] = g
            self.labels = labels
            self._scales = None
        else:
            self.labels = None
            self._scales = tuple(1.0 / np.sqrt(beta[g]) for g in members)

    @property
    def N(self) -> int:
        return len(self.groups)

    @classmethod
    def from_labels(cls, labels) -> "GroupPartition":
        """Strict partition from a per-node 0-based group-id array."""
        labels = np.asarray(labels, dtype=int)
        n_groups = labels.max() + 1
        order = np.argsort(labels, kind="stable")
        splits = np.searchsorted(labels[order], np.arange(1, n_groups))
        return cls(labels.size, np.split(order, splits))

    @classmethod
    def from_file(cls, path, n: int | None = None) -> "GroupPartition":
        """Read a partition file: line i holds the 1-based group id(s) of node i,
        comma-separated when a node belongs to several groups."""
        path = Path(path)
        per_node = []
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line:
                    continue
                try:
                    ids = [int(tok) for tok in line.split(",")]
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: expected comma-separated group ids") from None
                if any(g < 1 for g in ids):
                    raise ValueError(f"{path}:{lineno}: group ids are 1-based")
                per_node.append(ids)
        if n is not None and len(per_node) != n:
            raise ValueError(f"{path}: {len(per_node)} lines for n={n} nodes")
        n_groups = max(max(ids) for ids in per_node)
        groups = [[] for _ in range(n_groups)]
        for node, ids in enumerate(per_node):
            for g in ids:
                groups[g - 1].append(node)
        return cls(len(per_node), groups)

    def to_labels(self) -> np.ndarray:
        if not self.is_strict:
            raise OverlapError("per-node labels only exist for strict partitions")
        return self.labels.copy()

    def __repr__(self):
        kind = "strict" if self.is_strict else "overlapping"
        return f"GroupPartition(n={self.n}, N={self.N}, {kind})"


def restrict(x: np.ndarray, part: GroupPartition, g: int) -> np.ndarray:
    """Entries of ``x`` on group ``g`` in ascending node order, scaled by
    ``beta**-0.5`` per node when the partition overlaps."""
    if not 0 <= g < part.N:
        raise IndexError(f"group index {g} outside [0, {part.N})")
    values = x[part.groups[g]]
    if part._scales is not None:
        values = values * part._scales[g]
    return values


def extend(values: np.ndarray, part: GroupPartition, g: int) -> np.ndarray:
    """Adjoint of :func:`restrict`: scatter group values back to a full signal."""
    if not 0 <= g < part.N:
        raise IndexError(f"group index {g} outside [0, {part.N})")
    out = np.zeros(part.n, dtype=float)
    if part._scales is not None:
        out[part.groups[g]] = values * part._scales[g]
    else:
        out[part.groups[g]] = values
    return out


def group_average(x: np.ndarray, part: GroupPartition) -> np.ndarray:
    """Per-group sums scaled by ``size**-0.5`` (the N-dimensional average map).

    Only defined for strict partitions, where the map composed with its
    adjoint is the identity on the group domain.
    """
    if not part.is_strict:
        raise OverlapError("group averaging requires non-overlapping groups")
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return np.bincount(part.labels, weights=x, minlength=part.N) / np.sqrt(part.sizes)
    sums = np.stack(
        [np.bincount(part.labels, weights=col, minlength=part.N) for col in x.T], axis=1
    )
    return sums / np.sqrt(part.sizes)[:, None]


def group_lift(averaged: np.ndarray, part: GroupPartition) -> np.ndarray:
    """Adjoint of :func:`group_average`: replicate each scaled mean over its group."""
    if not part.is_strict:
        raise OverlapError("group averaging requires non-overlapping groups")
    averaged = np.asarray(averaged, dtype=float)
    scale = np.sqrt(part.sizes) if averaged.ndim == 1 else np.sqrt(part.sizes)[:, None]
    return (averaged / scale)[part.labels]


def piecewise_deviation(x: np.ndarray, part: GroupPartition) -> float:
    """Relative distance of ``x`` from its group-wise averages.

    Returns ``norm(lift(average(x)) - x) / norm(x)``, the epsilon of the
    nearly-piecewise-constant signal model.
    """
    x = np.asarray(x, dtype=float)
    nrm = np.linalg.norm(x)
    if nrm == 0:
        raise ValueError("piecewise deviation is undefined for the zero signal")
    return float(np.linalg.norm(group_lift(group_average(x, part), part) - x) / nrm)


@dataclass(frozen=True)
class SampleDraw:
    """An ordered multiset of ``s`` group indices drawn i.i.d. with replacement.

    ``probs`` is the distribution used for the draw and ``m`` the total
    number of nodes in the drawn groups (duplicates counted).
    """

    omega: np.ndarray
    probs: np.ndarray
    m: int

    @property
    def s(self) -> int:
        return int(self.omega.size)


class SampleOperators:
    """Matrix-free actions of the operators induced by a draw.

    The measurement operator stacks the restrictions of the drawn groups in
    draw order (``m`` rows); the probability reweighting multiplies each
    block by ``p**-0.5``; the reduced-side operators act on per-group means:
    block averaging of a measurement vector, selection of drawn means, and
    the diagonal reweighting in dimension ``s``.
    """

    def __init__(self, part: GroupPartition, probs: np.ndarray, draw: SampleDraw):
        probs = np.asarray(probs, dtype=float)
        if probs.shape != (part.N,):
            raise ValueError(f"distribution has {probs.size} entries for N={part.N}")
        if (probs <= 0).any():
            raise ValueError("all group probabilities must be strictly positive")
        omega = np.asarray(draw.omega, dtype=int)
        if omega.size == 0:
            raise ValueError("empty draw")
        if omega.min() < 0 or omega.max() >= part.N:
            raise ValueError("draw contains group indices outside the partition")
        self.part = part
        self.probs = probs
        self.omega = omega
        self.n = part.n
        self.N = part.N
        self.s = omega.size
        self.sizes_drawn = part.sizes[omega]
        self.m = int(self.sizes_drawn.sum())
        self.rows = np.concatenate([part.groups[g] for g in omega])
        self.block_starts = np.concatenate(([0], np.cumsum(self.sizes_drawn)))[:-1]
        if part._scales is not None:
            self.row_scale = np.concatenate([part._scales[g] for g in omega])
        else:
            self.row_scale = None
        self._p_rows = np.repeat(probs[omega], self.sizes_drawn)
        self._p_rows_isqrt = 1.0 / np.sqrt(self._p_rows)
        self._sizes_isqrt = 1.0 / np.sqrt(self.sizes_drawn)

    # full-dimension actions -------------------------------------------------

    def apply_m(self, x: np.ndarray) -> np.ndarray:
        out = x[self.rows]
        if self.row_scale is not None:
            out = out * (self.row_scale if out.ndim == 1 else self.row_scale[:, None])
        return out

    def apply_m_t(self, y: np.ndarray) -> np.ndarray:
        if self.row_scale is not None:
            y = y * (self.row_scale if y.ndim == 1 else self.row_scale[:, None])
        shape = (self.n,) if y.ndim == 1 else (self.n, y.shape[1])
        out = np.zeros(shape, dtype=float)
        np.add.at(out, self.rows, y)
        return out

    def apply_p(self, y: np.ndarray) -> np.ndarray:
        w = self._p_rows_isqrt if y.ndim == 1 else self._p_rows_isqrt[:, None]
        return y * w

    def apply_pm(self, x: np.ndarray) -> np.ndarray:
        return self.apply_p(self.apply_m(x))

    def apply_mt_p2_m(self, x: np.ndarray) -> np.ndarray:
        """Normal-equation action: adjoint-measure after squared reweighting."""
        y = self.apply_m(x)
        w = self._p_rows if y.ndim == 1 else self._p_rows[:, None]
        return self.apply_m_t(y / w)

    def apply_mt_p2(self, y: np.ndarray) -> np.ndarray:
        w = self._p_rows if y.ndim == 1 else self._p_rows[:, None]
        return self.apply_m_t(y / w)

    # reduced-dimension actions ----------------------------------------------

    def apply_a_tilde(self, y: np.ndarray) -> np.ndarray:
        sums = np.add.reduceat(y, self.block_starts, axis=0)
        w = self._sizes_isqrt if y.ndim == 1 else self._sizes_isqrt[:, None]
        return sums * w

    def apply_a_tilde_t(self, v: np.ndarray) -> np.ndarray:
        w = self._sizes_isqrt if v.ndim == 1 else self._sizes_isqrt[:, None]
        return np.repeat(v * w, self.sizes_drawn, axis=0)

    def apply_m_tilde(self, z: np.ndarray) -> np.ndarray:
        return z[self.omega]

    def apply_m_tilde_t(self, v: np.ndarray) -> np.ndarray:
        if v.ndim != 1:
            raise ValueError("reduced adjoint expects a vector")
        return np.bincount(self.omega, weights=v, minlength=self.N)

    def apply_p_tilde(self, v: np.ndarray) -> np.ndarray:
        w = 1.0 / np.sqrt(self.probs[self.omega])
        return v * (w if v.ndim == 1 else w[:, None])

    def apply_mt_pt2_mt(self, z: np.ndarray) -> np.ndarray:
        """Reduced normal-equation diagonal: duplicity over probability per group."""
        return self.reduced_diagonal() * z

    def reduced_diagonal(self) -> np.ndarray:
        dup = np.bincount(self.omega, minlength=self.N).astype(float)
        return dup / self.probs

    def m_max(self) -> float:
        """Valid spectral bound on the reweighted measurement operator:
        worst drawn group's sqrt(duplicity / probability)."""
        dup = np.bincount(self.omega, minlength=self.N)
        drawn = dup > 0
        return float(np.sqrt((dup[drawn] / self.probs[drawn]).max()))


def assemble_sample_operators(
    part: GroupPartition, probs: np.ndarray, draw: SampleDraw
) -> SampleOperators:
    return SampleOperators(part, probs, draw)
