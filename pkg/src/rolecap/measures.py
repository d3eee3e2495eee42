"""Community-role connectivity measures.

Raw per-node quantities are derived from a per-(node, community) arc-count
table built in one pass per direction.  Every measure is then either a
plain function of that table (participation) or a within-community z-score
of one of its columns.  Conventions for degenerate cases: zero community
spread gives z-score 0, an isolated node gets participation 0, and the
link-count spread delta is 0 when a node reaches at most one external
community.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .graph import DirectedGraph
from .partition import CommunityPartition

FAMILY_COLUMNS = {
    "original": ("z", "P"),
    "directed": ("z_in", "z_out", "P_in", "P_out"),
    "generalized": ("I_int_in", "I_int_out", "I_ext_in", "I_ext_out",
                    "D_in", "D_out", "H_in", "H_out"),
}

_DIRECTIONS = ("undirected", "in", "out")


@dataclass(frozen=True)
class CommunityDegreeProfile:
    """Per-node view of the community degree table (test/debug accessor)."""

    node: int
    in_counts: dict
    out_counts: dict
    d_int_in: int
    d_int_out: int
    d_ext_in: int
    d_ext_out: int
    eps_in: int
    eps_out: int


class _DirectionalTable:
    """Sparse (node, community) arc counts for one direction plus aggregates."""

    def __init__(self, node, comm, count, n, assign, degree):
        self.node = node
        self.comm = comm
        self.count = count.astype(np.float64)
        self.degree = degree.astype(np.float64)
        own = assign[node]
        is_own = comm == own
        self.d_int = np.bincount(node[is_own], weights=count[is_own], minlength=n)
        self.d_ext = self.degree - self.d_int
        ext_node = node[~is_own]
        ext_count = count[~is_own].astype(np.float64)
        self.eps = np.bincount(ext_node, minlength=n).astype(np.float64)
        s1 = np.bincount(ext_node, weights=ext_count, minlength=n)
        s2 = np.bincount(ext_node, weights=ext_count * ext_count, minlength=n)
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = np.where(self.eps > 0, s1 / np.maximum(self.eps, 1), 0.0)
            var = np.where(self.eps > 0, s2 / np.maximum(self.eps, 1) - mean * mean, 0.0)
        self.delta = np.where(self.eps > 1, np.sqrt(np.maximum(var, 0.0)), 0.0)
        sumsq = np.bincount(node, weights=self.count * self.count, minlength=n)
        d2 = self.degree * self.degree
        self.participation = np.where(
            self.degree > 0, 1.0 - sumsq / np.maximum(d2, 1.0), 0.0)


class CommunityProfiles:
    """All directional tables for one (graph, partition) pair."""

    def __init__(self, g: DirectedGraph, p: CommunityPartition):
        n = g.node_count
        k = np.int64(p.community_count)
        assign = p.assignment
        src, dst = g.arc_array()

        def table(node_arr, comm_arr, degree):
            keys = node_arr * k + comm_arr
            uk, count = np.unique(keys, return_counts=True)
            return _DirectionalTable((uk // k).astype(np.int64),
                                     (uk % k).astype(np.int64),
                                     count, n, assign, degree)

        self.out = table(src, assign[dst], g.out_degrees())
        self.inn = table(dst, assign[src], g.in_degrees())
        self.all = table(np.concatenate([src, dst]),
                         np.concatenate([assign[dst], assign[src]]),
                         g.in_degrees() + g.out_degrees())
        self.graph = g
        self.partition = p

    def direction(self, direction) -> _DirectionalTable:
        if direction == "out":
            return self.out
        if direction == "in":
            return self.inn
        if direction == "undirected":
            return self.all
        raise ValueError(f"unknown direction {direction!r}; expected one of {_DIRECTIONS}")

    def profile(self, u) -> CommunityDegreeProfile:
        def row(table):
            lo = np.searchsorted(table.node, u)
            hi = np.searchsorted(table.node, u, side="right")
            return dict(zip(table.comm[lo:hi].tolist(),
                            table.count[lo:hi].astype(int).tolist()))
        return CommunityDegreeProfile(
            node=u,
            in_counts=row(self.inn), out_counts=row(self.out),
            d_int_in=int(self.inn.d_int[u]), d_int_out=int(self.out.d_int[u]),
            d_ext_in=int(self.inn.d_ext[u]), d_ext_out=int(self.out.d_ext[u]),
            eps_in=int(self.inn.eps[u]), eps_out=int(self.out.eps[u]))


def community_degree_profiles(g, p) -> CommunityProfiles:
    return CommunityProfiles(g, p)


def zscore_within_community(values, p: CommunityPartition) -> np.ndarray:
    """(f(u) - mean of f over u's community) / population std; 0 when std is 0."""
    values = np.asarray(values, dtype=np.float64)
    assign = p.assignment
    sizes = np.maximum(p.sizes, 1).astype(np.float64)
    mu = np.bincount(assign, weights=values, minlength=p.community_count) / sizes
    dev = values - mu[assign]
    var = np.bincount(assign, weights=dev * dev, minlength=p.community_count) / sizes
    sigma = np.sqrt(var)
    sig_u = sigma[assign]
    out = np.zeros_like(values)
    nz = sig_u > 0
    out[nz] = dev[nz] / sig_u[nz]
    return out


def _profiles(g, p, profiles):
    return profiles if profiles is not None else CommunityProfiles(g, p)


def within_module_degree(g, p, direction="undirected", profiles=None) -> np.ndarray:
    """z-score of the internal degree, per community."""
    t = _profiles(g, p, profiles).direction(direction)
    return zscore_within_community(t.d_int, p)


def participation_coefficient(g, p, direction="undirected", profiles=None) -> np.ndarray:
    """1 - sum_i (d_i/d)^2 over all communities a node touches (own included)."""
    return _profiles(g, p, profiles).direction(direction).participation


def diversity(g, p, direction, profiles=None) -> np.ndarray:
    """z-score of the number of external communities reached."""
    _require_directed(direction)
    t = _profiles(g, p, profiles).direction(direction)
    return zscore_within_community(t.eps, p)


def external_intensity(g, p, direction, profiles=None) -> np.ndarray:
    """z-score of the external degree."""
    _require_directed(direction)
    t = _profiles(g, p, profiles).direction(direction)
    return zscore_within_community(t.d_ext, p)


def heterogeneity(g, p, direction, profiles=None) -> np.ndarray:
    """z-score of the spread (population std) of per-external-community link counts."""
    _require_directed(direction)
    t = _profiles(g, p, profiles).direction(direction)
    return zscore_within_community(t.delta, p)


def internal_intensity(g, p, direction, profiles=None) -> np.ndarray:
    """Alias of the within-module degree, named for the generalized family."""
    _require_directed(direction)
    return within_module_degree(g, p, direction, profiles)


def _require_directed(direction):
    if direction not in ("in", "out"):
        raise ValueError("direction must be 'in' or 'out'")


@dataclass
class MeasureMatrix:
    """Named per-node measure columns keyed by original node label."""

    values: np.ndarray
    columns: tuple
    node_labels: np.ndarray
    norm_means: np.ndarray | None = None
    norm_stds: np.ndarray | None = None

    def column(self, name) -> np.ndarray:
        return self.values[:, self.columns.index(name)]


def compute_measure_matrix(g, p, family) -> MeasureMatrix:
    """Measure family on one shared profile pass.

    original     -> z, P (link directions ignored)
    directed     -> in/out versions of both
    generalized  -> internal/external intensity, diversity, heterogeneity,
                    in/out versions of each (8 columns)
    """
    if family not in FAMILY_COLUMNS:
        raise ValueError(f"unknown family {family!r}")
    prof = CommunityProfiles(g, p)
    cols = FAMILY_COLUMNS[family]
    parts = []
    for name in cols:
        if name == "z":
            parts.append(within_module_degree(g, p, "undirected", prof))
        elif name == "P":
            parts.append(participation_coefficient(g, p, "undirected", prof))
        elif name.startswith("z_"):
            parts.append(within_module_degree(g, p, name[2:], prof))
        elif name.startswith("P_"):
            parts.append(participation_coefficient(g, p, name[2:], prof))
        elif name.startswith("I_int_"):
            parts.append(internal_intensity(g, p, name[6:], prof))
        elif name.startswith("I_ext_"):
            parts.append(external_intensity(g, p, name[6:], prof))
        elif name.startswith("D_"):
            parts.append(diversity(g, p, name[2:], prof))
        elif name.startswith("H_"):
            parts.append(heterogeneity(g, p, name[2:], prof))
    return MeasureMatrix(np.column_stack(parts), cols, g.labels.copy())


def write_measure_csv(mm: MeasureMatrix, sink) -> None:
    """Header + one row per node; 6 significant digits."""
    own = isinstance(sink, (str, os.PathLike))
    fh = open(sink, "wb") if own else sink
    try:
        fh.write(("node_label," + ",".join(mm.columns) + "\n").encode())
        labels = mm.node_labels.tolist()
        vals = mm.values.tolist()
        step = 1 << 17
        for lo in range(0, len(labels), step):
            rows = "\n".join(
                str(labels[i]) + "," + ",".join(f"{v:.6g}" for v in vals[i])
                for i in range(lo, min(lo + step, len(labels))))
            fh.write(rows.encode() + b"\n")
    finally:
        if own:
            fh.close()


def read_measure_csv(source) -> MeasureMatrix:
    df = pd.read_csv(source)
    if df.columns[0] != "node_label":
        raise ValueError("measure CSV must start with a node_label column")
    cols = tuple(df.columns[1:])
    return MeasureMatrix(df[list(cols)].to_numpy(dtype=np.float64), cols,
                         df["node_label"].to_numpy(dtype=np.int64))
