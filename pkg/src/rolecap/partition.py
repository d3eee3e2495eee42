"""Node-to-community assignments with per-community aggregates."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import EdgeListFormatError
from .graph import DirectedGraph


@dataclass(frozen=True)
class CommunityPartition:
    """Dense community assignment plus the aggregates modularity needs.

    `internal_arcs[c]` counts arcs with both endpoints in c;
    `in_degree[c]` / `out_degree[c]` sum member degrees.
    """

    assignment: np.ndarray
    community_count: int
    sizes: np.ndarray
    internal_arcs: np.ndarray
    in_degree: np.ndarray
    out_degree: np.ndarray

    def __post_init__(self):
        self.assignment.setflags(write=False)

    @classmethod
    def from_assignment(cls, g: DirectedGraph, labels) -> "CommunityPartition":
        """Densify an arbitrary labeling and compute aggregates on g."""
        labels = np.asarray(labels)
        if labels.shape != (g.node_count,):
            raise ValueError(f"assignment covers {labels.size} nodes, graph has {g.node_count}")
        _, assign = np.unique(labels, return_inverse=True)
        assign = assign.astype(np.int64)
        k = int(assign.max()) + 1 if assign.size else 0
        sizes = np.bincount(assign, minlength=k)
        src, dst = g.arc_array()
        internal_mask = assign[src] == assign[dst]
        internal = np.bincount(assign[src[internal_mask]], minlength=k)
        din = np.bincount(assign, weights=g.in_degrees(), minlength=k).astype(np.int64)
        dout = np.bincount(assign, weights=g.out_degrees(), minlength=k).astype(np.int64)
        return cls(assign, k, sizes, internal, din, dout)


def write_communities(g: DirectedGraph, p: CommunityPartition, sink) -> None:
    """One "node_label community_index" line per node, in label order."""
    own = isinstance(sink, (str, os.PathLike))
    fh = open(sink, "wb") if own else sink
    try:
        labels = g.labels.tolist()
        comms = p.assignment.tolist()
        fh.write(("\n".join(f"{a} {c}" for a, c in zip(labels, comms)) + "\n").encode())
    finally:
        if own:
            fh.close()


def read_communities(g: DirectedGraph, source) -> CommunityPartition:
    """Parse a community file back into a partition over g's nodes."""
    own = isinstance(source, (str, os.PathLike))
    fh = open(source, "rb") if own else source
    try:
        data = fh.read()
    finally:
        if own:
            fh.close()
    node_labels, comm = [], []
    for i, raw in enumerate(data.splitlines()):
        line = raw.strip()
        if not line or line.startswith(b"#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise EdgeListFormatError(i + 1, f"expected 2 fields, got {len(parts)}")
        try:
            node_labels.append(int(parts[0]))
            comm.append(int(parts[1]))
        except ValueError:
            raise EdgeListFormatError(i + 1, "non-integer field") from None
    ids = g.ids_of(np.array(node_labels, dtype=np.int64))
    assign = np.full(g.node_count, -1, dtype=np.int64)
    assign[ids] = np.array(comm, dtype=np.int64)
    if (assign < 0).any():
        missing = g.labels[assign < 0][0]
        raise EdgeListFormatError(0, f"node {missing} has no community assignment")
    return CommunityPartition.from_assignment(g, assign)
