"""Interpretive outputs: fixed-threshold roles, inter-cluster link flows,
capitalist distribution tables, and the rendered report bundle.
"""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .capitalists import BAND_NAMES, CLASS_HIGH, CLASS_LOW, CapitalistResult
from .clustering import RoleAssignment, denormalize_centroids, write_selection
from .errors import MissingInputError
from .graph import DirectedGraph
from .measures import MeasureMatrix, write_measure_csv

HUB_Z_MIN = 2.5


class ThresholdRole(enum.IntEnum):
    ULTRA_PERIPHERAL_NONHUB = 0
    PERIPHERAL_NONHUB = 1
    CONNECTOR_NONHUB = 2
    KINLESS_NONHUB = 3
    PROVINCIAL_HUB = 4
    CONNECTOR_HUB = 5
    KINLESS_HUB = 6

    @property
    def label(self) -> str:
        return self.name.lower()


def threshold_roles(z, participation) -> np.ndarray:
    """Fixed-threshold role per node from (z, P).

    Hubs are nodes with z >= 2.5.  Participation bands (half-open on the
    left): hubs P <= 0.30 provincial, (0.30, 0.75] connector, > 0.75
    kinless; non-hubs P <= 0.05 ultra-peripheral, (0.05, 0.62] peripheral,
    (0.62, 0.80] connector, > 0.80 kinless.
    """
    z = np.asarray(z, dtype=np.float64)
    p = np.asarray(participation, dtype=np.float64)
    if z.shape != p.shape:
        raise ValueError("z and participation must align")
    roles = np.empty(z.shape, dtype=np.int8)
    hub = z >= HUB_Z_MIN

    roles[hub & (p <= 0.30)] = ThresholdRole.PROVINCIAL_HUB
    roles[hub & (p > 0.30) & (p <= 0.75)] = ThresholdRole.CONNECTOR_HUB
    roles[hub & (p > 0.75)] = ThresholdRole.KINLESS_HUB

    nh = ~hub
    roles[nh & (p <= 0.05)] = ThresholdRole.ULTRA_PERIPHERAL_NONHUB
    roles[nh & (p > 0.05) & (p <= 0.62)] = ThresholdRole.PERIPHERAL_NONHUB
    roles[nh & (p > 0.62) & (p <= 0.80)] = ThresholdRole.CONNECTOR_NONHUB
    roles[nh & (p > 0.80)] = ThresholdRole.KINLESS_NONHUB
    return roles


@dataclass(frozen=True)
class FlowTable:
    """Arc counts and shares between ordered cluster pairs (self included)."""

    k: int
    counts: np.ndarray            # (k, k) int64
    share_of_source: np.ndarray   # row-normalized
    share_of_network: np.ndarray
    share_of_target: np.ndarray   # column-normalized
    min_network_share: float


def _cluster_labels(ra, n):
    labels = ra.labels if isinstance(ra, RoleAssignment) else np.asarray(ra)
    if labels.shape != (n,):
        raise ValueError(f"assignment covers {labels.size} nodes, expected {n}")
    return labels.astype(np.int64)


def intercluster_flows(g: DirectedGraph, ra, min_network_share=0.01) -> FlowTable:
    """Exact arc counts for every ordered cluster pair.

    `min_network_share` is carried along for rendering only; the table
    itself always holds all pairs.
    """
    labels = _cluster_labels(ra, g.node_count)
    k = int(labels.max()) + 1
    src, dst = g.arc_array()
    counts = np.bincount(labels[src] * k + labels[dst],
                         minlength=k * k).reshape(k, k)
    total = counts.sum()
    row = counts.sum(axis=1, keepdims=True)
    col = counts.sum(axis=0, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        share_src = np.where(row > 0, counts / np.maximum(row, 1), 0.0)
        share_net = counts / total if total > 0 else np.zeros_like(counts, dtype=float)
        share_dst = np.where(col > 0, counts / np.maximum(col, 1), 0.0)
    return FlowTable(k, counts, share_src, share_net, share_dst,
                     float(min_network_share))


LOW_BANDS = (("r<=1", -math.inf, 1.0), ("r>1", 1.0, math.inf))
HIGH_BANDS = (("r<=0.7", -math.inf, 0.7), ("0.7<r<=1", 0.7, 1.0),
              ("r>1", 1.0, math.inf))


@dataclass(frozen=True)
class DistributionTable:
    """How one capitalist class spreads over clusters, split by ratio band.

    share_of_class[band, cluster]  : fraction of the band's capitalists there
    share_of_cluster[band, cluster]: fraction of the cluster that is the band
    """

    klass: str
    band_labels: tuple
    counts: np.ndarray
    share_of_class: np.ndarray
    share_of_cluster: np.ndarray
    band_totals: np.ndarray
    cluster_sizes: np.ndarray
    empty_bands: tuple


def capitalist_distribution(caps: CapitalistResult, ra, klass, bands=None) -> DistributionTable:
    """Distribution of one capitalist class over clusters.

    klass: "low" (in-degree 500..10000, bands r<=1 / r>1) or "high"
    (in-degree > 10000, bands r<=0.7 / 0.7<r<=1 / r>1).
    """
    if klass == "low":
        code, bands = CLASS_LOW, bands or LOW_BANDS
    elif klass == "high":
        code, bands = CLASS_HIGH, bands or HIGH_BANDS
    else:
        raise ValueError("klass must be 'low' or 'high'")
    n = caps.klass.size
    labels = _cluster_labels(ra, n)
    k = int(labels.max()) + 1
    cluster_sizes = np.bincount(labels, minlength=k)

    member = caps.klass == code
    counts = np.zeros((len(bands), k), dtype=np.int64)
    for bi, (_, lo, hi) in enumerate(bands):
        in_band = member & (caps.ratio > lo) & (caps.ratio <= hi)
        counts[bi] = np.bincount(labels[in_band], minlength=k)
    band_totals = counts.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        share_class = np.where(band_totals[:, None] > 0,
                               counts / np.maximum(band_totals[:, None], 1), 0.0)
        share_cluster = counts / np.maximum(cluster_sizes[None, :], 1)
    empty = tuple(lbl for (lbl, _, _), t in zip(bands, band_totals) if t == 0)
    return DistributionTable(klass, tuple(b[0] for b in bands), counts,
                             share_class, share_cluster, band_totals,
                             cluster_sizes, empty)


def _fmt(v) -> str:
    return f"{v:.6g}"


def write_flows_csv(flows: FlowTable, sink) -> None:
    own = isinstance(sink, (str, os.PathLike))
    fh = open(sink, "wb") if own else sink
    try:
        fh.write(b"source,target,count,share_of_source,share_of_network,share_of_target\n")
        for i in range(flows.k):
            for j in range(flows.k):
                fh.write((f"{i},{j},{flows.counts[i, j]},"
                          f"{_fmt(flows.share_of_source[i, j])},"
                          f"{_fmt(flows.share_of_network[i, j])},"
                          f"{_fmt(flows.share_of_target[i, j])}\n").encode())
    finally:
        if own:
            fh.close()


def write_distribution_csv(table: DistributionTable, sink) -> None:
    own = isinstance(sink, (str, os.PathLike))
    fh = open(sink, "wb") if own else sink
    try:
        fh.write(b"band,cluster,count,share_of_class,share_of_cluster\n")
        for bi, band in enumerate(table.band_labels):
            for c in range(table.cluster_sizes.size):
                fh.write((f"{band},{c},{table.counts[bi, c]},"
                          f"{_fmt(table.share_of_class[bi, c])},"
                          f"{_fmt(table.share_of_cluster[bi, c])}\n").encode())
    finally:
        if own:
            fh.close()


def write_flows_dot(flows: FlowTable, cluster_sizes, sink) -> None:
    """Graphviz description of the inter-cluster digraph.

    Arcs below the configured network share are omitted here (and only
    here); the CSV always keeps them.
    """
    own = isinstance(sink, (str, os.PathLike))
    fh = open(sink, "wb") if own else sink
    try:
        fh.write(b"digraph cluster_flows {\n")
        for i in range(flows.k):
            fh.write(f'  c{i} [label="cluster {i}\\n{int(cluster_sizes[i])} nodes"];\n'.encode())
        for i in range(flows.k):
            for j in range(flows.k):
                share = flows.share_of_network[i, j]
                if flows.counts[i, j] == 0 or share < flows.min_network_share:
                    continue
                lbl = (f"{100 * flows.share_of_source[i, j]:.1f}%|"
                       f"{100 * share:.1f}%|"
                       f"{100 * flows.share_of_target[i, j]:.1f}%")
                fh.write(f'  c{i} -> c{j} [label="{lbl}"];\n'.encode())
        fh.write(b"}\n")
    finally:
        if own:
            fh.close()


def write_threshold_roles_csv(node_labels, roles, sink) -> None:
    own = isinstance(sink, (str, os.PathLike))
    fh = open(sink, "wb") if own else sink
    try:
        fh.write(b"node_label,role_id,role\n")
        labs = np.asarray(node_labels).tolist()
        ids = np.asarray(roles).tolist()
        rows = "\n".join(f"{a},{r},{ThresholdRole(r).label}" for a, r in zip(labs, ids))
        fh.write(rows.encode() + b"\n")
    finally:
        if own:
            fh.close()


def render_report(out_dir, *, graph, measures, assignment, selection_table,
                  capitalists, measures_norm=None, flow_min_share=0.01):
    """Write the full report bundle into out_dir; returns {name: path}.

    Bundle: measures.csv, roles.csv, flows.csv + flows.dot,
    distribution_low.csv, distribution_high.csv, selection.csv,
    centroids.csv, summary.txt.  An empty capitalist class still produces
    its (zeroed) table.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise MissingInputError(f"cannot create output directory {out}: {exc}") from exc
    paths = {}

    paths["measures"] = out / "measures.csv"
    write_measure_csv(measures, paths["measures"])

    labels = _cluster_labels(assignment, graph.node_count)
    k = int(labels.max()) + 1
    cluster_sizes = np.bincount(labels, minlength=k)
    paths["roles"] = out / "roles.csv"
    with open(paths["roles"], "wb") as fh:
        fh.write(b"node_label,cluster\n")
        rows = "\n".join(f"{a},{c}" for a, c in
                         zip(graph.labels.tolist(), labels.tolist()))
        fh.write(rows.encode() + b"\n")

    flows = intercluster_flows(graph, labels, flow_min_share)
    paths["flows"] = out / "flows.csv"
    write_flows_csv(flows, paths["flows"])
    paths["flows_dot"] = out / "flows.dot"
    write_flows_dot(flows, cluster_sizes, paths["flows_dot"])

    dist_low = capitalist_distribution(capitalists, labels, "low")
    dist_high = capitalist_distribution(capitalists, labels, "high")
    paths["distribution_low"] = out / "distribution_low.csv"
    write_distribution_csv(dist_low, paths["distribution_low"])
    paths["distribution_high"] = out / "distribution_high.csv"
    write_distribution_csv(dist_high, paths["distribution_high"])

    paths["selection"] = out / "selection.csv"
    write_selection(selection_table, paths["selection"])

    paths["centroids"] = out / "centroids.csv"
    with open(paths["centroids"], "wb") as fh:
        fh.write(("cluster," + ",".join(measures.columns) + "\n").encode())
        if isinstance(assignment, RoleAssignment):
            cents = denormalize_centroids(
                assignment, measures_norm if measures_norm is not None else measures)
            for c in range(assignment.k):
                fh.write((f"{c}," + ",".join(_fmt(v) for v in cents[c]) + "\n").encode())

    paths["summary"] = out / "summary.txt"
    with open(paths["summary"], "wb") as fh:
        lines = [
            f"nodes = {graph.node_count}",
            f"arcs = {graph.arc_count}",
            f"clusters = {k}",
        ]
        if isinstance(assignment, RoleAssignment) and assignment.db_index is not None:
            lines.append(f"db_index = {_fmt(assignment.db_index)}")
        lines += [f"cluster_size[{c}] = {int(cluster_sizes[c])}" for c in range(k)]
        counts = capitalists.class_counts()
        lines += [f"capitalists.{name} = {cnt}" for name, cnt in sorted(counts.items())]
        lines.append(f"overlap_threshold = {_fmt(capitalists.overlap_threshold)}")
        for table in (dist_low, dist_high):
            for band in table.empty_bands:
                lines.append(f"warning: no {table.klass} in-degree capitalists with {band}")
        fh.write(("\n".join(lines) + "\n").encode())
    return paths
