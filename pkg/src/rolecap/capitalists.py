"""Topological social-capitalist detection.

Two neighborhood indices drive the classification: the overlap
|N-  intersect  N+| / min(|N-|, |N+|), which is near 1 for users who
systematically reciprocate follow links, and the ratio |N+| / |N-|,
which separates the follow-back strategies.  Nodes with at least 500
followers and overlap above a configurable threshold are capitalists,
split into a low in-degree class (500..10000 followers) and a high
in-degree class (above 10000).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import UndefinedOverlapError
from .graph import DirectedGraph

DEFAULT_OVERLAP_THRESHOLD = 0.74  # heuristic default, always reported in outputs
LOW_IN_DEGREE_MIN = 500
LOW_IN_DEGREE_MAX = 10_000

CLASS_NONE, CLASS_LOW, CLASS_HIGH = 0, 1, 2
CLASS_NAMES = ("none", "low_in_degree", "high_in_degree")

BAND_NA, BAND_LE_07, BAND_07_TO_1, BAND_GT_1 = 0, 1, 2, 3
BAND_NAMES = ("n/a", "r<=0.7", "0.7<r<=1", "r>1")


@dataclass(frozen=True)
class CapitalistResult:
    """Per-node overlap/ratio values and class labels (index = node id)."""

    overlap: np.ndarray      # nan where undefined (empty in- or out-neighborhood)
    ratio: np.ndarray        # inf when |N-|=0 < |N+|, nan when 0/0
    in_degree: np.ndarray
    klass: np.ndarray        # CLASS_* codes
    band: np.ndarray         # BAND_* codes, BAND_NA iff class none
    overlap_threshold: float

    def class_counts(self) -> dict[str, int]:
        return {name: int(np.sum(self.klass == code))
                for code, name in enumerate(CLASS_NAMES)}


def _intersection_counts(g: DirectedGraph) -> np.ndarray:
    """|N-(u) intersect N+(u)| for every node, by one sorted-key merge."""
    n = np.int64(g.node_count)
    out_src = np.repeat(np.arange(g.node_count, dtype=np.int64), g.out_degrees())
    in_dst = np.repeat(np.arange(g.node_count, dtype=np.int64), g.in_degrees())
    out_keys = out_src * n + g.out_indices
    in_keys = in_dst * n + g.in_indices
    common = np.intersect1d(out_keys, in_keys, assume_unique=True)
    return np.bincount((common // n).astype(np.int64), minlength=g.node_count)


def overlap_index(g: DirectedGraph, u) -> float:
    """Overlap of node u; raises when either neighborhood is empty."""
    d_in, d_out, _ = g.degrees(u)
    if min(d_in, d_out) == 0:
        raise UndefinedOverlapError(f"node {u} has an empty neighborhood side")
    inter = np.intersect1d(g.in_neighbors(u), g.out_neighbors(u), assume_unique=True)
    return inter.size / min(d_in, d_out)


def ratio(g: DirectedGraph, u) -> float:
    """|N+| / |N-|; +inf when only followers are missing, nan for 0/0."""
    d_in, d_out, _ = g.degrees(u)
    if d_in == 0:
        return float("inf") if d_out > 0 else float("nan")
    return d_out / d_in


def classify_capitalists(g: DirectedGraph,
                         overlap_threshold: float = DEFAULT_OVERLAP_THRESHOLD
                         ) -> CapitalistResult:
    """Label every node of g; vectorized over the whole graph."""
    if not 0 < overlap_threshold <= 1:
        raise ValueError("overlap threshold must be in (0, 1]")
    d_in = g.in_degrees().astype(np.int64)
    d_out = g.out_degrees().astype(np.int64)

    inter = _intersection_counts(g)
    mins = np.minimum(d_in, d_out)
    overlap = np.full(g.node_count, np.nan)
    defined = mins > 0
    overlap[defined] = inter[defined] / mins[defined]

    rat = np.full(g.node_count, np.nan)
    pos = d_in > 0
    rat[pos] = d_out[pos] / d_in[pos]
    rat[(d_in == 0) & (d_out > 0)] = np.inf

    detected = defined & (overlap >= overlap_threshold) & (d_in >= LOW_IN_DEGREE_MIN)
    klass = np.zeros(g.node_count, dtype=np.int8)
    klass[detected & (d_in <= LOW_IN_DEGREE_MAX)] = CLASS_LOW
    klass[detected & (d_in > LOW_IN_DEGREE_MAX)] = CLASS_HIGH

    band = np.zeros(g.node_count, dtype=np.int8)
    band[detected & (rat <= 0.7)] = BAND_LE_07
    band[detected & (rat > 0.7) & (rat <= 1.0)] = BAND_07_TO_1
    band[detected & (rat > 1.0)] = BAND_GT_1
    return CapitalistResult(overlap, rat, d_in, klass, band, overlap_threshold)


def write_capitalists(g: DirectedGraph, res: CapitalistResult, sink) -> None:
    own = isinstance(sink, (str, os.PathLike))
    fh = open(sink, "wb") if own else sink
    try:
        fh.write(b"node_label,overlap,ratio,in_degree,class,ratio_band\n")
        labels = g.labels.tolist()
        ov = res.overlap.tolist()
        rt = res.ratio.tolist()
        di = res.in_degree.tolist()
        kl = res.klass.tolist()
        bd = res.band.tolist()
        step = 1 << 18
        for lo in range(0, len(labels), step):
            rows = "\n".join(
                f"{labels[i]},{ov[i]:.6g},{rt[i]:.6g},{di[i]},{CLASS_NAMES[kl[i]]},{BAND_NAMES[bd[i]]}"
                for i in range(lo, min(lo + step, len(labels))))
            fh.write(rows.encode() + b"\n")
    finally:
        if own:
            fh.close()


def read_capitalists(source) -> pd.DataFrame:
    df = pd.read_csv(source)
    expected = ["node_label", "overlap", "ratio", "in_degree", "class", "ratio_band"]
    if list(df.columns) != expected:
        raise ValueError(f"unexpected capitalist CSV columns: {list(df.columns)}")
    return df
