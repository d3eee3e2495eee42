"""Benchmark graphs: directed planted-partition blocks plus optional
capitalist-like nodes with controlled in-degree, friend/follower ratio and
reciprocation.

Arc sampling walks each block pair's index space with geometric jumps, so
every ordered node pair is an independent Bernoulli draw at the block
pair's probability without materializing the pair space.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import SpecError
from .graph import DirectedGraph

_MAX_I64 = 2**62


@dataclass(frozen=True)
class PlantedCapitalist:
    block: int
    in_degree: int
    ratio: float
    reciprocation: float


@dataclass(frozen=True)
class PlantedSpec:
    block_sizes: tuple
    p_in: float
    p_out: float
    seed: int = 0
    capitalists: tuple = ()

    def validate(self):
        if not self.block_sizes or any(s < 1 for s in self.block_sizes):
            raise SpecError("block sizes must all be >= 1")
        if not (0 <= self.p_out < self.p_in <= 1):
            raise SpecError("need 0 <= p_out < p_in <= 1")
        n = sum(self.block_sizes)
        for cap in self.capitalists:
            if not 0 <= cap.block < len(self.block_sizes):
                raise SpecError(f"capitalist block {cap.block} out of range")
            if cap.in_degree > n - 1:
                raise SpecError(f"target in-degree {cap.in_degree} exceeds node count - 1")
            if cap.ratio < 0:
                raise SpecError("target ratio must be non-negative")
            if int(round(cap.ratio * cap.in_degree)) > n - 1:
                raise SpecError(f"target ratio {cap.ratio} needs more friends than nodes exist")
            if not 0 <= cap.reciprocation <= 1:
                raise SpecError("reciprocation rate must be in [0, 1]")
        counts = {}
        for cap in self.capitalists:
            counts[cap.block] = counts.get(cap.block, 0) + 1
            if counts[cap.block] > self.block_sizes[cap.block]:
                raise SpecError(f"more capitalists than nodes in block {cap.block}")


@dataclass(frozen=True)
class SynthResult:
    graph: DirectedGraph
    block_of_label: np.ndarray       # planted block per label 0..n-1
    capitalist_labels: np.ndarray
    spec: PlantedSpec

    def planted_assignment(self) -> np.ndarray:
        """Block per graph node (isolated labels never reach the graph)."""
        return self.block_of_label[self.graph.labels]


def _sample_positions(n_pairs, p, rng):
    """Sorted positions of successes in n_pairs independent Bernoulli(p) draws."""
    if n_pairs <= 0 or p <= 0.0:
        return np.empty(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(n_pairs, dtype=np.int64)
    chunks = []
    pos = -1
    est = int(n_pairs * p + 10 * math.sqrt(n_pairs * p) + 16)
    while pos < n_pairs:
        gaps = rng.geometric(p, size=max(est, 16)).astype(np.int64)
        positions = pos + np.cumsum(gaps)
        chunks.append(positions)
        pos = int(positions[-1])
        est = 1024
    cat = np.concatenate(chunks)
    return cat[cat < n_pairs]


def _block_pair_arcs(offsets, sizes, a, b, p, rng):
    na, nb = sizes[a], sizes[b]
    if a == b:
        idx = _sample_positions(na * (na - 1), p, rng)
        i = idx // (na - 1) if na > 1 else idx
        j = idx % (na - 1) if na > 1 else idx
        j = j + (j >= i)
    else:
        idx = _sample_positions(na * nb, p, rng)
        i = idx // nb
        j = idx % nb
    return offsets[a] + i, offsets[b] + j


def _pick_new(rng, n, exclude_sorted, forbidden, count):
    """`count` uniform nodes outside exclude_sorted and != forbidden."""
    if count <= 0:
        return np.empty(0, dtype=np.int64)
    perm = rng.permutation(n)
    pos = np.searchsorted(exclude_sorted, perm)
    pos = np.minimum(pos, max(exclude_sorted.size - 1, 0))
    hit = exclude_sorted.size > 0
    is_old = (exclude_sorted[pos] == perm) if hit else np.zeros(n, dtype=bool)
    ok = perm[~is_old & (perm != forbidden)]
    if ok.size < count:
        raise SpecError("not enough nodes to satisfy capitalist targets")
    return ok[:count].astype(np.int64)


def generate(spec: PlantedSpec):
    """Sample the planted graph; deterministic for a fixed spec.

    Returns a SynthResult.  Capitalist nodes are the first labels of their
    blocks, in spec order: their in-degree is topped up to the target, a
    `reciprocation` fraction of their followers is followed back, and
    extra friends are added until the friend/follower ratio target holds.
    Planted capitalists are kept mutually non-adjacent so each one's
    planted profile lands exactly; targets are only topped up, never cut,
    so a dense background can exceed them.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    sizes = np.array(spec.block_sizes, dtype=np.int64)
    offsets = np.zeros(len(sizes), dtype=np.int64)
    np.cumsum(sizes[:-1], out=offsets[1:])
    n = int(sizes.sum())
    if n * n > _MAX_I64:
        raise SpecError("graph too large for packed pair indexing")

    src_parts, dst_parts = [], []
    nb = len(sizes)
    for a in range(nb):
        for b in range(nb):
            p = spec.p_in if a == b else spec.p_out
            s, d = _block_pair_arcs(offsets, sizes, a, b, p, rng)
            if s.size:
                src_parts.append(s)
                dst_parts.append(d)
    src = np.concatenate(src_parts) if src_parts else np.empty(0, np.int64)
    dst = np.concatenate(dst_parts) if dst_parts else np.empty(0, np.int64)

    cap_labels = []
    used_per_block = {}
    for cap in spec.capitalists:
        slot = used_per_block.get(cap.block, 0)
        used_per_block[cap.block] = slot + 1
        cap_labels.append(int(offsets[cap.block] + slot))
    protected = np.array(sorted(cap_labels), dtype=np.int64)
    if protected.size:
        cap_to_cap = np.isin(src, protected) & np.isin(dst, protected)
        src, dst = src[~cap_to_cap], dst[~cap_to_cap]

    for u, cap in zip(cap_labels, spec.capitalists):
        followers = np.unique(src[dst == u])
        need_in = cap.in_degree - followers.size
        if need_in > 0:
            avoid = np.union1d(followers, protected)
            extra = _pick_new(rng, n, avoid, u, need_in)
            src = np.concatenate([src, extra])
            dst = np.concatenate([dst, np.full(extra.size, u, dtype=np.int64)])
            followers = np.unique(np.concatenate([followers, extra]))

        friends = np.unique(dst[src == u])
        mirror_k = int(math.ceil(cap.reciprocation * followers.size))
        if mirror_k > 0:
            order = rng.permutation(followers.size)
            chosen = followers[order[:mirror_k]]
            new = np.setdiff1d(chosen, friends, assume_unique=False)
            if new.size:
                src = np.concatenate([src, np.full(new.size, u, dtype=np.int64)])
                dst = np.concatenate([dst, new])
                friends = np.unique(np.concatenate([friends, new]))

        target_out = int(round(cap.ratio * followers.size))
        need_out = target_out - friends.size
        if need_out > 0:
            avoid = np.union1d(friends, protected)
            extra = _pick_new(rng, n, avoid, u, need_out)
            src = np.concatenate([src, np.full(extra.size, u, dtype=np.int64)])
            dst = np.concatenate([dst, extra])

    if src.size == 0:
        raise SpecError("spec produced no arcs; raise p_in or block sizes")
    graph = DirectedGraph.from_arcs(src, dst)
    block_of_label = np.repeat(np.arange(nb, dtype=np.int64), sizes)
    return SynthResult(graph, block_of_label,
                       np.array(cap_labels, dtype=np.int64), spec)


def parse_spec(text) -> PlantedSpec:
    """Flat key=value format; `capitalist` lines repeat.

    block_sizes = 50 50 50 50
    p_in = 0.3
    p_out = 0.01
    seed = 42
    capitalist = 0 600 1.2 1.0   # block in_degree ratio reciprocation
    """
    if isinstance(text, bytes):
        text = text.decode()
    fields = {}
    caps = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecError(f"spec line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            if key == "block_sizes":
                fields["block_sizes"] = tuple(int(t) for t in value.split())
            elif key == "p_in":
                fields["p_in"] = float(value)
            elif key == "p_out":
                fields["p_out"] = float(value)
            elif key == "seed":
                fields["seed"] = int(value)
            elif key == "capitalist":
                b, d, r, rho = value.split()
                caps.append(PlantedCapitalist(int(b), int(d), float(r), float(rho)))
            else:
                raise SpecError(f"spec line {lineno}: unknown key {key!r}")
        except (ValueError, TypeError):
            raise SpecError(f"spec line {lineno}: cannot parse value {value!r}") from None
    missing = {"block_sizes", "p_in", "p_out"} - set(fields)
    if missing:
        raise SpecError(f"spec missing keys: {sorted(missing)}")
    return PlantedSpec(capitalists=tuple(caps), **fields)


def read_spec(path) -> PlantedSpec:
    with open(path, "rb") as fh:
        return parse_spec(fh.read())


def write_planted_communities(result: SynthResult, sink) -> None:
    g = result.graph
    assign = result.planted_assignment()
    own = isinstance(sink, (str, os.PathLike))
    fh = open(sink, "wb") if own else sink
    try:
        rows = "\n".join(f"{a} {c}" for a, c in
                         zip(g.labels.tolist(), assign.tolist()))
        fh.write(rows.encode() + b"\n")
    finally:
        if own:
            fh.close()


def write_planted_capitalists(result: SynthResult, sink) -> None:
    own = isinstance(sink, (str, os.PathLike))
    fh = open(sink, "wb") if own else sink
    try:
        fh.write(b"node_label,block,in_degree,ratio,reciprocation\n")
        for lbl, cap in zip(result.capitalist_labels.tolist(), result.spec.capitalists):
            fh.write(f"{lbl},{cap.block},{cap.in_degree},{cap.ratio:.6g},"
                     f"{cap.reciprocation:.6g}\n".encode())
    finally:
        if own:
            fh.close()
