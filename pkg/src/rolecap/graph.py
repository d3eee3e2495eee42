"""Directed graph storage with compressed adjacency arrays.

Graphs are simple (no self-loops, no parallel arcs) and immutable once
built.  Node ids are dense integers assigned at ingestion in ascending
order of the original labels, so id order and label order coincide.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass

import numpy as np

from .errors import EdgeListFormatError, EmptyInputError, NodeIdError

_CHUNK_SIZE = 1 << 24  # 16 MiB of text per parse chunk

_NL, _CR, _TAB, _SP, _HASH = 0x0A, 0x0D, 0x09, 0x20, 0x23


@dataclass(frozen=True)
class IngestStats:
    data_lines: int
    comment_lines: int
    dropped_self_loops: int
    collapsed_duplicates: int


class DirectedGraph:
    """Immutable directed graph over dense node ids 0..node_count-1.

    Both adjacency directions are held as CSR-style (indptr, indices)
    pairs with neighbor lists sorted ascending.  `labels[i]` is the
    original label of node i; labels are strictly increasing.
    """

    def __init__(self, out_indptr, out_indices, in_indptr, in_indices,
                 labels, stats=None):
        self.out_indptr = out_indptr
        self.out_indices = out_indices
        self.in_indptr = in_indptr
        self.in_indices = in_indices
        self.labels = labels
        self.stats = stats
        for arr in (out_indptr, out_indices, in_indptr, in_indices, labels):
            arr.setflags(write=False)

    @property
    def node_count(self) -> int:
        return self.labels.size

    @property
    def arc_count(self) -> int:
        return self.out_indices.size

    def _check_node(self, u):
        if not 0 <= u < self.node_count:
            raise NodeIdError(f"node id {u} out of range [0, {self.node_count})")

    def out_neighbors(self, u) -> np.ndarray:
        self._check_node(u)
        return self.out_indices[self.out_indptr[u]:self.out_indptr[u + 1]]

    def in_neighbors(self, u) -> np.ndarray:
        self._check_node(u)
        return self.in_indices[self.in_indptr[u]:self.in_indptr[u + 1]]

    def degrees(self, u) -> tuple[int, int, int]:
        """(d_in, d_out, d_total) of node u."""
        self._check_node(u)
        d_in = int(self.in_indptr[u + 1] - self.in_indptr[u])
        d_out = int(self.out_indptr[u + 1] - self.out_indptr[u])
        return d_in, d_out, d_in + d_out

    def in_degrees(self) -> np.ndarray:
        return np.diff(self.in_indptr)

    def out_degrees(self) -> np.ndarray:
        return np.diff(self.out_indptr)

    def arc_array(self) -> tuple[np.ndarray, np.ndarray]:
        """All arcs as (src, dst) id arrays, sorted by (src, dst)."""
        src = np.repeat(np.arange(self.node_count, dtype=np.int64),
                        self.out_degrees())
        return src, self.out_indices

    def label_of(self, u) -> int:
        self._check_node(u)
        return int(self.labels[u])

    def id_of(self, label) -> int:
        i = int(np.searchsorted(self.labels, label))
        if i == self.node_count or self.labels[i] != label:
            raise NodeIdError(f"unknown node label {label}")
        return i

    def ids_of(self, labels) -> np.ndarray:
        labels = np.asarray(labels, dtype=np.int64)
        ids = np.searchsorted(self.labels, labels)
        ok = (ids < self.node_count) & (self.labels[np.minimum(ids, self.node_count - 1)] == labels)
        if not ok.all():
            bad = labels[~ok][0]
            raise NodeIdError(f"unknown node label {bad}")
        return ids

    @classmethod
    def from_arcs(cls, src_labels, dst_labels, stats_extra=(0, 0)) -> "DirectedGraph":
        """Build a simple graph from raw arc endpoint labels.

        Self-loops are dropped and duplicate arcs collapsed; endpoints of
        dropped self-loops still define nodes.
        """
        src_labels = np.asarray(src_labels, dtype=np.int64)
        dst_labels = np.asarray(dst_labels, dtype=np.int64)
        if src_labels.size == 0:
            raise EmptyInputError("no arcs given")
        labels = np.unique(np.concatenate([src_labels, dst_labels]))
        n = labels.size
        if n > 3_000_000_000:
            raise NotImplementedError("node count exceeds packed arc-key range")
        loop_mask = src_labels == dst_labels
        dropped = int(loop_mask.sum())
        src = np.searchsorted(labels, src_labels[~loop_mask])
        dst = np.searchsorted(labels, dst_labels[~loop_mask])

        # single int64 key keeps dedup and both CSR builds at sort speed
        keys = np.sort(src * np.int64(n) + dst)
        if keys.size:
            keep = np.empty(keys.size, dtype=bool)
            keep[0] = True
            np.not_equal(keys[1:], keys[:-1], out=keep[1:])
            keys = keys[keep]
        collapsed = int(src.size - keys.size)
        out_src = keys // n
        out_dst = keys % n
        out_indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(out_src, minlength=n), out=out_indptr[1:])

        rkeys = np.sort(out_dst * np.int64(n) + out_src)
        in_dst = rkeys // n
        in_src = rkeys % n
        in_indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(in_dst, minlength=n), out=in_indptr[1:])

        comments, data_lines = stats_extra[0], stats_extra[1]
        stats = IngestStats(data_lines=data_lines, comment_lines=comments,
                            dropped_self_loops=dropped,
                            collapsed_duplicates=collapsed)
        return cls(out_indptr, np.ascontiguousarray(out_dst),
                   in_indptr, np.ascontiguousarray(in_src), labels, stats)


def _parse_lines_slow(data: bytes, first_lineno: int):
    """Reference line-by-line parser; also localizes format errors."""
    srcs, dsts = [], []
    comments = 0
    for i, raw in enumerate(data.splitlines()):
        lineno = first_lineno + i
        line = raw.strip()
        if not line:
            continue
        if line.startswith(b"#"):
            comments += 1
            continue
        parts = line.split()
        if len(parts) != 2:
            raise EdgeListFormatError(lineno, f"expected 2 fields, got {len(parts)}")
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            bad = next(p for p in parts if not _is_int_token(p))
            raise EdgeListFormatError(lineno, f"non-integer field {bad.decode(errors='replace')!r}") from None
        if not (_I64_MIN <= a <= _I64_MAX and _I64_MIN <= b <= _I64_MAX):
            raise EdgeListFormatError(lineno, "label outside 64-bit range")
        srcs.append(a)
        dsts.append(b)
    return srcs, dsts, comments


_I64_MIN, _I64_MAX = -(2**63), 2**63 - 1


def _is_int_token(tok: bytes) -> bool:
    try:
        int(tok)
        return True
    except ValueError:
        return False


def _parse_chunk(chunk: bytes, first_lineno: int):
    """Parse one newline-aligned chunk into (src, dst, n_data_lines, n_comments).

    Vectorized fast path; any irregularity falls back to the slow parser,
    which reports the exact offending line.
    """
    buf = np.frombuffer(chunk, dtype=np.uint8)
    is_nl = buf == _NL
    is_sep = is_nl | (buf == _SP) | (buf == _TAB) | (buf == _CR)
    tok_start = ~is_sep
    tok_start[1:] &= is_sep[:-1]
    starts = np.flatnonzero(tok_start)
    if starts.size == 0:
        return None, None, 0, 0

    line_of = np.cumsum(is_nl)
    n_lines = int(line_of[-1]) + (0 if chunk.endswith(b"\n") else 1)
    tok_lines = line_of[starts]
    lines_with_tokens, first_tok = np.unique(tok_lines, return_index=True)
    comment_line_mask = buf[starts[first_tok]] == _HASH
    n_comments = int(comment_line_mask.sum())

    if n_comments:
        # rare path: the slow parser handles comments and keeps exact line numbers
        srcs, dsts, nc = _parse_lines_slow(chunk, first_lineno)
        return (np.array(srcs, dtype=np.int64), np.array(dsts, dtype=np.int64),
                len(srcs), nc)

    tokens_per_line = np.bincount(tok_lines, minlength=n_lines)
    data_lines = lines_with_tokens
    if not np.all(tokens_per_line[data_lines] == 2):
        _raise_first_bad_line(chunk, first_lineno)
    try:
        vals = np.array(chunk.split(), dtype="S").astype(np.int64)
    except (ValueError, OverflowError):
        _raise_first_bad_line(chunk, first_lineno)
    pairs = vals.reshape(-1, 2)
    return pairs[:, 0].copy(), pairs[:, 1].copy(), int(data_lines.size), 0


def _raise_first_bad_line(chunk, first_lineno):
    _parse_lines_slow(chunk, first_lineno)  # raises with the exact line number
    raise EdgeListFormatError(first_lineno, "malformed chunk")  # pragma: no cover


def _open_source(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, "rb"), True
    if isinstance(source, bytes):
        return io.BytesIO(source), True
    return source, False


def ingest_edge_list(source, *, chunk_size=_CHUNK_SIZE) -> DirectedGraph:
    """Stream an edge-list ("src dst" per line, '#' comments) into a graph.

    Accepts a path, raw bytes, or a binary file object.  Labels are
    arbitrary integers; ids are assigned densely in ascending label
    order.  Memory stays bounded by the arc arrays plus one chunk.
    """
    stream, owned = _open_source(source)
    src_parts, dst_parts = [], []
    data_lines = comments = 0
    lineno = 1
    carry = b""
    try:
        while True:
            block = stream.read(chunk_size)
            if not block:
                break
            block = carry + block
            cut = block.rfind(b"\n")
            if cut < 0:
                carry = block
                continue
            chunk, carry = block[:cut + 1], block[cut + 1:]
            s, d, nd, nc = _parse_chunk(chunk, lineno)
            lineno += chunk.count(b"\n")
            data_lines += nd
            comments += nc
            if s is not None:
                src_parts.append(s)
                dst_parts.append(d)
        if carry:
            s, d, nd, nc = _parse_chunk(carry, lineno)
            data_lines += nd
            comments += nc
            if s is not None:
                src_parts.append(s)
                dst_parts.append(d)
    finally:
        if owned:
            stream.close()

    if data_lines == 0:
        raise EmptyInputError("edge list contains no arcs")
    src = np.concatenate(src_parts)
    dst = np.concatenate(dst_parts)
    return DirectedGraph.from_arcs(src, dst, stats_extra=(comments, data_lines))


def write_edge_list(g: DirectedGraph, sink) -> None:
    """Write arcs as "src\\tdst\\n" lines in ascending (src, dst) label order."""
    src_ids, dst_ids = g.arc_array()
    src = g.labels[src_ids]
    dst = g.labels[dst_ids]
    own = isinstance(sink, (str, os.PathLike))
    fh = open(sink, "wb") if own else sink
    try:
        step = 1 << 20
        for lo in range(0, src.size, step):
            s = src[lo:lo + step].tolist()
            d = dst[lo:lo + step].tolist()
            fh.write(("\n".join(f"{a}\t{b}" for a, b in zip(s, d)) + "\n").encode())
    finally:
        if own:
            fh.close()


def degrees(g: DirectedGraph, u) -> tuple[int, int, int]:
    return g.degrees(u)
