"""Unsupervised role identification in measure space.

Columns are globally standardized, k-means (k-means++ seeding, Lloyd
iterations, farthest-point repair for empty clusters) is run over a range
of k, and the partition minimizing the Davies-Bouldin index wins.  Cluster
separation is then checked with one-way ANOVA per measure plus pairwise
Welch t-tests under Bonferroni correction.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DegenerateClusteringError, InfeasibleKError
from .measures import MeasureMatrix

DEFAULT_RESTARTS = 5
DEFAULT_MAX_ITER = 100
DEFAULT_K_RANGE = (2, 15)
SOURCE_KMEANS = "kmeans"
SOURCE_THRESHOLDS = "thresholds"


@dataclass
class RoleAssignment:
    """Node-to-cluster assignment in measure space."""

    labels: np.ndarray
    k: int
    centroids: np.ndarray
    wcss: float
    db_index: float | None = None
    source: str = SOURCE_KMEANS


@dataclass(frozen=True)
class PairwiseTest:
    measure: str
    cluster_a: int
    cluster_b: int
    t: float
    p_raw: float
    p_adjusted: float
    significant: bool
    testable: bool


@dataclass(frozen=True)
class ClusterValidation:
    anova: list          # (measure, F, p) per measure column
    pairwise: list       # PairwiseTest per (measure, cluster pair)
    alpha: float
    n_comparisons: int
    adjusted_threshold: float


def _as_points(points) -> np.ndarray:
    if isinstance(points, MeasureMatrix):
        return np.ascontiguousarray(points.values, dtype=np.float64)
    return np.ascontiguousarray(points, dtype=np.float64)


def normalize_columns(mm: MeasureMatrix) -> MeasureMatrix:
    """Standardize every column to global mean 0, population std 1.

    Constant columns map to zero; the (mean, std) pairs are kept on the
    result so report centroids can be expressed in raw measure units.
    """
    if mm.values.shape[0] < 2:
        raise ValueError("need at least 2 rows to normalize")
    mu = mm.values.mean(axis=0)
    sigma = mm.values.std(axis=0)
    z = np.zeros_like(mm.values)
    nz = sigma > 0
    z[:, nz] = (mm.values[:, nz] - mu[nz]) / sigma[nz]
    return MeasureMatrix(z, mm.columns, mm.node_labels,
                         norm_means=mu, norm_stds=sigma)


def denormalize_centroids(ra: RoleAssignment, mm_norm: MeasureMatrix) -> np.ndarray:
    """Centroids back in raw measure units using the stored column params."""
    if mm_norm.norm_means is None:
        return ra.centroids.copy()
    return ra.centroids * mm_norm.norm_stds + mm_norm.norm_means


def _sq_to_point(X, c):
    diff = X - c
    return np.einsum("ij,ij->i", diff, diff)


def _sq_all(X, C, x2):
    d = x2[:, None] - 2.0 * (X @ C.T) + np.einsum("ij,ij->i", C, C)[None, :]
    np.maximum(d, 0.0, out=d)
    return d


def _kmeanspp(X, k, rng):
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[int(rng.integers(n))]
    d2 = _sq_to_point(X, centers[0])
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            raise InfeasibleKError(f"fewer than {k} distinct points")
        centers[j] = X[int(rng.choice(n, p=d2 / total))]
        np.minimum(d2, _sq_to_point(X, centers[j]), out=d2)
    return centers


def _repair_empty(X, C, d2, labels, counts):
    """Reseed each empty cluster to the point farthest from its own centroid."""
    own = d2[np.arange(X.shape[0]), labels]
    for j in np.flatnonzero(counts == 0):
        candidates = np.where(counts[labels] > 1, own, -1.0)
        i = int(np.argmax(candidates))
        if candidates[i] <= 0.0:
            raise InfeasibleKError("cannot repair empty cluster: no distinct point available")
        counts[labels[i]] -= 1
        labels[i] = j
        counts[j] = 1
        C[j] = X[i]
        d2[:, j] = _sq_to_point(X, C[j])
        own = d2[np.arange(X.shape[0]), labels]


def kmeans(points, k, seed=0, max_iter=DEFAULT_MAX_ITER,
           init_centroids=None) -> RoleAssignment:
    """Lloyd iterations from k-means++ seeding; deterministic per seed.

    Stops at an assignment fixpoint or after max_iter rounds.  The
    within-cluster sum of squares is asserted non-increasing at every
    iteration (tiny float slack).
    """
    X = _as_points(points)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise InfeasibleKError(f"k={k} outside [1, {n}]")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    rng = np.random.default_rng(seed)
    C = np.array(init_centroids, dtype=np.float64) if init_centroids is not None \
        else _kmeanspp(X, k, rng)
    x2 = np.einsum("ij,ij->i", X, X)

    prev_labels = None
    prev_wcss = np.inf
    labels = np.zeros(n, dtype=np.int64)
    wcss = 0.0
    for _ in range(max_iter):
        d2 = _sq_all(X, C, x2)
        labels = np.argmin(d2, axis=1).astype(np.int64)
        counts = np.bincount(labels, minlength=k)
        if (counts == 0).any():
            _repair_empty(X, C, d2, labels, counts)
        wcss = float(d2[np.arange(n), labels].sum())
        assert wcss <= prev_wcss * (1 + 1e-12) + 1e-9, \
            f"WCSS increased: {prev_wcss} -> {wcss}"
        if prev_labels is not None and np.array_equal(labels, prev_labels):
            break
        prev_labels = labels
        prev_wcss = wcss
        C = np.vstack([np.bincount(labels, weights=X[:, dim], minlength=k)
                       for dim in range(X.shape[1])]).T / counts[:, None]
    return RoleAssignment(labels, k, C, wcss=wcss, source=SOURCE_KMEANS)


def davies_bouldin(points, ra: RoleAssignment) -> float:
    """Mean over clusters of the worst (s_i + s_j) / ||c_i - c_j|| ratio."""
    X = _as_points(points)
    k = ra.k
    if k < 2:
        raise ValueError("Davies-Bouldin needs k >= 2")
    counts = np.bincount(ra.labels, minlength=k)
    if (counts == 0).any():
        raise ValueError("empty cluster")
    C = ra.centroids
    dist = np.sqrt(np.maximum(_sq_all(X, C, np.einsum("ij,ij->i", X, X)), 0.0))
    s = np.bincount(ra.labels, weights=dist[np.arange(X.shape[0]), ra.labels],
                    minlength=k) / counts
    gaps = np.sqrt(np.maximum(
        ((C[:, None, :] - C[None, :, :]) ** 2).sum(axis=2), 0.0))
    off = ~np.eye(k, dtype=bool)
    if np.any(gaps[off] == 0.0):
        raise DegenerateClusteringError("coincident centroids")
    ratios = (s[:, None] + s[None, :]) / np.where(off, gaps, np.inf)
    return float(np.mean(ratios.max(axis=1)))


def select_k(points, k_range=DEFAULT_K_RANGE, seed=0,
             restarts=DEFAULT_RESTARTS, max_iter=DEFAULT_MAX_ITER):
    """Best-of-restarts per k (by WCSS), then minimum Davies-Bouldin over k.

    Returns (assignment, table) where table rows are (k, wcss, db_index).
    """
    X = _as_points(points)
    k_min, k_max = k_range
    if not 2 <= k_min <= k_max <= X.shape[0]:
        raise InfeasibleKError(f"k range [{k_min}, {k_max}] infeasible for {X.shape[0]} points")
    table = []
    best = None
    for k in range(k_min, k_max + 1):
        run = None
        for r in range(restarts):
            cand = kmeans(X, k, seed=[seed, k, r], max_iter=max_iter)
            if run is None or cand.wcss < run.wcss:
                run = cand
        run.db_index = davies_bouldin(X, run)
        table.append((k, run.wcss, run.db_index))
        if best is None or run.db_index < best.db_index:
            best = run
    return best, table


def validate_clusters(mm: MeasureMatrix, ra: RoleAssignment,
                      alpha: float = 0.05) -> ClusterValidation:
    """One-way ANOVA per measure plus Bonferroni-corrected Welch t pairs.

    Pairs touching a cluster with fewer than 2 members are flagged
    untestable and never significant.
    """
    if ra.k < 2:
        raise ValueError("validation needs k >= 2")
    X = mm.values
    labels = ra.labels
    k = ra.k
    pairs = [(a, b) for a in range(k) for b in range(a + 1, k)]
    n_comparisons = len(pairs) * len(mm.columns)
    threshold = alpha / n_comparisons

    groups_by_cluster = [X[labels == c] for c in range(k)]
    anova = []
    with warnings.catch_warnings(), np.errstate(invalid="ignore", divide="ignore"):
        warnings.simplefilter("ignore")  # constant input is a handled degenerate case
        for ci, name in enumerate(mm.columns):
            cols = [grp[:, ci] for grp in groups_by_cluster if grp.shape[0] > 0]
            f, p = stats.f_oneway(*cols)
            if np.isnan(f):  # zero variance everywhere: no detectable difference
                f, p = 0.0, 1.0
            anova.append((name, float(f), float(p)))

        pairwise = []
        for ci, name in enumerate(mm.columns):
            for a, b in pairs:
                ga = groups_by_cluster[a][:, ci]
                gb = groups_by_cluster[b][:, ci]
                if ga.size < 2 or gb.size < 2:
                    pairwise.append(PairwiseTest(name, a, b, float("nan"), float("nan"),
                                                 float("nan"), False, False))
                    continue
                t, p = stats.ttest_ind(ga, gb, equal_var=False)
                if np.isnan(t):  # both groups constant and equal
                    t, p = 0.0, 1.0
                p_adj = min(1.0, float(p) * n_comparisons)
                pairwise.append(PairwiseTest(name, a, b, float(t), float(p),
                                             p_adj, bool(p < threshold), True))
    return ClusterValidation(anova, pairwise, alpha, n_comparisons, threshold)


def write_roles(node_labels, ra: RoleAssignment, sink) -> None:
    """One "node_label cluster_id" line per node."""
    own = isinstance(sink, (str, os.PathLike))
    fh = open(sink, "wb") if own else sink
    try:
        lab = np.asarray(node_labels).tolist()
        cl = ra.labels.tolist()
        fh.write(("\n".join(f"{a} {c}" for a, c in zip(lab, cl)) + "\n").encode())
    finally:
        if own:
            fh.close()


def read_roles(source):
    """Returns (node_labels, cluster_ids) arrays in file order."""
    own = isinstance(source, (str, os.PathLike))
    fh = open(source, "rb") if own else source
    try:
        data = fh.read()
    finally:
        if own:
            fh.close()
    labs, cls = [], []
    for raw in data.splitlines():
        line = raw.strip()
        if not line or line.startswith(b"#"):
            continue
        a, c = line.split()
        labs.append(int(a))
        cls.append(int(c))
    return np.array(labs, dtype=np.int64), np.array(cls, dtype=np.int64)


def write_selection(table, sink) -> None:
    own = isinstance(sink, (str, os.PathLike))
    fh = open(sink, "wb") if own else sink
    try:
        fh.write(b"k,wcss,db_index\n")
        for k, wcss, db in table:
            fh.write(f"{k},{wcss:.6g},{db:.6g}\n".encode())
    finally:
        if own:
            fh.close()


def write_validation(cv: ClusterValidation, sink) -> None:
    own = isinstance(sink, (str, os.PathLike))
    fh = open(sink, "wb") if own else sink
    try:
        fh.write(b"measure,cluster_a,cluster_b,t,p_adjusted,significant\n")
        for r in cv.pairwise:
            fh.write(f"{r.measure},{r.cluster_a},{r.cluster_b},"
                     f"{r.t:.6g},{r.p_adjusted:.6g},{str(r.significant).lower()}\n".encode())
    finally:
        if own:
            fh.close()
