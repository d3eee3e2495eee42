"""Command-line front door.

Subcommands cover each stage (synth, communities, measures, capitalists,
roles-threshold, roles-cluster, report) plus `pipeline`, which chains them
over plain files and records a manifest of parameters, digests and
timings.  Exit status is 0 on success; failures print one categorized
"error: <category>: <message>" line.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .capitalists import (BAND_NAMES, CLASS_NAMES, DEFAULT_OVERLAP_THRESHOLD,
                          CapitalistResult, classify_capitalists,
                          read_capitalists, write_capitalists)
from .clustering import (DEFAULT_K_RANGE, DEFAULT_RESTARTS, RoleAssignment,
                         normalize_columns, read_roles, select_k,
                         validate_clusters, write_roles, write_selection,
                         write_validation)
from .errors import MissingInputError, RolecapError
from .graph import ingest_edge_list, write_edge_list
from .louvain import DEFAULT_MIN_GAIN, directed_modularity, louvain
from .manifest import RunManifest
from .measures import (FAMILY_COLUMNS, compute_measure_matrix,
                       read_measure_csv, write_measure_csv)
from .partition import read_communities, write_communities
from .report import render_report, threshold_roles, write_threshold_roles_csv
from .synth import generate, read_spec, write_planted_capitalists, write_planted_communities


class StageFailure(RolecapError):
    category = "stage"


def _require(path, what) -> str:
    if not os.path.exists(path):
        raise MissingInputError(f"{what} file not found: {path}")
    return path


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _default_threads() -> int:
    env = os.environ.get("ROLECAP_THREADS")
    if env and env.isdigit() and int(env) > 0:
        return int(env)
    return os.cpu_count() or 1


def _apply_threads(threads) -> int:
    """Best effort: jitted kernels honor this; BLAS pools follow the
    environment set before numpy loads."""
    threads = max(1, int(threads))
    os.environ.setdefault("OMP_NUM_THREADS", str(threads))
    try:
        import warnings

        import numba
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # threading-layer probe warnings
            numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))
    except ImportError:  # pragma: no cover
        pass
    return threads


def cmd_synth(args) -> int:
    out = _out_dir(args)
    spec = read_spec(_require(args.spec, "spec"))
    result = generate(spec)
    write_edge_list(result.graph, out / "edges.tsv")
    write_planted_communities(result, out / "communities_planted.txt")
    write_planted_capitalists(result, out / "capitalists_planted.csv")
    print(f"generated {result.graph.node_count} nodes, "
          f"{result.graph.arc_count} arcs -> {out}")
    return 0


def cmd_communities(args) -> int:
    out = _out_dir(args)
    g = ingest_edge_list(_require(args.input, "edge list"))
    p = louvain(g, seed=args.seed, min_gain=args.min_gain)
    write_communities(g, p, out / "communities.txt")
    q = 0.0 if g.arc_count == 0 else directed_modularity(g, p)
    print(f"{p.community_count} communities, modularity {q:.6g}")
    return 0


def cmd_measures(args) -> int:
    out = _out_dir(args)
    g = ingest_edge_list(_require(args.input, "edge list"))
    p = read_communities(g, _require(args.communities, "community"))
    mm = compute_measure_matrix(g, p, args.family)
    write_measure_csv(mm, out / "measures.csv")
    print(f"wrote {len(mm.columns)}-column measure matrix for "
          f"{g.node_count} nodes ({args.family})")
    return 0


def cmd_capitalists(args) -> int:
    out = _out_dir(args)
    g = ingest_edge_list(_require(args.input, "edge list"))
    res = classify_capitalists(g, overlap_threshold=args.overlap_threshold)
    write_capitalists(g, res, out / "capitalists.csv")
    counts = res.class_counts()
    print(f"capitalists: {counts['low_in_degree']} low, "
          f"{counts['high_in_degree']} high (threshold {args.overlap_threshold:g})")
    return 0


def cmd_roles_threshold(args) -> int:
    out = _out_dir(args)
    mm = read_measure_csv(_require(args.measures, "measure"))
    for col in ("z", "P"):
        if col not in mm.columns:
            raise RolecapError(
                f"measures file lacks column {col!r}; run measures --family original")
    roles = threshold_roles(mm.column("z"), mm.column("P"))
    write_threshold_roles_csv(mm.node_labels, roles, out / "roles_threshold.csv")
    counts = np.bincount(roles, minlength=7)
    print("threshold roles:", " ".join(str(int(c)) for c in counts))
    return 0


def cmd_roles_cluster(args) -> int:
    out = _out_dir(args)
    mm = read_measure_csv(_require(args.measures, "measure"))
    norm = normalize_columns(mm)
    best, table = select_k(norm.values, k_range=(args.k_min, args.k_max),
                           seed=args.seed, restarts=args.restarts)
    write_roles(mm.node_labels, best, out / "roles.txt")
    write_selection(table, out / "selection.csv")
    cv = validate_clusters(norm, best, alpha=args.alpha)
    write_validation(cv, out / "validation.csv")
    print(f"selected k={best.k} (Davies-Bouldin {best.db_index:.6g})")
    return 0


def _caps_from_csv(g, path) -> CapitalistResult:
    df = read_capitalists(path)
    ids = g.ids_of(df["node_label"].to_numpy(dtype=np.int64))
    n = g.node_count
    overlap = np.full(n, np.nan)
    ratio = np.full(n, np.nan)
    in_deg = np.zeros(n, dtype=np.int64)
    klass = np.zeros(n, dtype=np.int8)
    band = np.zeros(n, dtype=np.int8)
    overlap[ids] = df["overlap"].to_numpy(dtype=np.float64)
    ratio[ids] = df["ratio"].to_numpy(dtype=np.float64)
    in_deg[ids] = df["in_degree"].to_numpy(dtype=np.int64)
    class_code = {name: i for i, name in enumerate(CLASS_NAMES)}
    band_code = {name: i for i, name in enumerate(BAND_NAMES)}
    klass[ids] = np.array([class_code[c] for c in df["class"]], dtype=np.int8)
    band[ids] = np.array([band_code[b] for b in df["ratio_band"]], dtype=np.int8)
    return CapitalistResult(overlap, ratio, in_deg, klass, band, float("nan"))


def _assignment_from_roles_file(g, path) -> np.ndarray:
    labels, clusters = read_roles(path)
    ids = g.ids_of(labels)
    assign = np.full(g.node_count, -1, dtype=np.int64)
    assign[ids] = clusters
    if (assign < 0).any():
        missing = g.labels[assign < 0][0]
        raise RolecapError(f"roles file misses node {missing}")
    return assign


def cmd_report(args) -> int:
    g = ingest_edge_list(_require(args.input, "edge list"))
    mm = read_measure_csv(_require(args.measures, "measure"))
    assign = _assignment_from_roles_file(g, _require(args.roles, "roles"))
    sel = pd.read_csv(_require(args.selection, "selection"))
    table = list(sel.itertuples(index=False, name=None))
    caps = _caps_from_csv(g, _require(args.capitalists, "capitalist"))
    paths = render_report(args.out_dir, graph=g, measures=mm, assignment=assign,
                          selection_table=table, capitalists=caps,
                          flow_min_share=args.flow_min_share)
    print(f"report bundle: {len(paths)} files in {args.out_dir}")
    return 0


def _stage(manifest, name, fn):
    t0 = time.perf_counter()
    try:
        result = fn()
    except RolecapError:
        raise
    except Exception as exc:
        raise StageFailure(f"{name}: {exc}") from exc
    manifest.add_timing(name, time.perf_counter() - t0)
    return result


def cmd_pipeline(args) -> int:
    out = _out_dir(args)
    edges = _require(args.input, "edge list")
    manifest = RunManifest(__version__)
    manifest.add_input("edges", edges)
    for key in ("seed", "min_gain", "family", "overlap_threshold", "k_min",
                "k_max", "restarts", "alpha", "flow_min_share", "threads"):
        manifest.set_param(key, getattr(args, key))

    g = _stage(manifest, "ingest", lambda: ingest_edge_list(edges))

    def detect():
        p = louvain(g, seed=args.seed, min_gain=args.min_gain)
        write_communities(g, p, out / "communities.txt")
        return p
    p = _stage(manifest, "communities", detect)
    q = 0.0 if g.arc_count == 0 else directed_modularity(g, p)
    manifest.set_result("modularity", q)
    manifest.set_result("communities", p.community_count)

    def measures():
        mm = compute_measure_matrix(g, p, args.family)
        write_measure_csv(mm, out / "measures.csv")
        return mm
    mm = _stage(manifest, "measures", measures)

    def caps_stage():
        res = classify_capitalists(g, overlap_threshold=args.overlap_threshold)
        write_capitalists(g, res, out / "capitalists.csv")
        return res
    caps = _stage(manifest, "capitalists", caps_stage)

    def cluster():
        norm = normalize_columns(mm)
        best, table = select_k(norm.values, k_range=(args.k_min, args.k_max),
                               seed=args.seed, restarts=args.restarts)
        write_roles(mm.node_labels, best, out / "roles.txt")
        write_selection(table, out / "selection.csv")
        cv = validate_clusters(norm, best, alpha=args.alpha)
        write_validation(cv, out / "validation.csv")
        return norm, best, table
    norm, best, table = _stage(manifest, "roles-cluster", cluster)
    manifest.set_result("k", best.k)
    manifest.set_result("db_index", best.db_index)

    def report():
        return render_report(out / "report", graph=g, measures=mm,
                             assignment=best, selection_table=table,
                             capitalists=caps, measures_norm=norm,
                             flow_min_share=args.flow_min_share)
    paths = _stage(manifest, "report", report)

    for name in ("communities.txt", "measures.csv", "capitalists.csv",
                 "roles.txt", "selection.csv", "validation.csv"):
        manifest.add_output(name, out / name)
    for name, path in sorted(paths.items()):
        manifest.add_output(f"report.{name}", path)
    manifest.write(out / "manifest.txt")
    print(f"pipeline complete: k={best.k}, modularity {q:.6g}, manifest {out / 'manifest.txt'}")
    return 0


def _add_common(sp, *names):
    if "seed" in names:
        sp.add_argument("--seed", type=int, default=0, help="RNG seed")
    if "out" in names:
        sp.add_argument("--out-dir", required=True, help="output directory")
    if "input" in names:
        sp.add_argument("--input", required=True, help="edge-list file")
    if "threads" in names:
        sp.add_argument("--threads", type=int, default=_default_threads(),
                        help="worker threads for jitted kernels "
                             "(default: ROLECAP_THREADS or all cores)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="rolecap",
        description="Community roles and social-capitalist analysis of directed graphs")
    ap.add_argument("--version", action="version", version=f"rolecap {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a planted benchmark graph")
    sp.add_argument("--spec", required=True, help="key=value generator spec file")
    _add_common(sp, "out")
    sp.set_defaults(fn=cmd_synth)

    sp = sub.add_parser("communities", help="detect communities (directed Louvain)")
    _add_common(sp, "input", "out", "seed", "threads")
    sp.add_argument("--min-gain", type=float, default=DEFAULT_MIN_GAIN,
                    help="minimum modularity gain to keep moving")
    sp.set_defaults(fn=cmd_communities)

    sp = sub.add_parser("measures", help="compute community-role measures")
    _add_common(sp, "input", "out")
    sp.add_argument("--communities", required=True, help="community file")
    sp.add_argument("--family", choices=sorted(FAMILY_COLUMNS), default="generalized")
    sp.set_defaults(fn=cmd_measures)

    sp = sub.add_parser("capitalists", help="detect social capitalists")
    _add_common(sp, "input", "out")
    sp.add_argument("--overlap-threshold", type=float, default=DEFAULT_OVERLAP_THRESHOLD,
                    help="overlap needed to flag a capitalist (heuristic default 0.74)")
    sp.set_defaults(fn=cmd_capitalists)

    sp = sub.add_parser("roles-threshold", help="fixed-threshold roles from z and P")
    sp.add_argument("--measures", required=True, help="measures CSV (original family)")
    _add_common(sp, "out")
    sp.set_defaults(fn=cmd_roles_threshold)

    sp = sub.add_parser("roles-cluster", help="unsupervised roles by k-means")
    sp.add_argument("--measures", required=True, help="measures CSV")
    _add_common(sp, "out", "seed")
    sp.add_argument("--k-min", type=int, default=DEFAULT_K_RANGE[0])
    sp.add_argument("--k-max", type=int, default=DEFAULT_K_RANGE[1])
    sp.add_argument("--restarts", type=int, default=DEFAULT_RESTARTS)
    sp.add_argument("--alpha", type=float, default=0.05,
                    help="significance level before Bonferroni correction")
    sp.set_defaults(fn=cmd_roles_cluster)

    sp = sub.add_parser("report", help="render the analysis bundle")
    _add_common(sp, "input", "out")
    sp.add_argument("--measures", required=True)
    sp.add_argument("--roles", required=True, help="role assignment file")
    sp.add_argument("--selection", required=True, help="selection table CSV")
    sp.add_argument("--capitalists", required=True, help="capitalists CSV")
    sp.add_argument("--flow-min-share", type=float, default=0.01,
                    help="hide flow arcs below this network share in the DOT output")
    sp.set_defaults(fn=cmd_report)

    sp = sub.add_parser("pipeline", help="run all stages and write a manifest")
    _add_common(sp, "input", "out", "seed", "threads")
    sp.add_argument("--min-gain", type=float, default=DEFAULT_MIN_GAIN)
    sp.add_argument("--family", choices=sorted(FAMILY_COLUMNS), default="generalized")
    sp.add_argument("--overlap-threshold", type=float, default=DEFAULT_OVERLAP_THRESHOLD)
    sp.add_argument("--k-min", type=int, default=DEFAULT_K_RANGE[0])
    sp.add_argument("--k-max", type=int, default=DEFAULT_K_RANGE[1])
    sp.add_argument("--restarts", type=int, default=DEFAULT_RESTARTS)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--flow-min-share", type=float, default=0.01)
    sp.set_defaults(fn=cmd_pipeline)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", None) is not None:
        _apply_threads(args.threads)
    try:
        return args.fn(args)
    except RolecapError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: missing-input: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
