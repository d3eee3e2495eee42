import filecmp
import os
from pathlib import Path

import numpy as np
import pytest

from rolecap.cli import main
from rolecap.graph import ingest_edge_list
from rolecap.manifest import strip_timings

SPEC_TEXT = """\
block_sizes = 50 50 50 50
p_in = 0.3
p_out = 0.01
seed = 42
capitalist = 0 60 1.2 1.0
"""


@pytest.fixture()
def synth_dir(tmp_path):
    spec = tmp_path / "spec.txt"
    spec.write_text(SPEC_TEXT)
    out = tmp_path / "synth"
    assert main(["synth", "--spec", str(spec), "--out-dir", str(out)]) == 0
    return out


def test_synth_outputs(synth_dir):
    edges = synth_dir / "edges.tsv"
    assert edges.exists()
    g = ingest_edge_list(edges)
    assert g.node_count == 200
    planted = (synth_dir / "communities_planted.txt").read_text().splitlines()
    assert len(planted) == g.node_count
    caps = (synth_dir / "capitalists_planted.csv").read_text().splitlines()
    assert caps[0] == "node_label,block,in_degree,ratio,reciprocation"
    assert len(caps) == 2


def test_communities_and_determinism(synth_dir, tmp_path):
    edges = str(synth_dir / "edges.tsv")
    out1, out2 = tmp_path / "c1", tmp_path / "c2"
    assert main(["communities", "--input", edges, "--out-dir", str(out1),
                 "--seed", "7"]) == 0
    assert main(["communities", "--input", edges, "--out-dir", str(out2),
                 "--seed", "7"]) == 0
    assert (out1 / "communities.txt").read_bytes() == (out2 / "communities.txt").read_bytes()
    lines = (out1 / "communities.txt").read_text().splitlines()
    assert len(lines) == 200
    assert all(len(line.split()) == 2 for line in lines)


def test_measures_family_columns(synth_dir, tmp_path):
    edges = str(synth_dir / "edges.tsv")
    cdir = tmp_path / "comm"
    main(["communities", "--input", edges, "--out-dir", str(cdir)])
    comm = str(cdir / "communities.txt")
    for family, ncols in (("original", 2), ("directed", 4), ("generalized", 8)):
        mdir = tmp_path / f"m_{family}"
        assert main(["measures", "--input", edges, "--communities", comm,
                     "--family", family, "--out-dir", str(mdir)]) == 0
        header = (mdir / "measures.csv").read_text().splitlines()[0]
        assert len(header.split(",")) == 1 + ncols


def test_capitalists_cmd(synth_dir, tmp_path):
    out = tmp_path / "caps"
    assert main(["capitalists", "--input", str(synth_dir / "edges.tsv"),
                 "--out-dir", str(out), "--overlap-threshold", "0.74"]) == 0
    lines = (out / "capitalists.csv").read_text().splitlines()
    assert lines[0] == "node_label,overlap,ratio,in_degree,class,ratio_band"
    assert len(lines) == 201


def test_roles_threshold_requires_original(synth_dir, tmp_path, capsys):
    edges = str(synth_dir / "edges.tsv")
    cdir = tmp_path / "comm"
    main(["communities", "--input", edges, "--out-dir", str(cdir)])
    comm = str(cdir / "communities.txt")

    mdir = tmp_path / "morig"
    main(["measures", "--input", edges, "--communities", comm,
          "--family", "original", "--out-dir", str(mdir)])
    rdir = tmp_path / "rth"
    assert main(["roles-threshold", "--measures", str(mdir / "measures.csv"),
                 "--out-dir", str(rdir)]) == 0
    lines = (rdir / "roles_threshold.csv").read_text().splitlines()
    assert lines[0] == "node_label,role_id,role"
    assert len(lines) == 201

    gdir = tmp_path / "mgen"
    main(["measures", "--input", edges, "--communities", comm,
          "--family", "generalized", "--out-dir", str(gdir)])
    rc = main(["roles-threshold", "--measures", str(gdir / "measures.csv"),
               "--out-dir", str(tmp_path / "rth2")])
    assert rc == 1
    assert "original" in capsys.readouterr().err


def test_roles_cluster_outputs(synth_dir, tmp_path):
    edges = str(synth_dir / "edges.tsv")
    cdir = tmp_path / "comm"
    main(["communities", "--input", edges, "--out-dir", str(cdir)])
    mdir = tmp_path / "m"
    main(["measures", "--input", edges, "--communities",
          str(cdir / "communities.txt"), "--family", "generalized",
          "--out-dir", str(mdir)])
    rdir = tmp_path / "roles"
    assert main(["roles-cluster", "--measures", str(mdir / "measures.csv"),
                 "--out-dir", str(rdir), "--k-min", "2", "--k-max", "5",
                 "--restarts", "2", "--seed", "3", "--alpha", "0.05"]) == 0
    assert (rdir / "roles.txt").exists()
    sel = (rdir / "selection.csv").read_text().splitlines()
    assert sel[0] == "k,wcss,db_index"
    assert [int(r.split(",")[0]) for r in sel[1:]] == [2, 3, 4, 5]
    val = (rdir / "validation.csv").read_text().splitlines()
    assert val[0] == "measure,cluster_a,cluster_b,t,p_adjusted,significant"


def test_report_missing_input_names_file(synth_dir, tmp_path, capsys):
    rc = main(["report", "--input", str(synth_dir / "edges.tsv"),
               "--measures", str(tmp_path / "m.csv"),
               "--roles", str(tmp_path / "nope.txt"),
               "--selection", str(tmp_path / "sel.csv"),
               "--capitalists", str(tmp_path / "caps.csv"),
               "--out-dir", str(tmp_path / "rep")])
    assert rc == 1
    err = capsys.readouterr().err
    assert "error: missing-input" in err
    assert "m.csv" in err


def test_parse_error_category(tmp_path, capsys):
    bad = tmp_path / "bad.tsv"
    bad.write_text("0 1\n1 x\n")
    rc = main(["communities", "--input", str(bad), "--out-dir", str(tmp_path / "o")])
    assert rc == 1
    err = capsys.readouterr().err
    assert "error: parse" in err
    assert "line 2" in err


def run_pipeline(edges, out, seed="5"):
    return main(["pipeline", "--input", str(edges), "--out-dir", str(out),
                 "--seed", seed, "--family", "generalized",
                 "--overlap-threshold", "0.74", "--k-min", "2", "--k-max", "4",
                 "--restarts", "2", "--alpha", "0.05",
                 "--flow-min-share", "0.01", "--threads", "1"])


def test_pipeline_end_to_end(synth_dir, tmp_path):
    edges = synth_dir / "edges.tsv"
    out1 = tmp_path / "run1"
    out2 = tmp_path / "run2"
    assert run_pipeline(edges, out1) == 0
    assert run_pipeline(edges, out2) == 0

    expected = ["communities.txt", "measures.csv", "capitalists.csv",
                "roles.txt", "selection.csv", "validation.csv", "manifest.txt"]
    for name in expected:
        assert (out1 / name).exists(), name
    report_files = ["measures.csv", "roles.csv", "flows.csv", "flows.dot",
                    "distribution_low.csv", "distribution_high.csv",
                    "selection.csv", "centroids.csv", "summary.txt"]
    for name in report_files:
        assert (out1 / "report" / name).exists(), name

    # byte-identical repeat run (manifest equal minus timings)
    for name in expected[:-1]:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name
    for name in report_files:
        a = (out1 / "report" / name).read_bytes()
        b = (out2 / "report" / name).read_bytes()
        assert a == b, name
    m1 = strip_timings((out1 / "manifest.txt").read_text())
    m2 = strip_timings((out2 / "manifest.txt").read_text())
    assert m1 == m2

    manifest = (out1 / "manifest.txt").read_text()
    assert "input.edges.sha256" in manifest
    assert "param.seed = 5" in manifest
    assert "stage.communities.seconds" in manifest
    assert "output.report.summary.sha256" in manifest


def test_pipeline_different_seed_changes_manifest(synth_dir, tmp_path):
    edges = synth_dir / "edges.tsv"
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run_pipeline(edges, out1, seed="5") == 0
    assert run_pipeline(edges, out2, seed="6") == 0
    m1 = strip_timings((out1 / "manifest.txt").read_text())
    m2 = strip_timings((out2 / "manifest.txt").read_text())
    assert m1 != m2
