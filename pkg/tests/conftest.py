import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rolecap.graph import DirectedGraph, ingest_edge_list


@pytest.fixture(scope="session")
def tri_graph():
    # arcs 0->1, 1->0, 1->2
    return ingest_edge_list(b"0 1\n1 0\n1 2\n")


@pytest.fixture(scope="session")
def two_cycles():
    # two disjoint directed 3-cycles
    return ingest_edge_list(b"0 1\n1 2\n2 0\n3 4\n4 5\n5 3\n")


def _three_community_arcs():
    """Hand-built 3-community toy graph.

    Communities by label: C0 = {0..4}, C1 = {10..14}, C2 = {20..24}.
    Node 0 has out-arcs to 2 nodes of C1 and 1 node of C2 on top of the
    internal ring arcs each community carries.
    """
    arcs = []
    blocks = [list(range(0, 5)), list(range(10, 15)), list(range(20, 25))]
    for block in blocks:
        for i, u in enumerate(block):
            arcs.append((u, block[(i + 1) % len(block)]))
            arcs.append((u, block[(i + 2) % len(block)]))
    arcs += [(0, 10), (0, 11), (0, 20)]
    arcs += [(12, 0), (21, 3)]
    return arcs


@pytest.fixture(scope="session")
def toy3():
    arcs = _three_community_arcs()
    text = "\n".join(f"{a} {b}" for a, b in arcs).encode() + b"\n"
    g = ingest_edge_list(text)
    assign = np.array([lbl // 10 for lbl in g.labels.tolist()])
    return g, assign
