"""Community roles and social-capitalist detection for large directed graphs."""

__version__ = "0.1.0"

from .graph import DirectedGraph, ingest_edge_list, write_edge_list
from .partition import CommunityPartition

__all__ = [
    "DirectedGraph",
    "ingest_edge_list",
    "write_edge_list",
    "CommunityPartition",
    "__version__",
]
