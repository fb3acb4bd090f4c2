"""Diffusion-based recommendation on bipartite user-item networks."""

from ._backend import available_backends, backend_name, get_backend, set_backend
from .graph import BipartiteGraph, PowerTable, build_graph, degree_power, power_table

__version__ = "0.1.0"

__all__ = [
    "BipartiteGraph",
    "PowerTable",
    "build_graph",
    "degree_power",
    "power_table",
    "available_backends",
    "backend_name",
    "get_backend",
    "set_backend",
    "__version__",
]
