"""Accuracy, diversity and novelty metrics for top-L recommendation lists.

Lists are ``(n, L)`` integer arrays of item ids, best first, padded with
``-1`` when a user has fewer than ``L`` candidates. Held-out items are
given per row as arrays of item ids.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .graph import BipartiteGraph

__all__ = [
    "MetricReport",
    "ranking_score",
    "hits_per_row",
    "precision",
    "recall",
    "hamming_personalization",
    "intrasimilarity",
    "novelty",
    "item_cosine",
    "TSV_COLUMNS",
    "tsv_columns",
    "write_table",
    "read_table",
]


def ranking_score(ranks: np.ndarray, n_candidates: np.ndarray) -> float:
    """Mean of ``rank / n_candidates`` over held-out pairs (NaN when there are none).

    >>> ranking_score(np.array([1.0]), np.array([100]))
    0.01
    """
    ranks = np.asarray(ranks, dtype=np.float64)
    if ranks.size == 0:
        return math.nan
    return float(np.mean(ranks / np.asarray(n_candidates, dtype=np.float64)))


def hits_per_row(lists: np.ndarray, probe: Sequence[np.ndarray]) -> np.ndarray:
    """Number of listed items of each row that are in that row's probe items."""
    lists = np.asarray(lists)
    out = np.zeros(lists.shape[0], dtype=np.int64)
    for r in range(lists.shape[0]):
        if len(probe[r]):
            out[r] = np.isin(lists[r][lists[r] >= 0], probe[r]).sum()
    return out


def _probe_rows(probe):
    return np.array([len(p) > 0 for p in probe], dtype=bool)


def precision(lists: np.ndarray, probe: Sequence[np.ndarray], L: int) -> float:
    """Mean of ``hits / L`` over users with at least one probe item."""
    rows = _probe_rows(probe)
    if not rows.any():
        return math.nan
    return float(hits_per_row(lists, probe)[rows].sum() / (L * rows.sum()))


def recall(lists: np.ndarray, probe: Sequence[np.ndarray], L: int | None = None) -> float:
    """Mean of ``hits / |probe_i|`` over users with at least one probe item."""
    rows = _probe_rows(probe)
    if not rows.any():
        return math.nan
    hits = hits_per_row(lists, probe)
    sizes = np.array([len(p) for p in probe], dtype=np.float64)
    return float(np.mean(hits[rows] / sizes[rows]))


def _list_matrix(lists: np.ndarray, n_items: int) -> sp.csr_matrix:
    lists = np.asarray(lists)
    rows, cols = np.nonzero(lists >= 0)
    data = np.ones(rows.shape[0])
    return sp.csr_matrix((data, (rows, lists[rows, cols])), shape=(lists.shape[0], n_items))


def hamming_personalization(lists: np.ndarray, L: int, n_items: int | None = None) -> float:
    """Mean over user pairs of ``1 - C_ij / L`` with ``C_ij`` the list overlap.

    Users whose list is empty are left out. The pair sum of overlaps is
    obtained from item occurrence counts, ``sum_{i<j} C_ij =
    (sum_a n_a^2 - sum_i |O_i|) / 2``, so the cost is linear in the lists.
    """
    lists = np.asarray(lists)
    keep = (lists >= 0).any(axis=1)
    lists = lists[keep]
    n = lists.shape[0]
    if n < 2:
        return math.nan
    flat = lists[lists >= 0]
    counts = np.bincount(flat, minlength=n_items or 0).astype(np.float64)
    overlap = (np.dot(counts, counts) - flat.shape[0]) / 2.0
    pairs = n * (n - 1) / 2.0
    return float(1.0 - overlap / (L * pairs))


def _cosine_factor(graph: BipartiteGraph) -> sp.csr_matrix:
    # B = A D^-1/2, so that (B^T B)_ab is the item cosine
    inv_sqrt = np.zeros(graph.n_items)
    pos = graph.k_item > 0
    inv_sqrt[pos] = 1.0 / np.sqrt(graph.k_item[pos])
    return (graph.adjacency @ sp.diags(inv_sqrt)).tocsr()


def intrasimilarity(lists: np.ndarray, graph: BipartiteGraph, L: int | None = None) -> float:
    """Mean item cosine over ordered pairs of distinct items in each list.

    Each user contributes ``sum_{a != b in O_i} s_ab / (l (l - 1))`` with
    ``l`` the list length (``L`` unless candidates ran out); users with
    fewer than two listed items are skipped.
    """
    lists = np.asarray(lists)
    lengths = (lists >= 0).sum(axis=1)
    keep = lengths >= 2
    if not keep.any():
        return math.nan
    R = _list_matrix(lists[keep], graph.n_items)
    B = _cosine_factor(graph)
    M = B @ R.T  # U x n: column i is sum of item vectors in list i
    total = np.asarray(M.multiply(M).sum(axis=0)).ravel()
    self_sim = R @ (graph.k_item > 0).astype(np.float64)  # s_aa = 1 for linked items
    l = lengths[keep].astype(np.float64)
    return float(np.mean((total - self_sim) / (l * (l - 1.0))))


def novelty(lists: np.ndarray, graph: BipartiteGraph, L: int | None = None) -> float:
    """Mean degree of the listed items."""
    flat = np.asarray(lists)
    flat = flat[flat >= 0]
    if flat.size == 0:
        return math.nan
    return float(graph.k_item[flat].mean())


def item_cosine(graph: BipartiteGraph, a: int, b: int) -> float:
    """``|users(a) & users(b)| / sqrt(k_a k_b)``; 0 when either degree is 0."""
    ka, kb = int(graph.k_item[a]), int(graph.k_item[b])
    if ka == 0 or kb == 0:
        return 0.0
    common = np.intersect1d(graph.users_of(a), graph.users_of(b), assume_unique=True).shape[0]
    return common / math.sqrt(ka * kb)


TSV_COLUMNS = ("method", "n_params", "params", "r", "P@L", "R@L", "I@L", "D@L", "N@L")


def tsv_columns(L: int) -> tuple[str, ...]:
    """Result table header with the list length filled in (``P@50`` etc.)."""
    return tuple(c.replace("@L", f"@{L}") for c in TSV_COLUMNS)


@dataclass
class MetricReport:
    """The six metrics of one evaluation (or their average over runs)."""

    r: float
    P: float
    R: float
    I: float  # noqa: E741
    D: float
    N: float
    L: int = 50
    n_users: int = 0
    method: str = ""
    params: str = ""
    std: dict = field(default_factory=dict)
    rank_normalization: str = "candidates"
    n_params: int = 0

    METRICS = ("r", "P", "R", "I", "D", "N")

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("std")
        d.pop("rank_normalization")
        return d

    def tsv_row(self, precision_digits: int = 6) -> str:
        vals = [self.method, str(self.n_params), self.params or "-"]
        vals += [_fmt(getattr(self, m), precision_digits) for m in self.METRICS]
        return "\t".join(vals)

    def tsv_header(self) -> str:
        return "\t".join(tsv_columns(self.L))

    @classmethod
    def from_tsv_row(cls, line: str, L: int = 50) -> "MetricReport":
        parts = line.rstrip("\n").split("\t")
        if len(parts) != len(TSV_COLUMNS):
            raise ValueError(f"expected {len(TSV_COLUMNS)} columns, got {len(parts)}")
        method, n_params, params, *vals = parts
        nums = [float(v) if v != "nan" else math.nan for v in vals]
        return cls(*nums, L=L, method=method, params="" if params == "-" else params, n_params=int(n_params))


def write_table(reports: Sequence[MetricReport], L: int = 50) -> str:
    """Render reports as a TSV table (header line always present)."""
    lines = ["\t".join(tsv_columns(L))] + [r.tsv_row() for r in reports]
    return "\n".join(lines) + "\n"


def read_table(text: str) -> list[MetricReport]:
    """Parse a table written by :func:`write_table`; ``L`` is read from the header."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty table")
    header = lines[0].split("\t")
    if len(header) != len(TSV_COLUMNS) or header[0] != "method" or not header[4].startswith("P@"):
        raise ValueError(f"not a result table header: {lines[0]!r}")
    L = int(header[4][2:])
    return [MetricReport.from_tsv_row(ln, L) for ln in lines[1:]]


def _fmt(v: float, digits: int) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    return f"{v:.{digits}f}"
