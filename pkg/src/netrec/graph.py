"""Immutable sparse bipartite user-item network.

Both adjacency directions are stored in CSR form (an ``indptr`` offsets
array plus a flat, per-row sorted ``indices`` array), so each spreading
step is a linear scan over one of them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Literal

import numpy as np
import scipy.sparse as sp

__all__ = ["BipartiteGraph", "PowerTable", "build_graph", "power_table", "degree_power"]


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BipartiteGraph:
    """User-item links with dual sorted adjacency and degree arrays.

    Users are ``0..n_users-1`` and items ``0..n_items-1``. Items (or users)
    without links are allowed; they simply have degree zero.
    """

    n_users: int
    n_items: int
    user_indptr: np.ndarray
    user_indices: np.ndarray
    item_indptr: np.ndarray
    item_indices: np.ndarray
    k_user: np.ndarray
    k_item: np.ndarray
    user_labels: np.ndarray | None = field(default=None, repr=False)
    item_labels: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_links(self) -> int:
        return int(self.user_indices.shape[0])

    # short aliases matching the usual U, I, L notation
    U = property(lambda self: self.n_users)
    I = property(lambda self: self.n_items)  # noqa: E741
    L = property(lambda self: self.n_links)

    def items_of(self, user: int) -> np.ndarray:
        return self.user_indices[self.user_indptr[user] : self.user_indptr[user + 1]]

    def users_of(self, item: int) -> np.ndarray:
        return self.item_indices[self.item_indptr[item] : self.item_indptr[item + 1]]

    @property
    def user_adj(self) -> list[np.ndarray]:
        return [self.items_of(u) for u in range(self.n_users)]

    @property
    def item_adj(self) -> list[np.ndarray]:
        return [self.users_of(a) for a in range(self.n_items)]

    def links(self) -> np.ndarray:
        """All links as an ``(L, 2)`` array of ``(user, item)``, user-major."""
        users = np.repeat(np.arange(self.n_users, dtype=np.int64), self.k_user)
        return np.column_stack([users, self.user_indices.astype(np.int64)])

    def has_link(self, user: int, item: int) -> bool:
        row = self.items_of(user)
        pos = np.searchsorted(row, item)
        return bool(pos < row.size and row[pos] == item)

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """``U x I`` 0/1 matrix in CSR form (float64)."""
        data = np.ones(self.n_links, dtype=np.float64)
        return sp.csr_matrix(
            (data, self.user_indices, self.user_indptr), shape=(self.n_users, self.n_items)
        )

    @cached_property
    def adjacency_t(self) -> sp.csr_matrix:
        """``I x U`` transpose of :attr:`adjacency`, also CSR."""
        data = np.ones(self.n_links, dtype=np.float64)
        return sp.csr_matrix(
            (data, self.item_indices, self.item_indptr), shape=(self.n_items, self.n_users)
        )

    @property
    def density(self) -> float:
        cells = self.n_users * self.n_items
        return self.n_links / cells if cells else 0.0

    def summary(self) -> dict:
        """Basic dataset properties (counts, density, mean and max degrees)."""
        ku, ki = self.k_user, self.k_item
        return {
            "U": self.n_users,
            "I": self.n_items,
            "L": self.n_links,
            "density": self.density,
            "mean_k_user": float(ku.mean()) if ku.size else 0.0,
            "max_k_user": int(ku.max()) if ku.size else 0,
            "mean_k_item": float(ki.mean()) if ki.size else 0.0,
            "max_k_item": int(ki.max()) if ki.size else 0,
        }


def _csr_from_pairs(rows: np.ndarray, cols: np.ndarray, n_rows: int):
    # pairs are unique; lexsort gives row-major order with sorted columns
    order = np.lexsort((cols, rows))
    indices = cols[order].astype(np.int32)
    counts = np.bincount(rows, minlength=n_rows).astype(np.int64)
    indptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, indices, counts


def build_graph(
    links: Iterable[tuple[int, int]] | np.ndarray,
    n_users: int | None = None,
    n_items: int | None = None,
    *,
    user_labels=None,
    item_labels=None,
) -> BipartiteGraph:
    """Build a :class:`BipartiteGraph` from ``(user, item)`` pairs.

    Duplicate pairs are collapsed. ``n_users``/``n_items`` default to one
    past the largest id seen; pass them explicitly to keep an id space
    shared between several graphs (e.g. a training and a full graph).
    """
    arr = np.asarray(list(links) if not isinstance(links, np.ndarray) else links, dtype=np.int64)
    if arr.size == 0:
        arr = arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("links must be a sequence of (user, item) pairs")
    if (arr < 0).any():
        raise ValueError("user and item ids must be non-negative")

    nu = int(arr[:, 0].max()) + 1 if arr.shape[0] else 0
    ni = int(arr[:, 1].max()) + 1 if arr.shape[0] else 0
    if n_users is None:
        n_users = nu
    elif n_users < nu:
        raise ValueError(f"user id {nu - 1} out of range for n_users={n_users}")
    if n_items is None:
        n_items = ni
    elif n_items < ni:
        raise ValueError(f"item id {ni - 1} out of range for n_items={n_items}")

    if arr.shape[0]:
        arr = np.unique(arr, axis=0)
    users, items = arr[:, 0], arr[:, 1]

    uptr, uidx, ku = _csr_from_pairs(users, items, n_users)
    iptr, iidx, ki = _csr_from_pairs(items, users, n_items)

    return BipartiteGraph(
        n_users=int(n_users),
        n_items=int(n_items),
        user_indptr=_frozen(uptr),
        user_indices=_frozen(uidx),
        item_indptr=_frozen(iptr),
        item_indices=_frozen(iidx),
        k_user=_frozen(ku),
        k_item=_frozen(ki),
        user_labels=user_labels,
        item_labels=item_labels,
    )


def degree_power(d, exponent: float) -> np.ndarray:
    """``d ** exponent`` for integer degrees, with exact special cases.

    Exponents 0, 1 and -1 are evaluated exactly (``1``, ``d``, ``1/d``) so
    that kernels reduce bit-for-bit to one another at those settings.
    Degree 0 always maps to 0: a node without links never carries resource.
    """
    d = np.asarray(d, dtype=np.float64)
    e = float(exponent)
    if not np.isfinite(e):
        raise ValueError(f"exponent must be finite, got {exponent!r}")
    with np.errstate(divide="ignore"):
        if e == 0.0:
            out = np.ones_like(d)
        elif e == 1.0:
            out = d.copy()
        elif e == -1.0:
            out = 1.0 / d
        else:
            out = np.power(d, e)
    out[d == 0] = 0.0
    return out


@dataclass(frozen=True, eq=False)
class PowerTable:
    """Lookup table of ``d ** exponent`` for degrees ``d = 1..k_max``.

    ``table[0]`` is a zero pad so the table can be indexed directly with
    degree arrays; degree 0 never occurs on a link.
    """

    exponent: float
    table: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return self.table[1:]

    def __len__(self) -> int:
        return self.table.shape[0] - 1

    def __getitem__(self, d):
        return self.table[d]

    def lookup(self, degrees: np.ndarray) -> np.ndarray:
        return self.table[degrees]


def power_table(
    graph: BipartiteGraph, side: Literal["user", "item"], exponent: float
) -> PowerTable:
    """Precompute degree powers for one side of ``graph``."""
    if side == "user":
        k = graph.k_user
    elif side == "item":
        k = graph.k_item
    else:
        raise ValueError(f"side must be 'user' or 'item', got {side!r}")
    kmax = int(k.max()) if k.size else 0
    table = degree_power(np.arange(kmax + 1), exponent)
    return PowerTable(float(exponent), _frozen(table))
