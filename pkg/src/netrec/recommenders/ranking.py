"""Candidate ranking: collected items removed, ties given mid-ranks."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .._backend import get_backend
from ..graph import BipartiteGraph
from ._base import ScoreVector

__all__ = ["RankedCandidates", "rank_candidates", "top_lists", "target_ranks"]


class RankedCandidates(NamedTuple):
    items: np.ndarray  # candidate items, best first (ties by ascending id)
    ranks: np.ndarray  # mid-rank of each entry of ``items``


def rank_candidates(scores: ScoreVector | np.ndarray, graph: BipartiteGraph, user: int) -> RankedCandidates:
    """Order the ``I - k_user`` uncollected items by descending score.

    Items in a block of equal scores share the average of the positions the
    block occupies, so a full tie over 100 candidates ranks every item 50.5.
    """
    s = scores.scores if isinstance(scores, ScoreVector) else np.asarray(scores, dtype=np.float64)
    cand = np.ones(graph.n_items, dtype=bool)
    cand[graph.items_of(user)] = False
    items = np.flatnonzero(cand)
    if items.size == 0:
        return RankedCandidates(items, np.empty(0))
    vals = s[items]
    order = np.argsort(-vals, kind="stable")
    items, vals = items[order], vals[order]
    # block boundaries of equal values in the sorted list
    starts = np.flatnonzero(np.r_[True, vals[1:] != vals[:-1]])
    ends = np.r_[starts[1:], vals.size]
    mid = (starts + 1 + ends) / 2.0
    ranks = np.repeat(mid, ends - starts)
    return RankedCandidates(items, ranks)


def top_lists(S: np.ndarray, graph: BipartiteGraph, users: np.ndarray, L: int) -> np.ndarray:
    """Top-``L`` uncollected items per row of ``S`` (rows correspond to ``users``).

    Ordered by descending score, ties by ascending item id. Rows with fewer
    than ``L`` candidates are padded with ``-1``.
    """
    users = np.asarray(users, dtype=np.int64)
    S = np.array(S, dtype=np.float64, copy=True)
    for r, u in enumerate(users):
        S[r, graph.items_of(u)] = -np.inf
    L_eff = min(L, graph.n_items)
    if L_eff < graph.n_items:
        # partial selection, then an exact stable order inside the selection
        part = np.argpartition(-S, L_eff - 1, axis=1)[:, :L_eff]
        thresh = np.take_along_axis(S, part, axis=1).min(axis=1, keepdims=True)
        out = np.empty((S.shape[0], L_eff), dtype=np.int64)
        for r in range(S.shape[0]):
            row = S[r]
            keep = np.flatnonzero(row >= thresh[r, 0])
            order = np.lexsort((keep, -row[keep]))
            out[r] = keep[order[:L_eff]]
    else:
        out = np.argsort(-S, axis=1, kind="stable")[:, :L_eff]
    picked = np.take_along_axis(S, out, axis=1)
    out[np.isneginf(picked)] = -1
    if L_eff < L:
        out = np.hstack([out, np.full((S.shape[0], L - L_eff), -1, dtype=np.int64)])
    return out


def target_ranks(
    S: np.ndarray,
    graph: BipartiteGraph,
    users: np.ndarray,
    targets: list[np.ndarray],
    backend=None,
) -> tuple[np.ndarray, np.ndarray]:
    """Mid-ranks of held-out ``targets[r]`` among the candidates of ``users[r]``.

    Returns ``(ranks, n_candidates)`` where ``ranks`` is flat in row order
    and ``n_candidates[r] = I - k_user``.
    """
    core = get_backend(backend) if not hasattr(backend, "target_ranks") else backend
    users = np.asarray(users, dtype=np.int64)
    excl_ptr = np.zeros(users.shape[0] + 1, dtype=np.int64)
    np.cumsum(graph.k_user[users], out=excl_ptr[1:])
    excl_idx = (
        np.concatenate([graph.items_of(u) for u in users]).astype(np.int32)
        if users.size
        else np.empty(0, dtype=np.int32)
    )
    tgt_ptr = np.zeros(users.shape[0] + 1, dtype=np.int64)
    np.cumsum([len(t) for t in targets], out=tgt_ptr[1:])
    tgt_idx = (
        np.concatenate([np.asarray(t, dtype=np.int32) for t in targets])
        if len(targets)
        else np.empty(0, dtype=np.int32)
    )
    return core.target_ranks(
        np.ascontiguousarray(S, dtype=np.float64), excl_ptr, excl_idx, tgt_ptr, tgt_idx.astype(np.int32)
    )
