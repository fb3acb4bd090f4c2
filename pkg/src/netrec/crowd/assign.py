"""Assigning items to users under a per-item occupancy limit.

Every user receives ``L`` distinct items; no item may be given to more than
``m`` users. The objective is the total rank of the assigned items in the
users' own recommendation lists, so lower is better.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .._backend import get_backend
from ..graph import BipartiteGraph

__all__ = [
    "RankMatrix",
    "Assignment",
    "InfeasibleError",
    "assign_mpo",
    "assign_local",
    "assign_sa",
    "assign_hungarian",
    "delta_rank",
    "effective_items",
]

logger = logging.getLogger(__name__)


class InfeasibleError(ValueError):
    """The occupancy limit cannot accommodate every user."""


@dataclass(frozen=True, eq=False)
class RankMatrix:
    """Per-user ranks of candidate items.

    ``cost[i, a]`` is the 1-based position of item ``a`` in user ``i``'s
    list, ``inf`` for non-candidates. Ranks within a user are distinct:
    equal scores are ordered by ascending item id. ``prefs[i]`` lists the
    candidates best first, padded with ``-1``.
    """

    cost: np.ndarray
    prefs: np.ndarray
    n_candidates: np.ndarray
    users: np.ndarray | None = None  # row -> user id in the source graph

    @property
    def n_users(self) -> int:
        return self.cost.shape[0]

    @property
    def n_items(self) -> int:
        return self.cost.shape[1]

    @classmethod
    def from_scores(
        cls, scores: np.ndarray, graph: BipartiteGraph | None = None, users=None, pool: int | None = None
    ) -> "RankMatrix":
        """Rank the uncollected items of each row of ``scores``.

        ``pool`` keeps only each user's ``pool`` best candidates.
        """
        S = np.asarray(scores, dtype=np.float64)
        U, I = S.shape
        cand = np.ones((U, I), dtype=bool)
        if graph is not None:
            rows = np.arange(U) if users is None else np.asarray(users)
            for r, u in enumerate(rows):
                cand[r, graph.items_of(u)] = False
        # descending score, ties by ascending id; non-candidates last
        key = np.where(cand, -S, np.inf)
        prefs = np.argsort(key, axis=1, kind="stable")
        n_cand = cand.sum(axis=1)
        if pool is not None:
            n_cand = np.minimum(n_cand, pool)
        cost = np.full((U, I), np.inf)
        width = int(n_cand.max()) if U else 0
        prefs = prefs[:, :width].astype(np.int64)
        for r in range(U):
            n = n_cand[r]
            cost[r, prefs[r, :n]] = np.arange(1, n + 1, dtype=np.float64)
            prefs[r, n:] = -1
        return cls(cost, prefs, n_cand.astype(np.int64), None if users is None else np.asarray(users))

    @classmethod
    def from_ranks(cls, ranks) -> "RankMatrix":
        """Build from an explicit ``U x I`` rank array (``inf``, ``nan`` or ``0`` = not a candidate)."""
        R = np.array(ranks, dtype=np.float64)
        R[~np.isfinite(R) | (R <= 0)] = np.inf
        U, I = R.shape
        prefs = np.argsort(R, axis=1, kind="stable")
        n_cand = np.isfinite(R).sum(axis=1)
        width = int(n_cand.max()) if U else 0
        prefs = prefs[:, :width].astype(np.int64)
        for r in range(U):
            prefs[r, n_cand[r] :] = -1
        return cls(R, prefs, n_cand.astype(np.int64))


@dataclass
class Assignment:
    """``items[i]`` holds the ``L`` items given to user ``i``."""

    items: np.ndarray  # U x L
    occupancy: np.ndarray  # per item
    objective: float
    m: float
    solver: str = ""
    info: dict = field(default_factory=dict)

    @property
    def L(self) -> int:
        return self.items.shape[1]

    @property
    def n_users(self) -> int:
        return self.items.shape[0]

    def recompute_objective(self, ranks: RankMatrix) -> float:
        return float(np.take_along_axis(ranks.cost, self.items, axis=1).sum())

    def n_eff(self) -> float:
        return effective_items(self.occupancy, self.L, self.n_users)


def _capacity(m, n_users: int) -> int:
    if m is None or (isinstance(m, float) and math.isinf(m)):
        return max(n_users, 1)
    if m < 1 or int(m) != m:
        raise ValueError(f"m must be a positive integer or inf, got {m}")
    return int(min(m, max(n_users, 1)))


def _check_feasible(ranks: RankMatrix, cap: int, L: int) -> None:
    if (ranks.n_candidates < L).any():
        i = int(np.flatnonzero(ranks.n_candidates < L)[0])
        raise InfeasibleError(f"user row {i} has fewer than L={L} candidate items")
    usable = int(((np.isfinite(ranks.cost)).any(axis=0)).sum())
    if cap * usable < L * ranks.n_users:
        raise InfeasibleError(
            f"m={cap} with {usable} usable items cannot serve {ranks.n_users} users x L={L}"
        )


def _finish(ranks: RankMatrix, items: np.ndarray, m, solver: str, info: dict) -> Assignment:
    occ = np.bincount(items.ravel(), minlength=ranks.n_items)
    obj = float(np.take_along_axis(ranks.cost, items, axis=1).sum())
    return Assignment(items, occ, obj, m, solver, info)


def assign_mpo(ranks: RankMatrix, m=math.inf, L: int = 1, seed: int = 0) -> Assignment:
    """Most-preferred available item, users visited in a seeded random order.

    Each user in turn takes its best-ranked item that fewer than ``m``
    users hold and that it does not already hold; for ``L > 1`` the same
    order is cycled ``L`` times.
    """
    cap = _capacity(m, ranks.n_users)
    _check_feasible(ranks, cap, L)
    U = ranks.n_users
    order = np.random.default_rng(seed).permutation(U)
    occ = np.zeros(ranks.n_items, dtype=np.int64)
    items = np.full((U, L), -1, dtype=np.int64)
    for slot in range(L):
        for i in order:
            prefs = ranks.prefs[i, : ranks.n_candidates[i]]
            ok = occ[prefs] < cap
            if slot:
                ok &= ~np.isin(prefs, items[i, :slot])
            pos = np.flatnonzero(ok)
            if pos.size == 0:
                raise InfeasibleError(f"no item left for user row {i} (m={m})")
            a = prefs[pos[0]]
            items[i, slot] = a
            occ[a] += 1
    return _finish(ranks, items, m, "mpo", {"order_seed": seed})


def delta_rank(assignment: Assignment, ranks: RankMatrix, i: int, j: int, slot_i: int = 0, slot_j: int = 0) -> float:
    """Objective change if users ``i`` and ``j`` exchanged the given items.

    ``r_i(b_j) + r_j(b_i) - r_i(b_i) - r_j(b_j)``; zero when ``i == j`` or
    both hold the same item. Swaps leave every occupancy unchanged.
    """
    bi = assignment.items[i, slot_i]
    bj = assignment.items[j, slot_j]
    if i == j or bi == bj:
        return 0.0
    c = ranks.cost
    return float(c[i, bj] + c[j, bi] - c[i, bi] - c[j, bj])


def _swap_rng(seed: int) -> np.random.Generator:
    # independent of the MPO ordering stream
    return np.random.default_rng([int(seed), 0x5A])


def _one_user_sweep(cost, items, occ, cap, rng, n, T, greedy) -> int:
    # move one of a user's items to a random item that still has room
    U, L = items.shape
    I = cost.shape[1]
    users = rng.integers(0, U, n)
    slots = rng.integers(0, L, n)
    targets = rng.integers(0, I, n)
    uu = rng.random(n)
    accepted = 0
    for t in range(n):
        i, s, a = users[t], slots[t], targets[t]
        b = items[i, s]
        if a == b or occ[a] >= cap or a in items[i]:
            continue
        d = cost[i, a] - cost[i, b]
        if not d < math.inf:
            continue
        if d < 0 or (d > 0 and not greedy and T > 0 and uu[t] < math.exp(-d / T)):
            items[i, s] = a
            occ[a] += 1
            occ[b] -= 1
            accepted += 1
    return accepted


def _anneal(ranks, start: Assignment, seed, T0, cooling, macro_cap, micro_per_macro, greedy, one_user_moves, backend,
            keep_best=False):
    core = get_backend(backend) if not hasattr(backend, "anneal_sweep") else backend
    cost = np.ascontiguousarray(ranks.cost)
    items = np.ascontiguousarray(start.items.copy())
    U, L = items.shape
    n = int(micro_per_macro if micro_per_macro is not None else 100 * U)
    rng = _swap_rng(seed)
    cap = _capacity(start.m, U)
    occ = start.occupancy.copy()
    best = items.copy() if keep_best else None
    objective = best_objective = start.objective
    T = float(T0)
    total_accepted = 0
    macro = 0
    for macro in range(1, int(macro_cap) + 1):
        ii = rng.integers(0, U, n)
        jj = rng.integers(0, U, n)
        si = rng.integers(0, L, n)
        sj = rng.integers(0, L, n)
        uu = rng.random(n)
        accepted, delta, best_objective = core.anneal_sweep(
            cost, items, ii, jj, si, sj, uu, T, greedy, best, objective, best_objective
        )
        objective += delta
        if one_user_moves:
            moved = _one_user_sweep(cost, items, occ, cap, rng, n, T, greedy)
            if moved:
                objective = float(np.take_along_axis(cost, items, axis=1).sum())
                if keep_best and objective < best_objective:
                    best_objective = objective
                    best[...] = items
            accepted += moved
        total_accepted += accepted
        T *= cooling
        if accepted == 0:
            break
    info = {"macro_steps": macro, "accepted": total_accepted, "final_T": T, "final_objective": objective}
    return (best if keep_best else items), info


def assign_local(
    ranks: RankMatrix,
    m=math.inf,
    L: int = 1,
    seed: int = 0,
    *,
    macro_cap: int = 100_000,
    micro_per_macro: int | None = None,
    one_user_moves: bool = False,
    backend=None,
) -> Assignment:
    """Greedy pair swaps from the MPO start, keeping only improving swaps.

    Runs macro steps of ``100 U`` random swap attempts until one macro step
    changes nothing.
    """
    start = assign_mpo(ranks, m, L, seed)
    items, info = _anneal(ranks, start, seed, 0.0, 1.0, macro_cap, micro_per_macro, True, one_user_moves, backend)
    return _finish(ranks, items, m, "local", info)


def assign_sa(
    ranks: RankMatrix,
    m=math.inf,
    L: int = 1,
    seed: int = 0,
    T0: float = 1e4,
    cooling: float = 0.95,
    macro_cap: int = 1000,
    micro_per_macro: int | None = None,
    *,
    keep_best: bool = True,
    one_user_moves: bool = False,
    backend=None,
) -> Assignment:
    """Simulated annealing over pair swaps from the MPO start.

    A swap that lowers the objective is always taken; one that raises it by
    ``d`` is taken with probability ``exp(-d / T)``; swaps that leave it
    unchanged are not taken. ``T`` starts at ``T0`` and is multiplied by
    ``cooling`` after each macro step of ``100 U`` attempts. The run stops
    after a macro step without any change or after ``macro_cap`` steps.
    ``T0 = 0`` gives the greedy local search.

    With ``keep_best`` the lowest-objective configuration visited is
    returned (never worse than the MPO start); otherwise the final one, whose
    objective is also reported as ``info["final_objective"]``.
    """
    if not (0.0 < cooling <= 1.0):
        raise ValueError("cooling must be in (0, 1]")
    start = assign_mpo(ranks, m, L, seed)
    greedy = T0 <= 0.0
    items, info = _anneal(
        ranks, start, seed, T0, cooling, macro_cap, micro_per_macro, greedy, one_user_moves, backend, keep_best
    )
    return _finish(ranks, items, m, "sa", info)


def _pools(ranks: RankMatrix, size: int) -> tuple[np.ndarray, np.ndarray]:
    n = np.minimum(ranks.n_candidates, size)
    ptr = np.zeros(ranks.n_users + 1, dtype=np.int64)
    np.cumsum(n, out=ptr[1:])
    idx = np.concatenate([ranks.prefs[i, : n[i]] for i in range(ranks.n_users)]).astype(np.int32)
    return ptr, idx


def _certified(cost, pool_ptr, pool_idx, pu, pi, tol=1e-7) -> bool:
    """Reduced costs are non-negative on every candidate pair outside the pools too."""
    reduced = cost + pu[:, None] - pi[None, :]
    finite = np.isfinite(cost)
    in_pool = np.zeros_like(finite)
    rows = np.repeat(np.arange(cost.shape[0]), np.diff(pool_ptr))
    in_pool[rows, pool_idx] = True
    outside = finite & ~in_pool
    return bool((reduced[outside] >= -tol).all()) if outside.any() else True


def assign_hungarian(
    ranks: RankMatrix, m=math.inf, L: int = 1, pool_size: int | None = 500, *, backend=None
) -> Assignment:
    """Exact minimum total rank with at most ``m`` users per item (``L = 1``).

    Equivalent to an assignment problem on ``m`` copies of every item,
    solved as a min-cost flow by successive shortest paths so the copies
    never need to be materialized. Each user initially considers only its
    ``pool_size`` best candidates; pools are doubled whenever the reduced
    problem is infeasible or its optimality certificate (dual feasibility on
    all candidate pairs) fails, so the result is always the global optimum.
    """
    if L != 1:
        raise ValueError("the exact solver handles L = 1 only")
    core = get_backend(backend) if not hasattr(backend, "assign_capacitated") else backend
    cap = _capacity(m, ranks.n_users)
    _check_feasible(ranks, cap, L)
    full = int(ranks.n_candidates.max()) if ranks.n_users else 0
    size = full if pool_size is None else max(1, min(int(pool_size), full))
    cost = np.ascontiguousarray(ranks.cost)
    widenings = 0
    while True:
        ptr, idx = _pools(ranks, size)
        assign, pu, pi, _pt, feasible = core.assign_capacitated(cost, ptr, idx, cap)
        if feasible and (size >= full or _certified(cost, ptr, idx, pu, pi)):
            break
        if size >= full:
            raise InfeasibleError(f"no feasible assignment with m={m}")
        size = min(2 * size, full)
        widenings += 1
    info = {"pool_size": size, "widenings": widenings, "exact": True}
    return _finish(ranks, assign.reshape(-1, 1).astype(np.int64), m, "hungarian", info)


def effective_items(occupancy, L: int, U: int) -> float:
    """Inverse participation ratio ``(L U)^2 / sum_a n_a^2`` of item occupancies.

    Equals ``L`` when all users get the same ``L`` items and the number of
    items when occupancy is uniform.
    """
    occ = np.asarray(occupancy.occupancy if isinstance(occupancy, Assignment) else occupancy, dtype=np.float64)
    denom = float(np.dot(occ, occ))
    return (L * U) ** 2 / denom if denom else math.nan
