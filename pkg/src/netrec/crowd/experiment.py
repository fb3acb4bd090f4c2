"""Occupancy sweep: precision and diversity of constrained assignments versus ``m``."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..ingest import split_triple
from ..metrics import hits_per_row
from ..recommenders import KernelContext, MethodSpec, indicator_rows
from .assign import (
    Assignment,
    InfeasibleError,
    RankMatrix,
    assign_hungarian,
    assign_local,
    assign_mpo,
    assign_sa,
)

__all__ = [
    "SOLVERS",
    "CROWD_COLUMNS",
    "CrowdRow",
    "CrowdResult",
    "dense_subset",
    "solve",
    "run_crowd",
    "precision_gains",
]

logger = logging.getLogger(__name__)

SOLVERS = ("mpo", "local", "sa", "hungarian")
_ALIASES = {"loc": "local", "ha": "hungarian", "hungarian": "hungarian", "mpo": "mpo", "local": "local", "sa": "sa"}
CROWD_COLUMNS = ("m", "solver", "objective", "precision", "n_eff", "seed")


def _solver_name(name: str) -> str:
    try:
        return _ALIASES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown solver {name!r}; choose from {', '.join(SOLVERS)}") from None


def dense_subset(links: np.ndarray, n_items: int = 500, min_user_links: int = 10) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Restrict to the ``n_items`` most-linked items and users with at least ``min_user_links`` of them.

    Degree ties are broken by item id. Returns the relabelled links and the
    original ids of the kept users and items.
    """
    links = np.asarray(links, dtype=np.int64).reshape(-1, 2)
    if links.shape[0] == 0:
        return links, np.zeros(0, np.int64), np.zeros(0, np.int64)
    k = np.bincount(links[:, 1])
    items = np.sort(np.argsort(-k, kind="stable")[: min(n_items, k.shape[0])])
    sub = links[np.isin(links[:, 1], items)]
    ku = np.bincount(sub[:, 0], minlength=int(links[:, 0].max()) + 1)
    users = np.flatnonzero(ku >= min_user_links)
    sub = sub[np.isin(sub[:, 0], users)]
    items = np.unique(sub[:, 1])
    relabelled = np.column_stack([np.searchsorted(users, sub[:, 0]), np.searchsorted(items, sub[:, 1])])
    return relabelled, users, items


@dataclass(frozen=True)
class CrowdRow:
    m: float
    solver: str
    objective: float
    precision: float
    n_eff: float
    seed: int

    def tsv_row(self) -> str:
        m = "inf" if math.isinf(self.m) else str(int(self.m))
        return "\t".join([m, self.solver, f"{self.objective:.1f}", f"{self.precision:.6f}", f"{self.n_eff:.4f}", str(self.seed)])

    @staticmethod
    def tsv_header() -> str:
        return "\t".join(CROWD_COLUMNS)

    @classmethod
    def from_tsv_row(cls, line: str) -> "CrowdRow":
        m, solver, obj, p, n, seed = line.rstrip("\n").split("\t")
        return cls(float(m), solver, float(obj), float(p), float(n), int(seed))


@dataclass
class CrowdResult:
    rows: list
    method: str
    params: dict
    n_users: int
    n_items: int
    n_probe_users: int
    seconds: float = 0.0
    info: list = field(default_factory=list)

    def to_tsv(self) -> str:
        return "\n".join([CrowdRow.tsv_header()] + [r.tsv_row() for r in self.rows]) + "\n"


def solve(
    ranks: RankMatrix,
    solver: str,
    m,
    L: int = 1,
    seed: int = 0,
    *,
    pool_size: int | None = 500,
    T0: float = 1e4,
    cooling: float = 0.95,
    macro_cap: int = 1000,
    one_user_moves: bool = False,
    backend=None,
) -> Assignment:
    """Dispatch to one of the four solvers by name (``mpo``, ``local``/``loc``, ``sa``, ``hungarian``/``ha``)."""
    name = _solver_name(solver)
    if name == "mpo":
        return assign_mpo(ranks, m, L, seed)
    if name == "local":
        return assign_local(ranks, m, L, seed, one_user_moves=one_user_moves, backend=backend)
    if name == "sa":
        return assign_sa(ranks, m, L, seed, T0, cooling, macro_cap, one_user_moves=one_user_moves, backend=backend)
    return assign_hungarian(ranks, m, L, pool_size, backend=backend)


def _assignment_precision(a: Assignment, probe_rows: Sequence[np.ndarray]) -> float:
    with_probe = np.array([len(p) > 0 for p in probe_rows], dtype=bool)
    if not with_probe.any():
        return math.nan
    hits = hits_per_row(a.items, probe_rows)
    return float(hits[with_probe].sum() / (a.L * with_probe.sum()))


def run_crowd(
    links,
    m_values: Sequence = (math.inf,),
    solvers: Sequence[str] = SOLVERS,
    method: str | MethodSpec = "ProbS-HeatS",
    params: Mapping[str, float] | None = None,
    *,
    seed: int = 0,
    L: int = 1,
    n_users: int | None = None,
    n_items: int | None = None,
    learning_fraction: float = 0.10,
    probe_fraction: float = 0.10,
    grid=None,
    pool_size: int | None = 500,
    T0: float = 1e4,
    cooling: float = 0.95,
    macro_cap: int = 1000,
    one_user_moves: bool = False,
    backend=None,
) -> CrowdResult:
    """Sweep ``m`` for each solver on one triple split of ``links``.

    Free method parameters are learned on the learning set unless given in
    ``params``. Ranks come from scores on training plus learning links, and
    precision counts assigned items found in the user's probe links.
    Infeasible ``m`` values are skipped with a warning.
    """
    from ..evaluation import learn_parameters  # deferred: evaluation imports recommenders only

    t0 = time.perf_counter()
    arr = np.asarray(links, dtype=np.int64).reshape(-1, 2)
    nu = n_users if n_users is not None else int(arr[:, 0].max()) + 1
    ni = n_items if n_items is not None else int(arr[:, 1].max()) + 1
    split = split_triple(arr, learning_fraction, probe_fraction, seed, nu, ni)
    spec = method if isinstance(method, MethodSpec) else MethodSpec.parse(method)
    if params:
        spec = spec.with_params(**params)
    free = [p for p in spec.kernel.free_params if p not in spec.params]
    if free:
        learned = learn_parameters(split.training_graph(), split.learning, spec, grid, backend=backend)
        spec = spec.with_params(**learned.params)
    graph = split.merged_graph()
    users = np.flatnonzero(graph.k_user > 0)
    ctx = KernelContext(graph, backend)
    S = spec.kernel.score(ctx, indicator_rows(graph, users), **spec.params)
    ranks = RankMatrix.from_scores(S, graph, users)
    probe = split.probe
    by_user: dict[int, list] = {}
    for u, a in probe:
        by_user.setdefault(int(u), []).append(int(a))
    probe_rows = [np.asarray(by_user.get(int(u), []), dtype=np.int64) for u in users]
    rows, info = [], []
    for name in (_solver_name(s) for s in solvers):
        for m in m_values:
            m = float(m)
            try:
                a = solve(
                    ranks, name, m, L, seed, pool_size=pool_size, T0=T0, cooling=cooling,
                    macro_cap=macro_cap, one_user_moves=one_user_moves, backend=backend,
                )
            except InfeasibleError as exc:
                logger.warning("skipping m=%s for %s: %s", m, name, exc)
                continue
            rows.append(CrowdRow(m, name, a.objective, _assignment_precision(a, probe_rows), a.n_eff(), seed))
            info.append({"m": m, "solver": name, **a.info})
    return CrowdResult(
        rows,
        spec.name,
        dict(spec.params),
        int(users.shape[0]),
        int(graph.n_items),
        int(sum(len(p) > 0 for p in probe_rows)),
        time.perf_counter() - t0,
        info,
    )


def precision_gains(rows: Sequence[CrowdRow], baseline: float | None = None) -> dict:
    """Per solver: best precision over ``m``, the ``m`` attaining it, and its gain.

    The gain is relative to ``baseline``, by default the unconstrained
    (``m = inf``) MPO precision of the same rows. Ties in precision go to
    the larger ``m``.
    """
    if baseline is None:
        base = [r.precision for r in rows if r.solver == "mpo" and math.isinf(r.m)]
        if not base:
            raise ValueError("no unconstrained MPO row to use as baseline")
        baseline = base[0]
    out = {}
    for name in SOLVERS:
        mine = [r for r in rows if r.solver == name]
        if not mine:
            continue
        best = max(mine, key=lambda r: (r.precision, r.m))
        out[name] = {"m": best.m, "precision": best.precision, "gain": best.precision / baseline - 1.0, "n_eff": best.n_eff}
    return out
