"""Split, learn parameters on held-out links, evaluate on the probe, average.

Scoring is batched over users: each batch of initial-resource rows is
propagated once per structural parameter setting (see
:class:`~netrec.recommenders.Kernel`), and all cheap parameter settings are
ranked from those components. The probe of a triple split is read only by
the final metric pass, which :attr:`EvaluationRun.probe_reads_before_final`
records.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .graph import BipartiteGraph
from .ingest import SplitSet, split_double, split_triple
from .metrics import (
    MetricReport,
    hamming_personalization,
    hits_per_row,
    intrasimilarity,
    novelty,
    ranking_score,
)
from .recommenders import KernelContext, MethodSpec, get_kernel, indicator_rows, top_lists

__all__ = [
    "ParameterGrid",
    "HeldOut",
    "LearnResult",
    "EvaluationRun",
    "default_grid",
    "learn_parameters",
    "evaluate_fixed",
    "run_triple",
    "run_double",
    "run_many",
    "average_runs",
]

logger = logging.getLogger(__name__)

DEFAULT_BATCH = 1024
COARSE_STEP = 0.25
FINE_STEP = 0.05
FINE_HALF_WIDTH = 0.25
RANK_NORMALIZATIONS = ("candidates", "catalogue")


def _axis(lo: float, hi: float, step: float) -> np.ndarray:
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    # rounding keeps grid values such as 0.0 and 1.0 exact
    return np.round(lo + step * np.arange(n), 10)


@dataclass(frozen=True)
class ParameterGrid:
    """Per-parameter ``(low, high, step)`` search ranges."""

    ranges: Mapping[str, tuple[float, float, float]]

    def __post_init__(self):
        for name, (lo, hi, step) in self.ranges.items():
            if not (math.isfinite(lo) and math.isfinite(hi) and math.isfinite(step)):
                raise ValueError(f"grid for {name} must be finite")
            if step <= 0:
                raise ValueError(f"grid step for {name} must be > 0")
            if hi < lo:
                raise ValueError(f"grid for {name}: high < low")

    def points(self, name: str) -> np.ndarray:
        return _axis(*self.ranges[name])

    @property
    def size(self) -> int:
        return int(np.prod([self.points(n).shape[0] for n in self.ranges])) if self.ranges else 1

    def restricted(self, names: Iterable[str]) -> "ParameterGrid":
        return ParameterGrid({n: self.ranges[n] for n in names})

    def with_overrides(self, overrides: Mapping[str, tuple[float, float, float]]) -> "ParameterGrid":
        return ParameterGrid({**self.ranges, **{k: v for k, v in overrides.items() if k in self.ranges}})

    @staticmethod
    def parse_override(text: str) -> tuple[str, tuple[float, float, float]]:
        """``"theta=-2:2:0.1"`` -> ``("theta", (-2.0, 2.0, 0.1))``."""
        try:
            name, spec = text.split("=", 1)
            lo, hi, step = (float(x) for x in spec.split(":"))
        except ValueError as exc:
            raise ValueError(f"grid override must look like KEY=LO:HI:STEP, got {text!r}") from exc
        return name.strip(), (lo, hi, step)


_DEFAULT_RANGES = {
    "theta": (-2.0, 2.0, 0.1),
    "epsilon": (-2.0, 2.0, 0.1),
    "eta": (-2.0, 2.0, 0.1),
    "lambda": (0.0, 1.0, 0.05),
}


def default_grid(method: str | MethodSpec) -> ParameterGrid:
    """Search ranges for the free parameters of ``method``."""
    kernel = get_kernel(method.name if isinstance(method, MethodSpec) else method)
    ranges = {}
    for p in kernel.free_params:
        ranges[p] = _DEFAULT_RANGES[p]
    if kernel.name == "Guo2012":
        ranges["theta"] = (0.0, 4.0, 0.1)
    elif kernel.name == "Qiu2011":
        # negative theta pushes the per-item lambda far above 1
        ranges["theta"] = (0.0, 2.0, 0.1)
    return ParameterGrid(ranges)


@dataclass
class _Batch:
    users: np.ndarray
    X: np.ndarray
    excl_ptr: np.ndarray
    excl_idx: np.ndarray
    tgt_ptr: np.ndarray
    tgt_idx: np.ndarray
    tgt_ncand: np.ndarray  # candidate count per target


class HeldOut:
    """Held-out links against a scoring graph, prepared for batched ranking.

    Only users with at least one link in ``graph`` are scored; held-out
    links of users without any are dropped (counted in ``n_dropped``).
    With ``all_users=True`` every linked user is scored, otherwise only
    those with held-out links.

    ``normalization`` sets the denominator of each normalized rank:
    ``"candidates"`` divides by the user's candidate count ``I - k_user``,
    ``"catalogue"`` by the catalogue size ``I``.
    """

    def __init__(
        self,
        graph: BipartiteGraph,
        links: np.ndarray,
        *,
        all_users: bool = False,
        batch_size: int | None = None,
        normalization: str = "candidates",
    ):
        if normalization not in RANK_NORMALIZATIONS:
            raise ValueError(f"normalization must be one of {RANK_NORMALIZATIONS}, got {normalization!r}")
        self.graph = graph
        self.normalization = normalization
        links = np.asarray(links, dtype=np.int64).reshape(-1, 2)
        has_deg = graph.k_user[links[:, 0]] > 0 if links.size else np.zeros(0, dtype=bool)
        self.n_dropped = int((~has_deg).sum())
        links = links[has_deg]
        order = np.lexsort((links[:, 1], links[:, 0]))
        links = links[order]
        self.links = links
        per_user = np.bincount(links[:, 0], minlength=graph.n_users)
        if all_users:
            users = np.flatnonzero(graph.k_user > 0)
        else:
            users = np.flatnonzero(per_user > 0)
        self.users = users
        starts = np.zeros(graph.n_users + 1, dtype=np.int64)
        np.cumsum(per_user, out=starts[1:])
        self._starts = starts
        self.n_targets = int(links.shape[0])
        bs = batch_size or DEFAULT_BATCH
        self.batches = [self._make_batch(users[s : s + bs]) for s in range(0, users.shape[0], bs)]

    def targets_of(self, user: int) -> np.ndarray:
        return self.links[self._starts[user] : self._starts[user + 1], 1]

    def _make_batch(self, users: np.ndarray) -> _Batch:
        g = self.graph
        excl_ptr = np.zeros(users.shape[0] + 1, dtype=np.int64)
        np.cumsum(g.k_user[users], out=excl_ptr[1:])
        excl_idx = np.concatenate([g.items_of(u) for u in users]).astype(np.int32)
        counts = self._starts[users + 1] - self._starts[users]
        tgt_ptr = np.zeros(users.shape[0] + 1, dtype=np.int64)
        np.cumsum(counts, out=tgt_ptr[1:])
        tgt_idx = np.concatenate([self.targets_of(u) for u in users]).astype(np.int32)
        if self.normalization == "candidates":
            ncand = np.repeat(g.n_items - g.k_user[users], counts).astype(np.float64)
        else:
            ncand = np.full(int(counts.sum()), float(g.n_items))
        return _Batch(users, indicator_rows(g, users), excl_ptr, excl_idx, tgt_ptr, tgt_idx, ncand)

    def rank_sum(self, ctx: KernelContext, batch: _Batch, S: np.ndarray) -> float:
        ranks, _ = ctx.core.target_ranks(S, batch.excl_ptr, batch.excl_idx, batch.tgt_ptr, batch.tgt_idx)
        return float(np.sum(ranks / batch.tgt_ncand))


@dataclass
class LearnResult:
    params: dict
    score: float  # ranking score at the learned parameters
    n_evaluated: int
    table: list = field(default_factory=list, repr=False)  # (param tuple, r) per evaluated point


def _search(heldout: HeldOut, kernel, axes: Mapping[str, np.ndarray], ctx: KernelContext, fixed: Mapping):
    """Ranking score at every point of the product grid ``axes``."""
    names = [n for n in kernel.free_params if n in axes]
    # propagation-changing parameters form the outer loops, in the kernel's preferred order
    struct = [n for n in (kernel.loop_order or kernel.structural) if n in axes]
    combine = [n for n in names if n not in kernel.structural]
    struct_pts = list(itertools.product(*(axes[n] for n in struct)))
    comb_pts = list(itertools.product(*(axes[n] for n in combine)))
    sums: dict[tuple, float] = {}
    base = {**kernel.fixed, **fixed}
    struct_fixed = {k: v for k, v in base.items() if k in kernel.structural}
    comb_fixed = {k: v for k, v in base.items() if k not in kernel.structural}
    for batch in heldout.batches:
        for sp_ in struct_pts:
            sd = {**struct_fixed, **{n: float(v) for n, v in zip(struct, sp_)}}
            comps = kernel.components(ctx, batch.X, **sd)
            for cp in comb_pts:
                cd = {**comb_fixed, **{n: float(v) for n, v in zip(combine, cp)}}
                S = kernel.combine(ctx, comps, **cd)
                full = {**sd, **cd}
                key = tuple(full[n] for n in names)
                sums[key] = sums.get(key, 0.0) + heldout.rank_sum(ctx, batch, S)
        ctx.clear_memo()
    n = heldout.n_targets
    return {k: (v / n if n else math.nan) for k, v in sums.items()}


def _argmin(results: Mapping[tuple, float]) -> tuple:
    # smallest score, ties to the lexicographically smallest tuple
    return min(results, key=lambda k: (math.inf if math.isnan(results[k]) else results[k], k))


def learn_parameters(
    graph: BipartiteGraph,
    held_out_links: np.ndarray,
    method: str | MethodSpec,
    grid: ParameterGrid | None = None,
    *,
    refine: bool | None = None,
    batch_size: int | None = None,
    backend=None,
    normalization: str = "candidates",
) -> LearnResult:
    """Grid search for the parameters minimising the ranking score of ``held_out_links``.

    ``graph`` holds the links the recommender may see; held-out links are the
    positives to rank. Methods with three or more free parameters use a
    coarse pass (step 0.25) followed by a fine pass (step 0.05) within 0.25
    of the coarse optimum, unless ``refine=False``.
    """
    spec = method if isinstance(method, MethodSpec) else MethodSpec.parse(method)
    kernel = spec.kernel
    free = [p for p in kernel.free_params if p not in spec.params]
    if not free:
        return LearnResult({}, math.nan, 0)
    grid = grid or default_grid(kernel.name)
    missing = sorted(set(free) - set(grid.ranges))
    if missing:
        raise ValueError(f"grid must cover parameters {missing}")
    grid = grid.restricted(free)
    heldout = HeldOut(graph, held_out_links, batch_size=batch_size, normalization=normalization)
    ctx = KernelContext(graph, backend)
    if refine is None:
        refine = len(free) >= 3
    t0 = time.perf_counter()
    if not refine:
        axes = {n: grid.points(n) for n in free}
        table = _search(heldout, kernel, axes, ctx, spec.params)
    else:
        coarse = {n: _axis(lo, hi, max(COARSE_STEP, step)) for n, (lo, hi, step) in grid.ranges.items()}
        table = _search(heldout, kernel, coarse, ctx, spec.params)
        best = dict(zip(free, _argmin(table)))
        fine = {}
        for n, (lo, hi, step) in grid.ranges.items():
            pts = _axis(lo, hi, FINE_STEP)
            fine[n] = pts[np.abs(pts - best[n]) <= FINE_HALF_WIDTH + 1e-9]
        fine_table = _search(heldout, kernel, fine, ctx, spec.params)
        table = {**table, **fine_table}
    key = _argmin(table)
    logger.info("%s: %d grid points in %.1fs, best %s r=%.5f", kernel.name, len(table), time.perf_counter() - t0, key, table[key])
    return LearnResult(dict(zip(free, (float(v) for v in key))), table[key], len(table), sorted(table.items()))


def evaluate_fixed(
    graph: BipartiteGraph,
    probe_links: np.ndarray,
    method: MethodSpec | str,
    L: int = 50,
    *,
    batch_size: int | None = None,
    backend=None,
    normalization: str = "candidates",
) -> MetricReport:
    """All metrics for a method with fixed parameters.

    Every user with at least one link in ``graph`` gets a top-``L`` list;
    accuracy metrics use the users with probe links.
    """
    spec = method if isinstance(method, MethodSpec) else MethodSpec.parse(method)
    kernel = spec.kernel
    heldout = HeldOut(graph, probe_links, all_users=True, batch_size=batch_size, normalization=normalization)
    ctx = KernelContext(graph, backend)
    ranks_all, ncand_all, lists, probe_rows = [], [], [], []
    for batch in heldout.batches:
        S = kernel.score(ctx, batch.X, **spec.params)
        ranks, _ = ctx.core.target_ranks(S, batch.excl_ptr, batch.excl_idx, batch.tgt_ptr, batch.tgt_idx)
        ranks_all.append(ranks)
        ncand_all.append(batch.tgt_ncand)
        lists.append(top_lists(S, graph, batch.users, L))
        probe_rows.extend(heldout.targets_of(u) for u in batch.users)
        ctx.clear_memo()
    if heldout.batches:
        lists_arr = np.vstack(lists)
        ranks_arr = np.concatenate(ranks_all)
        ncand_arr = np.concatenate(ncand_all)
    else:
        lists_arr = np.zeros((0, L), dtype=np.int64)
        ranks_arr = ncand_arr = np.zeros(0)
    hits = hits_per_row(lists_arr, probe_rows)
    with_probe = np.array([len(p) > 0 for p in probe_rows], dtype=bool)
    n_probe_users = int(with_probe.sum())
    P = float(hits[with_probe].sum() / (L * n_probe_users)) if n_probe_users else math.nan
    sizes = np.array([len(p) for p in probe_rows], dtype=np.float64)
    R = float(np.mean(hits[with_probe] / sizes[with_probe])) if n_probe_users else math.nan
    return MetricReport(
        r=ranking_score(ranks_arr, ncand_arr),
        P=P,
        R=R,
        I=intrasimilarity(lists_arr, graph, L),
        D=hamming_personalization(lists_arr, L, graph.n_items),
        N=novelty(lists_arr, graph, L),
        L=L,
        n_users=n_probe_users,
        method=spec.name,
        params=spec.format_params(),
        rank_normalization=normalization,
        n_params=len(kernel.free_params),
    )


@dataclass
class EvaluationRun:
    method: str
    division: str
    L: int
    seeds: list
    learned: list  # parameters per split
    reports: list  # MetricReport per split
    average: MetricReport | None = None
    learning_scores: list = field(default_factory=list)
    probe_reads_before_final: list = field(default_factory=list)
    n_grid_points: list = field(default_factory=list)
    seconds: float = 0.0

    def merge(self, other: "EvaluationRun") -> "EvaluationRun":
        run = EvaluationRun(
            self.method,
            self.division,
            self.L,
            self.seeds + other.seeds,
            self.learned + other.learned,
            self.reports + other.reports,
            learning_scores=self.learning_scores + other.learning_scores,
            probe_reads_before_final=self.probe_reads_before_final + other.probe_reads_before_final,
            n_grid_points=self.n_grid_points + other.n_grid_points,
            seconds=self.seconds + other.seconds,
        )
        run.average = average_runs(run.reports)
        return run


def _split_dims(links, n_users, n_items):
    arr = np.asarray(links, dtype=np.int64).reshape(-1, 2)
    nu = n_users if n_users is not None else int(arr[:, 0].max()) + 1
    ni = n_items if n_items is not None else int(arr[:, 1].max()) + 1
    return arr, nu, ni


def run_triple(
    links,
    method: str | MethodSpec,
    grid: ParameterGrid | None = None,
    L: int = 50,
    seed: int = 0,
    *,
    learning_fraction: float = 0.10,
    probe_fraction: float = 0.10,
    n_users: int | None = None,
    n_items: int | None = None,
    batch_size: int | None = None,
    backend=None,
    normalization: str = "candidates",
    split: SplitSet | None = None,
) -> EvaluationRun:
    """Triple division: learn on training vs learning links, report on the probe.

    Final recommendations are computed on training plus learning links.
    """
    t0 = time.perf_counter()
    spec = method if isinstance(method, MethodSpec) else MethodSpec.parse(method)
    if split is None:
        arr, nu, ni = _split_dims(links, n_users, n_items)
        split = split_triple(arr, learning_fraction, probe_fraction, seed, nu, ni)
    opts = dict(batch_size=batch_size, backend=backend, normalization=normalization)
    learned = learn_parameters(split.training_graph(), split.learning, spec, grid, **opts)
    reads_before = split.probe_reads
    final = spec.with_params(**learned.params)
    report = evaluate_fixed(split.merged_graph(), split.probe, final, L, **opts)
    run = EvaluationRun(
        spec.name,
        "triple",
        L,
        [split.seed],
        [learned.params],
        [report],
        learning_scores=[learned.score],
        probe_reads_before_final=[reads_before],
        n_grid_points=[learned.n_evaluated],
        seconds=time.perf_counter() - t0,
    )
    run.average = average_runs(run.reports)
    return run


def run_double(
    links,
    method: str | MethodSpec,
    params: Mapping[str, float] | None = None,
    L: int = 50,
    seed: int = 0,
    *,
    grid: ParameterGrid | None = None,
    probe_fraction: float = 0.10,
    n_users: int | None = None,
    n_items: int | None = None,
    batch_size: int | None = None,
    backend=None,
    normalization: str = "candidates",
) -> EvaluationRun:
    """Double division (default 90/10) with fixed parameters.

    With ``params=None`` the free parameters are tuned on the probe itself,
    which gives the optimistic in-sample figure.
    """
    t0 = time.perf_counter()
    spec = method if isinstance(method, MethodSpec) else MethodSpec.parse(method)
    arr, nu, ni = _split_dims(links, n_users, n_items)
    split = split_double(arr, probe_fraction, seed, nu, ni)
    graph = split.training_graph()
    opts = dict(batch_size=batch_size, backend=backend, normalization=normalization)
    if params is None:
        learned = learn_parameters(graph, split.probe, spec, grid, **opts)
        params, lscore, npts = learned.params, learned.score, learned.n_evaluated
    else:
        lscore, npts = math.nan, 0
    final = spec.with_params(**params)
    report = evaluate_fixed(graph, split.probe, final, L, **opts)
    run = EvaluationRun(
        spec.name,
        "double",
        L,
        [seed],
        [dict(params)],
        [report],
        learning_scores=[lscore],
        n_grid_points=[npts],
        seconds=time.perf_counter() - t0,
    )
    run.average = average_runs(run.reports)
    return run


def run_many(
    links,
    method: str | MethodSpec,
    seeds: Sequence[int],
    division: str = "triple",
    **kwargs,
) -> EvaluationRun:
    """Repeat a division over several seeds and average."""
    if division not in ("triple", "double"):
        raise ValueError(f"division must be 'triple' or 'double', got {division!r}")
    fn = run_triple if division == "triple" else run_double
    runs = [fn(links, method, seed=s, **kwargs) for s in seeds]
    out = runs[0]
    for r in runs[1:]:
        out = out.merge(r)
    return out


def average_runs(runs: Sequence[MetricReport | EvaluationRun]) -> MetricReport:
    """Mean of each metric over runs, with standard deviations in ``std``."""
    reports: list[MetricReport] = []
    for r in runs:
        reports.extend(r.reports if isinstance(r, EvaluationRun) else [r])
    if not reports:
        raise ValueError("no runs to average")
    vals = {m: np.array([getattr(r, m) for r in reports], dtype=np.float64) for m in MetricReport.METRICS}
    first = reports[0]
    params = ";".join(dict.fromkeys(r.params for r in reports))
    return MetricReport(
        **{m: float(np.mean(v)) for m, v in vals.items()},
        L=first.L,
        n_users=int(round(np.mean([r.n_users for r in reports]))),
        method=first.method,
        params=params,
        std={m: float(np.std(v)) for m, v in vals.items()},
        rank_normalization=first.rank_normalization,
        n_params=first.n_params,
    )
