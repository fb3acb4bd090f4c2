"""Network-based recommendation kernels.

Each ``score_*`` function scores every item for one target user on a
graph; for whole-population scoring use :func:`score_batch`, which runs
the same kernels on many users at once.
"""

from __future__ import annotations

import logging

import numpy as np

from ..graph import BipartiteGraph
from . import kernels as _kernels  # noqa: F401  (registers the kernels)
from ._base import (
    Kernel,
    KernelContext,
    MethodSpec,
    ScoreVector,
    UnknownMethodError,
    get_kernel,
    indicator_rows,
    method_names,
)
from .oracle import dense_oracle, oracle_builder
from .ranking import RankedCandidates, rank_candidates, target_ranks, top_lists

__all__ = [
    "Kernel",
    "KernelContext",
    "MethodSpec",
    "ScoreVector",
    "UnknownMethodError",
    "RankedCandidates",
    "get_kernel",
    "method_names",
    "indicator_rows",
    "score",
    "score_batch",
    "score_probs",
    "score_heats",
    "score_hybrid",
    "score_zhou2008",
    "score_zhou2009",
    "score_runran2010",
    "score_blattner2010",
    "score_liu2011",
    "score_liu2011w",
    "score_lu2011",
    "score_qiu2011",
    "score_guo2012",
    "score_liu2012",
    "score_qiu2013",
    "score_zeng2013",
    "score_zeng2014",
    "score_3hybrid1",
    "score_3hybrid2",
    "score_user_cf",
    "rank_candidates",
    "top_lists",
    "target_ranks",
    "dense_oracle",
    "oracle_builder",
]

logger = logging.getLogger(__name__)


def score_batch(graph: BipartiteGraph, method: MethodSpec | str, users=None, *, ctx: KernelContext | None = None,
                batch_size: int | None = None) -> np.ndarray:
    """Scores for many users, one row per user (``len(users) x I``)."""
    spec = method if isinstance(method, MethodSpec) else MethodSpec.parse(method)
    ctx = ctx or KernelContext(graph)
    users = np.arange(graph.n_users) if users is None else np.asarray(users, dtype=np.int64)
    kernel = spec.kernel
    if batch_size is None or batch_size >= users.shape[0]:
        return kernel.score(ctx, indicator_rows(graph, users), **spec.params)
    parts = [
        kernel.score(ctx, indicator_rows(graph, users[s : s + batch_size]), **spec.params)
        for s in range(0, users.shape[0], batch_size)
    ]
    return np.vstack(parts) if parts else np.zeros((0, graph.n_items))


def score(graph: BipartiteGraph, user: int, method: MethodSpec | str, **params) -> ScoreVector:
    """Score every item for ``user`` with the named kernel."""
    spec = method if isinstance(method, MethodSpec) else MethodSpec.parse(method)
    if params:
        spec = spec.with_params(**params)
    if not 0 <= user < graph.n_users:
        raise IndexError(f"user {user} out of range")
    if graph.k_user[user] == 0:
        logger.warning("user %d has no training links; all scores are zero", user)
        return ScoreVector(int(user), np.zeros(graph.n_items))
    return ScoreVector(int(user), score_batch(graph, spec, [user])[0])


def score_probs(graph, user):
    return score(graph, user, "ProbS")


def score_heats(graph, user):
    return score(graph, user, "HeatS")


def score_hybrid(graph, user, lam):
    if not 0.0 <= lam <= 1.0:
        logger.warning("hybrid lambda=%g outside [0, 1]", lam)
    return score(graph, user, "ProbS-HeatS", **{"lambda": lam})


def score_zhou2008(graph, user, theta):
    return score(graph, user, "Zhou2008", theta=theta)


def score_zhou2009(graph, user, eta):
    return score(graph, user, "Zhou2009", eta=eta)


def score_runran2010(graph, user, theta):
    return score(graph, user, "RunRan2010", theta=theta)


def score_blattner2010(graph, user):
    return score(graph, user, "Blattner2010")


def score_liu2011(graph, user, theta):
    return score(graph, user, "Liu2011", theta=theta)


def score_liu2011w(graph, user, theta):
    return score(graph, user, "Liu2011*", theta=theta)


def score_lu2011(graph, user, epsilon, theta=0.0):
    """Preferential diffusion; ``theta != 0`` gives the hybrid variant."""
    if theta == 0.0:
        return score(graph, user, "Lu2011", epsilon=epsilon)
    return score(graph, user, "Lu2011*", epsilon=epsilon, theta=theta)


def score_qiu2011(graph, user, theta):
    return score(graph, user, "Qiu2011", theta=theta)


def score_guo2012(graph, user, theta):
    return score(graph, user, "Guo2012", theta=theta)


def score_liu2012(graph, user, lam, theta):
    return score(graph, user, "Liu2012", **{"lambda": lam, "theta": theta})


def score_qiu2013(graph, user, theta):
    return score(graph, user, "Qiu2013", theta=theta)


def score_zeng2013(graph, user, theta, n=3):
    return score(graph, user, "Zeng2013", theta=theta, n=n)


def score_zeng2014(graph, user, lam, theta):
    return score(graph, user, "Zeng2014", **{"lambda": lam, "theta": theta})


def score_3hybrid1(graph, user, theta, epsilon, eta):
    return score(graph, user, "3hybrid1", theta=theta, epsilon=epsilon, eta=eta)


def score_3hybrid2(graph, user, theta, epsilon, eta):
    return score(graph, user, "3hybrid2", theta=theta, epsilon=epsilon, eta=eta)


def score_user_cf(graph, user):
    return score(graph, user, "UserCF")
