"""Spreading kernels on the user-item network.

Every kernel is written as a short sequence of passes over the two
adjacency directions:

``to_users(X, w)``
    ``u_j = sum_b a_jb X_b w_b``, resource moving from items to users;
``to_items(Y, w)``
    ``h_a = sum_j a_ja Y_j w_j``, resource moving from users to items;

with degree powers as the per-node weights. No item-by-item matrix is ever
formed. Rows of ``X`` are the initial resource of a batch of target users.
"""

from __future__ import annotations

import numpy as np

from ..graph import degree_power
from ._base import Kernel, KernelContext, positive_power, register

__all__ = [
    "ProbS",
    "HeatS",
    "ProbSHeatS",
    "Zhou2008",
    "Zhou2009",
    "RunRan2010",
    "Blattner2010",
    "Liu2011",
    "Liu2011Weighted",
    "Lu2011",
    "Lu2011Hybrid",
    "Qiu2011",
    "Guo2012",
    "Liu2012",
    "Qiu2013",
    "Zeng2013",
    "Zeng2014",
    "ThreeHybrid1",
    "ThreeHybrid2",
    "UserCF",
]


def _hybrid(ctx: KernelContext, X: np.ndarray, lam: float) -> np.ndarray:
    # W_ab = 1 / (k_a^(1-lam) k_b^lam) * sum_j a_ja a_jb / k_j
    users = ctx.to_users(X, ctx.item_pow(-lam))
    return ctx.to_items(users, ctx.user_pow(-1.0)) * ctx.item_pow(lam - 1.0)


def _preferential(ctx: KernelContext, X: np.ndarray, eps: float) -> np.ndarray:
    # uniform split to users, then each user favours items by k_a^eps
    users = ctx.to_users(X, ctx.item_pow(-1.0))
    return ctx.to_items(users, ctx.inv_item_weight_sum(eps)) * ctx.item_pow(eps)


@register
class ProbS(Kernel):
    """Mass diffusion: each item splits its resource evenly among its users,
    each user splits what it received evenly among its items."""

    name = "ProbS"
    aliases = ("MD", "mass-diffusion")

    def components(self, ctx, X):
        return ctx.probs(X)


@register
class HeatS(Kernel):
    """Heat conduction: users average their items, items average their users."""

    name = "HeatS"
    aliases = ("HC", "heat-conduction")

    def components(self, ctx, X):
        users = ctx.to_users(X, ctx.item_pow(0.0))
        return ctx.to_items(users, ctx.user_pow(-1.0)) * ctx.item_pow(-1.0)


@register
class ProbSHeatS(Kernel):
    """Hybrid normalization ``1 / (k_a^(1-lambda) k_b^lambda)``.

    ``lambda = 1`` is ProbS, ``lambda = 0`` is HeatS.
    """

    name = "ProbS-HeatS"
    aliases = ("hybrid", "ProbSHeatS")
    params = ("lambda",)
    defaults = {"lambda": 1.0}
    structural = ("lambda",)

    def components(self, ctx, X, **p):
        return _hybrid(ctx, X, p["lambda"])


@register
class Zhou2008(Kernel):
    """ProbS started from ``k_a^theta`` on the collected items."""

    name = "Zhou2008"
    params = ("theta",)
    defaults = {"theta": 0.0}
    structural = ("theta",)

    def components(self, ctx, X, theta):
        return ctx.probs(X * ctx.item_pow(theta))


@register
class Zhou2009(Kernel):
    """ProbS plus ``eta`` times a second ProbS pass: ``W f + eta W(W f)``."""

    name = "Zhou2009"
    params = ("eta",)
    defaults = {"eta": 0.0}

    def components(self, ctx, X):
        first = ctx.probs(X)
        return first, ctx.probs(first)

    def combine(self, ctx, comps, eta):
        first, second = comps
        if eta == 0.0:
            return first.copy()
        return first + eta * second


@register
class RunRan2010(Kernel):
    """Degree-preferential attraction on both steps.

    Item b hands resource to user i in proportion to ``k_i^theta``, and user j
    hands resource to item a in proportion to ``k_a^theta``; each step is
    normalized over the receiving alternatives, so resource is conserved.
    """

    name = "RunRan2010"
    aliases = ("Run-Ran2010", "RunRan")
    params = ("theta",)
    defaults = {"theta": 0.0}
    structural = ("theta",)

    def components(self, ctx, X, theta):
        users = ctx.to_users(X, ctx.inv_user_weight_sum(theta)) * ctx.user_pow(theta)
        return ctx.to_items(users, ctx.inv_item_weight_sum(theta)) * ctx.item_pow(theta)


def _blattner_weights(ctx: KernelContext) -> tuple[np.ndarray, np.ndarray]:
    k = ctx.graph.k_user.astype(np.float64)
    w = np.zeros_like(k)
    np.divide(1.0, k - 1.0, out=w, where=k > 1)
    # C_a = sum over the users of a of 1/(k_j - 1): the diagonal of the path sum
    C = ctx.to_items(np.ones((1, ctx.graph.n_users)), w)[0]
    return w, C


@register
class Blattner2010(Kernel):
    """Non-lazy walk: paths returning to their origin item are removed.

    ``P_ab = (1/k_b) sum_j a_ja a_jb / (k_j - 1)`` for ``a != b``; the score
    is the product of the forward pass ``P f`` and the backward pass
    ``P^T f``. Users of degree one offer no path and contribute nothing.
    """

    name = "Blattner2010"
    aliases = ("Blattner",)

    def components(self, ctx, X):
        fwd, bwd = blattner_passes(ctx, X)
        return fwd * bwd


def blattner_passes(ctx: KernelContext, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Forward ``P f`` and backward ``P^T f`` of the non-lazy walk, row-wise."""
    w, C = _blattner_weights(ctx)
    inv_k = ctx.item_pow(-1.0)
    fwd = ctx.to_items(ctx.to_users(X, inv_k), w) - X * inv_k * C
    bwd = (ctx.to_items(ctx.to_users(X, ctx.item_pow(0.0)), w) - X * C) * inv_k
    return fwd, bwd


@register
class Liu2011(Kernel):
    """HeatS with the target normalization ``1/k_a`` softened to ``1/k_a^theta``."""

    name = "Liu2011"
    params = ("theta",)
    defaults = {"theta": 1.0}

    def components(self, ctx, X):
        users = ctx.to_users(X, ctx.item_pow(0.0))
        return ctx.to_items(users, ctx.user_pow(-1.0))

    def combine(self, ctx, comps, theta):
        return comps * ctx.item_pow(-theta)


@register
class Liu2011Weighted(Kernel):
    """HeatS on link weights ``(k_i k_a)^theta`` instead of 0/1 adjacency."""

    name = "Liu2011*"
    aliases = ("Liu2011b", "Liu2011w", "Liu2011-weighted")
    params = ("theta",)
    defaults = {"theta": 0.0}
    structural = ("theta",)

    def components(self, ctx, X, theta):
        users = ctx.to_users(X, ctx.item_pow(theta))
        return ctx.to_items(users, ctx.user_pow(2.0 * theta - 1.0)) * ctx.item_pow(theta - 1.0)


@register
class Lu2011(Kernel):
    """Preferential diffusion: the user-to-item step favours ``k_a^epsilon``."""

    name = "Lu2011"
    aliases = ("Lü2011",)
    params = ("epsilon",)
    defaults = {"epsilon": 0.0}
    structural = ("epsilon",)

    def components(self, ctx, X, epsilon):
        users = ctx.memo(("uniform-up", 0.0), X, lambda: ctx.to_users(X, ctx.item_pow(-1.0)))
        return ctx.to_items(users, ctx.inv_item_weight_sum(epsilon)) * ctx.item_pow(epsilon)


@register
class Lu2011Hybrid(Kernel):
    """Preferential diffusion started from ``k_a^theta`` on collected items."""

    name = "Lu2011*"
    aliases = ("Lu2011b", "Lü2011*")
    params = ("epsilon", "theta")
    defaults = {"epsilon": 0.0, "theta": 0.0}
    structural = ("epsilon", "theta")
    loop_order = ("theta", "epsilon")  # first step depends on theta only

    def components(self, ctx, X, epsilon, theta):
        users = ctx.memo(
            ("uniform-up", theta), X, lambda: ctx.to_users(X * ctx.item_pow(theta), ctx.item_pow(-1.0))
        )
        return ctx.to_items(users, ctx.inv_item_weight_sum(epsilon)) * ctx.item_pow(epsilon)


@register
class Qiu2011(Kernel):
    """Hybrid whose ``lambda`` depends on the source item: ``(k_b / k_max)^theta``.

    ``k_max`` is the largest item degree of the graph being scored. Sources
    are grouped by their ``lambda`` so each group needs one two-step pass.
    """

    name = "Qiu2011"
    params = ("theta",)
    defaults = {"theta": 0.0}
    structural = ("theta",)

    def components(self, ctx, X, theta):
        g = ctx.graph
        k = g.k_item
        kmax = max(ctx.k_item_max, 1)
        if theta == 0.0:
            lam = np.ones(g.n_items)
        else:
            ratio = k / kmax
            lam = np.zeros(g.n_items)
            pos = k > 0
            lam[pos] = np.power(ratio[pos], theta)
        levels, group = np.unique(lam, return_inverse=True)
        group = group.astype(np.int32)
        w_src = np.empty(g.n_items)
        table = np.empty((levels.shape[0], ctx.k_item_max + 1))
        degrees = np.arange(ctx.k_item_max + 1)
        for gi, level in enumerate(levels):
            sel = group == gi
            w_src[sel] = degree_power(k[sel], -level)
            table[gi] = degree_power(degrees, level - 1.0)
        return ctx.core.spread_grouped(
            g.item_indptr,
            g.item_indices,
            g.user_indptr,
            g.user_indices,
            g.k_item,
            np.ascontiguousarray(X, dtype=np.float64),
            w_src,
            group,
            np.ascontiguousarray(ctx.user_pow(-1.0)),
            table,
        )


@register
class Guo2012(Kernel):
    """Degree-discounted user similarity ``s_ji = (1/k_j) sum_b a_jb a_ib / k_b^theta``;
    item ``a`` scores ``sum_j s_ji a_ja``."""

    name = "Guo2012"
    params = ("theta",)
    defaults = {"theta": 1.0}
    structural = ("theta",)

    def components(self, ctx, X, theta):
        users = ctx.to_users(X, ctx.item_pow(-theta))
        return ctx.to_items(users, ctx.user_pow(-1.0))


@register
class Liu2012(Kernel):
    """ProbS-HeatS hybrid started from ``k_a^theta`` on collected items."""

    name = "Liu2012"
    params = ("lambda", "theta")
    defaults = {"lambda": 1.0, "theta": 0.0}
    structural = ("lambda", "theta")

    def components(self, ctx, X, **p):
        return _hybrid(ctx, X * ctx.item_pow(p["theta"]), p["lambda"])


@register
class Qiu2013(Kernel):
    """ProbS with an extra target factor ``1/k_a^theta``."""

    name = "Qiu2013"
    params = ("theta",)
    defaults = {"theta": 0.0}

    def components(self, ctx, X):
        return ctx.probs(X)

    def combine(self, ctx, comps, theta):
        return comps * ctx.item_pow(-theta)


@register
class Zeng2013(Kernel):
    """Semi-local diffusion: ``W f + k_a^-theta (W^2 f + ... + W^n f)``.

    ``n`` is the number of ProbS iterations (fixed at 3 unless overridden).
    """

    name = "Zeng2013"
    params = ("theta", "n")
    defaults = {"theta": 0.0}
    fixed = {"n": 3}
    structural = ("n",)

    def components(self, ctx, X, n):
        n = int(n)
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        steps = [ctx.probs(X)]
        for _ in range(n - 1):
            steps.append(ctx.probs(steps[-1]))
        higher = None
        for s in steps[1:]:
            higher = s.copy() if higher is None else higher + s
        return steps[0], higher

    def combine(self, ctx, comps, theta):
        first, higher = comps
        if higher is None:
            return first.copy()
        return first + ctx.item_pow(-theta) * higher


@register
class Zeng2014(Kernel):
    """Hybrid user similarity raised to ``theta`` before the second step.

    ``s_ij = sum_b a_ib a_jb / (k_b^lambda k_j^(1-lambda))`` and
    ``h_a = sum_j a_ja s_ij^theta / (k_j^lambda k_a^(1-lambda))``; zero
    similarities stay zero for any ``theta``.
    """

    name = "Zeng2014"
    params = ("lambda", "theta")
    defaults = {"lambda": 1.0, "theta": 1.0}
    structural = ("lambda", "theta")

    def components(self, ctx, X, **p):
        lam, theta = p["lambda"], p["theta"]
        sim = ctx.memo(
            ("zeng2014-sim", lam),
            X,
            lambda: ctx.to_users(X, ctx.item_pow(-lam)) * ctx.user_pow(lam - 1.0),
        )
        return ctx.to_items(positive_power(sim, theta), ctx.user_pow(-lam)) * ctx.item_pow(lam - 1.0)


@register
class ThreeHybrid1(Kernel):
    """Two rounds of (uniform split to users, user resource to the power
    ``theta``, preferential ``k_a^epsilon`` return); score ``f1 + eta f2``."""

    name = "3hybrid1"
    params = ("theta", "epsilon", "eta")
    defaults = {"theta": 1.0, "epsilon": 0.0, "eta": 0.0}
    structural = ("theta", "epsilon")

    def components(self, ctx, X, theta, epsilon):
        def round_(F):
            users = positive_power(ctx.to_users(F, ctx.item_pow(-1.0)), theta)
            return ctx.to_items(users, ctx.inv_item_weight_sum(epsilon)) * ctx.item_pow(epsilon)

        first = round_(X)
        return first, round_(first)

    def combine(self, ctx, comps, eta):
        first, second = comps
        if eta == 0.0:
            return first.copy()
        return first + eta * second


@register
class ThreeHybrid2(Kernel):
    """Preferential diffusion from ``k_a^theta`` applied twice; score ``f1 + eta f2``."""

    name = "3hybrid2"
    params = ("theta", "epsilon", "eta")
    defaults = {"theta": 0.0, "epsilon": 0.0, "eta": 0.0}
    structural = ("theta", "epsilon")

    def components(self, ctx, X, theta, epsilon):
        first = _preferential(ctx, X * ctx.item_pow(theta), epsilon)
        return first, _preferential(ctx, first, epsilon)

    def combine(self, ctx, comps, eta):
        first, second = comps
        if eta == 0.0:
            return first.copy()
        return first + eta * second


@register
class UserCF(Kernel):
    """User-based collaborative filtering with cosine user similarity.

    ``x_a = sum_j s_ij a_ja / sum_j s_ij``; the sums run over all users,
    the target included.
    """

    name = "UserCF"
    aliases = ("CF", "user-cf")

    def components(self, ctx, X):
        overlap = ctx.to_users(X, ctx.item_pow(0.0))
        k_target = X.sum(axis=1, keepdims=True)
        inv_sqrt_target = np.zeros_like(k_target)
        np.divide(1.0, np.sqrt(k_target), out=inv_sqrt_target, where=k_target > 0)
        sim = overlap * ctx.user_pow(-0.5) * inv_sqrt_target
        total = sim.sum(axis=1, keepdims=True)
        out = ctx.to_items(sim, ctx.user_pow(0.0))
        np.divide(out, total, out=out, where=total > 0)
        return out
