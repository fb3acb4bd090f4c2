"""Kernel plumbing: spreading context, method specs and the name registry."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from types import ModuleType
from typing import Callable, Iterable, Mapping

import numpy as np

from .._backend import get_backend
from ..graph import BipartiteGraph, power_table

__all__ = [
    "KernelContext",
    "Kernel",
    "MethodSpec",
    "ScoreVector",
    "UnknownMethodError",
    "register",
    "get_kernel",
    "method_names",
    "safe_inverse",
    "positive_power",
]

logger = logging.getLogger(__name__)


def safe_inverse(x: np.ndarray) -> np.ndarray:
    """``1/x`` where ``x > 0``, else 0."""
    out = np.zeros_like(x, dtype=np.float64)
    np.divide(1.0, x, out=out, where=x > 0)
    return out


def positive_power(x: np.ndarray, exponent: float) -> np.ndarray:
    """Elementwise ``x ** exponent`` on positive entries; zeros stay zero.

    Exponent 1 returns the input unchanged so reductions stay bit-exact.
    """
    if exponent == 1.0:
        return x
    out = np.zeros_like(x)
    pos = x > 0
    with np.errstate(over="ignore"):
        out[pos] = np.power(x[pos], exponent)
    return out


class KernelContext:
    """Everything a kernel needs to spread resource on one graph.

    Holds the graph, the active backend, and caches of per-node degree
    powers and normalization sums so that grid searches do not recompute
    them. A context also owns a small memo for intermediate spreads keyed by
    the caller (see :meth:`memo`).
    """

    def __init__(self, graph: BipartiteGraph, backend: str | ModuleType | None = None):
        self.graph = graph
        self.core = backend if isinstance(backend, ModuleType) else get_backend(backend)
        self._powers: dict[tuple[str, float], np.ndarray] = {}
        self._memo: dict = {}
        self.k_item_max = int(graph.k_item.max()) if graph.n_items else 0

    # degree powers ---------------------------------------------------------
    def _pow(self, side: str, exponent: float) -> np.ndarray:
        key = (side, float(exponent))
        arr = self._powers.get(key)
        if arr is None:
            k = self.graph.k_user if side == "user" else self.graph.k_item
            arr = power_table(self.graph, side, exponent).lookup(k)
            arr.setflags(write=False)
            self._powers[key] = arr
        return arr

    def item_pow(self, exponent: float) -> np.ndarray:
        """``k_item ** exponent`` per item (0 for isolated items)."""
        return self._pow("item", exponent)

    def user_pow(self, exponent: float) -> np.ndarray:
        return self._pow("user", exponent)

    def inv_item_weight_sum(self, exponent: float) -> np.ndarray:
        """Per user ``1 / sum_{g in items(j)} k_g ** exponent`` (0 if no items)."""
        key = ("inv_item_sum", float(exponent))
        arr = self._powers.get(key)
        if arr is None:
            ones = np.ones((1, self.graph.n_items))
            arr = safe_inverse(self.to_users(ones, self.item_pow(exponent))[0])
            self._powers[key] = arr
        return arr

    def inv_user_weight_sum(self, exponent: float) -> np.ndarray:
        """Per item ``1 / sum_{l in users(b)} k_l ** exponent`` (0 if no users)."""
        key = ("inv_user_sum", float(exponent))
        arr = self._powers.get(key)
        if arr is None:
            ones = np.ones((1, self.graph.n_users))
            arr = safe_inverse(self.to_items(ones, self.user_pow(exponent))[0])
            self._powers[key] = arr
        return arr

    # spreading -------------------------------------------------------------
    def to_users(self, X: np.ndarray, w: np.ndarray) -> np.ndarray:
        """``out[:, j] = sum_b a_jb X[:, b] w[b]`` (items to users)."""
        g = self.graph
        return self.core.spread(g.item_indptr, g.item_indices, _c(X), _c1(w), g.n_users)

    def to_items(self, Y: np.ndarray, w: np.ndarray) -> np.ndarray:
        """``out[:, a] = sum_j a_ja Y[:, j] w[j]`` (users to items)."""
        g = self.graph
        return self.core.spread(g.user_indptr, g.user_indices, _c(Y), _c1(w), g.n_items)

    def probs(self, X: np.ndarray) -> np.ndarray:
        """One ProbS pass (uniform split by item degree, then by user degree)."""
        return self.to_items(self.to_users(X, self.item_pow(-1.0)), self.user_pow(-1.0))

    def memo(self, key, X: np.ndarray, compute: Callable[[], object]):
        """Cache ``compute()`` for ``key`` and the batch ``X`` (by identity).

        The batch array is kept alive alongside the value so its id cannot be
        recycled while the entry exists. Only the latest few entries are kept.
        """
        full = (key, id(X))
        hit = self._memo.get(full)
        if hit is not None and hit[0] is X:
            return hit[1]
        value = compute()
        if len(self._memo) >= 64:
            self._memo.pop(next(iter(self._memo)))
        self._memo[full] = (X, value)
        return value

    def clear_memo(self) -> None:
        self._memo.clear()


def _c(X) -> np.ndarray:
    return np.ascontiguousarray(X, dtype=np.float64)


def _c1(w) -> np.ndarray:
    return np.ascontiguousarray(w, dtype=np.float64)


@dataclass(frozen=True)
class ScoreVector:
    """Scores of every item for one target user."""

    user: int
    scores: np.ndarray
    zeroed_collected: bool = False

    def zero_collected(self, graph: BipartiteGraph) -> "ScoreVector":
        s = self.scores.copy()
        s[graph.items_of(self.user)] = 0.0
        return ScoreVector(self.user, s, True)


class UnknownMethodError(KeyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown method {name!r}; valid names: {', '.join(method_names())}")

    def __str__(self) -> str:
        return self.args[0]


class Kernel:
    """A spreading kernel split into a propagation part and a cheap combination.

    ``structural`` names the parameters that change the propagation;
    :meth:`components` runs it once per structural setting, and
    :meth:`combine` turns the components into scores for any value of the
    remaining parameters. Grid searches exploit this split.
    """

    name: str = ""
    aliases: tuple[str, ...] = ()
    params: tuple[str, ...] = ()
    defaults: Mapping[str, float] = {}
    structural: tuple[str, ...] = ()
    loop_order: tuple[str, ...] = ()  # grid-search nesting of structural params (outer first)
    fixed: Mapping[str, float] = {}  # parameters not searched by default (e.g. n)

    def components(self, ctx: KernelContext, X: np.ndarray, **struct):
        raise NotImplementedError

    def combine(self, ctx: KernelContext, comps, **params) -> np.ndarray:
        return comps

    def score(self, ctx: KernelContext, X: np.ndarray, **params) -> np.ndarray:
        """Scores for a batch of initial resource rows ``X`` (B x I)."""
        full = self.resolve(params)
        struct = {k: full[k] for k in self.structural}
        rest = {k: v for k, v in full.items() if k not in self.structural}
        return self.combine(ctx, self.components(ctx, X, **struct), **rest)

    def resolve(self, params: Mapping[str, float]) -> dict:
        unknown = set(params) - set(self.params)
        if unknown:
            raise ValueError(
                f"{self.name} takes parameters {list(self.params)}, got unexpected {sorted(unknown)}"
            )
        full = {**self.defaults, **self.fixed, **params}
        missing = [p for p in self.params if p not in full]
        if missing:
            raise ValueError(f"{self.name}: missing parameter(s) {missing}")
        for k, v in full.items():
            if not math.isfinite(float(v)):
                raise ValueError(f"{self.name}: parameter {k} must be finite, got {v}")
        return {k: full[k] for k in self.params}

    @property
    def free_params(self) -> tuple[str, ...]:
        """Parameters searched during learning (all except fixed ones)."""
        return tuple(p for p in self.params if p not in self.fixed)


_REGISTRY: dict[str, Kernel] = {}
_ALIASES: dict[str, str] = {}


def register(kernel_cls: type[Kernel]) -> type[Kernel]:
    k = kernel_cls()
    _REGISTRY[k.name] = k
    for key in (k.name, *k.aliases):
        _ALIASES[key.lower()] = k.name
    return kernel_cls


def get_kernel(name: str) -> Kernel:
    canon = _ALIASES.get(str(name).lower())
    if canon is None:
        raise UnknownMethodError(str(name))
    return _REGISTRY[canon]


def method_names() -> list[str]:
    return list(_REGISTRY)


@dataclass(frozen=True)
class MethodSpec:
    """A kernel name plus named parameter values.

    >>> MethodSpec.parse("Zhou2009(eta=-0.8)").params
    {'eta': -0.8}
    """

    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        kernel = get_kernel(self.name)
        object.__setattr__(self, "name", kernel.name)
        bad = set(self.params) - set(kernel.params)
        if bad:
            raise ValueError(f"{kernel.name} takes parameters {list(kernel.params)}, got {sorted(bad)}")
        if "n" in self.params:
            n = self.params["n"]
            if int(n) != n or n < 1:
                raise ValueError(f"n must be a positive integer, got {n}")
        object.__setattr__(self, "params", {k: float(self.params[k]) for k in kernel.params if k in self.params})

    @property
    def kernel(self) -> Kernel:
        return get_kernel(self.name)

    def with_params(self, **params) -> "MethodSpec":
        return MethodSpec(self.name, {**self.params, **params})

    def format_params(self) -> str:
        return ",".join(f"{k}={_fmt(v)}" for k, v in self.params.items())

    def __str__(self) -> str:
        p = self.format_params()
        return f"{self.name}({p})" if p else self.name

    @classmethod
    def parse(cls, text: str) -> "MethodSpec":
        text = text.strip()
        if "(" in text and text.endswith(")"):
            name, inner = text[:-1].split("(", 1)
            params = {}
            for part in filter(None, (p.strip() for p in inner.split(","))):
                k, v = part.split("=")
                params[k.strip()] = float(v)
            return cls(name.strip(), params)
        return cls(text)


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def indicator_rows(graph: BipartiteGraph, users: Iterable[int]) -> np.ndarray:
    """Initial resource rows: 1 on each user's collected items."""
    users = np.asarray(list(users) if not isinstance(users, np.ndarray) else users, dtype=np.int64)
    X = np.zeros((users.shape[0], graph.n_items))
    for r, u in enumerate(users):
        X[r, graph.items_of(u)] = 1.0
    return X
