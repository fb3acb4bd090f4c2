"""Dense reference implementations for testing the spreading kernels.

Each builder takes the dense ``U x I`` adjacency and returns either the
explicit ``I x I`` transfer matrix ``W`` (applied as ``W @ f``) or, for the
non-linear kernels, a function of the initial resource ``f``. The matrices
are formed with dense ``numpy`` algebra straight from the kernel definitions
and share no code with the sparse propagation. Only meant for small graphs.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..graph import BipartiteGraph
from ._base import ScoreVector, get_kernel

__all__ = ["dense_oracle", "oracle_builder", "dense_adjacency", "probs_matrix", "heats_matrix"]


def dense_adjacency(graph: BipartiteGraph) -> np.ndarray:
    A = np.zeros((graph.n_users, graph.n_items))
    for u, a in graph.links():
        A[u, a] = 1.0
    return A


def _pw(x, e):
    # power for positive entries, 0 elsewhere
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = x[pos] ** e
    return out


def _degrees(A):
    return A.sum(axis=1), A.sum(axis=0)


def _inv(x):
    return _pw(x, -1.0)


def _paths(A, user_weight):
    # P_ab = sum_j a_ja a_jb w_j
    return A.T @ (A * user_weight[:, None])


def hybrid_matrix(A: np.ndarray, lam) -> np.ndarray:
    """``W_ab = sum_j a_ja a_jb / (k_j k_a^(1-lam_b) k_b^lam_b)``; ``lam`` may vary per source b."""
    ku, ki = _degrees(A)
    I = A.shape[1]
    lam = np.broadcast_to(np.asarray(lam, dtype=np.float64), (I,))
    P = _paths(A, _inv(ku))
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = ki[:, None] ** (1.0 - lam[None, :]) * ki[None, :] ** lam[None, :]
        W = np.where(denom > 0, P / denom, 0.0)
    W[ki == 0, :] = 0.0
    W[:, ki == 0] = 0.0
    return W


def probs_matrix(A: np.ndarray) -> np.ndarray:
    return hybrid_matrix(A, 1.0)


def heats_matrix(A: np.ndarray) -> np.ndarray:
    return hybrid_matrix(A, 0.0)


def _preferential_matrix(A, eps):
    # uniform split of b to its users, user j favours a by k_a^eps
    ku, ki = _degrees(A)
    wa = _pw(ki, eps)
    Z = A @ wa
    return (A * wa[None, :]).T @ (A * _inv(Z)[:, None]) * _inv(ki)[None, :]


def oracle_builder(name: str, **params) -> Callable[[np.ndarray], object]:
    """Dense builder for the kernel ``name`` at ``params``."""
    kernel = get_kernel(name)
    p = kernel.resolve(params)
    canon = kernel.name

    def build(A: np.ndarray):
        ku, ki = _degrees(A)
        U, I = A.shape
        if canon == "ProbS":
            return probs_matrix(A)
        if canon == "HeatS":
            return heats_matrix(A)
        if canon == "ProbS-HeatS":
            return hybrid_matrix(A, p["lambda"])
        if canon == "Zhou2008":
            W = probs_matrix(A)
            return lambda f: W @ (f * _pw(ki, p["theta"]))
        if canon == "Zhou2009":
            W = probs_matrix(A)
            return W + p["eta"] * (W @ W)
        if canon == "RunRan2010":
            th = p["theta"]
            S = A.T @ _pw(ku, th)  # per item: sum over its users of k_l^theta
            Z = A @ _pw(ki, th)  # per user: sum over its items of k_g^theta
            to_item = A * _pw(ki, th)[None, :] * _inv(Z)[:, None]  # [j, a]
            to_user = A * _pw(ku, th)[:, None] * _inv(S)[None, :]  # [j, b]
            return to_item.T @ to_user
        if canon == "Blattner2010":
            w = np.where(ku > 1, 1.0 / np.where(ku > 1, ku - 1.0, 1.0), 0.0)
            P = _paths(A, w) * _inv(ki)[None, :]
            np.fill_diagonal(P, 0.0)
            return lambda f: (P @ f) * (P.T @ f)
        if canon == "Liu2011":
            return _pw(ki, -p["theta"])[:, None] * _paths(A, _inv(ku))
        if canon == "Liu2011*":
            th = p["theta"]
            E = A * np.outer(_pw(ku, th), _pw(ki, th))
            return _inv(ki)[:, None] * (E.T @ (E * _inv(ku)[:, None]))
        if canon in ("Lu2011", "Lu2011*"):
            W = _preferential_matrix(A, p["epsilon"])
            th = p.get("theta", 0.0)
            return lambda f: W @ (f * _pw(ki, th))
        if canon == "Qiu2011":
            kmax = ki.max() if I and ki.max() > 0 else 1.0
            lam = _pw(ki / kmax, p["theta"])
            return hybrid_matrix(A, lam)
        if canon == "Guo2012":
            # s_ji = (1/k_j) sum_b a_jb a_ib / k_b^theta ; h_a = sum_j s_ji a_ja
            th = p["theta"]

            def guo(f):
                s = _inv(ku) * (A @ (f * _pw(ki, -th)))
                return A.T @ s

            return guo
        if canon == "Liu2012":
            W = hybrid_matrix(A, p["lambda"])
            return lambda f: W @ (f * _pw(ki, p["theta"]))
        if canon == "Qiu2013":
            return _pw(ki, -p["theta"])[:, None] * probs_matrix(A)
        if canon == "Zeng2013":
            W = probs_matrix(A)
            n = int(p["n"])
            out = W.copy()
            Wm = W
            for _ in range(2, n + 1):
                Wm = W @ Wm
                out = out + np.diag(_pw(ki, -p["theta"])) @ Wm
            return out
        if canon == "Zeng2014":
            lam, th = p["lambda"], p["theta"]

            def zeng(f):
                # s_ij = sum_b a_ib a_jb / (k_b^lam k_j^(1-lam)), f the target's row
                s = (A @ (f * _pw(ki, -lam))) * _pw(ku, lam - 1.0)
                return (A.T @ (_pw(s, th) * _pw(ku, -lam))) * _pw(ki, lam - 1.0)

            return zeng
        if canon == "3hybrid1":
            th, eps, eta = p["theta"], p["epsilon"], p["eta"]
            wa = _pw(ki, eps)
            Z = A @ wa

            def step(f):
                u = _pw(A @ (f * _inv(ki)), th)
                return (A.T @ (u * _inv(Z))) * wa

            def three1(f):
                f1 = step(f)
                return f1 + eta * step(f1)

            return three1
        if canon == "3hybrid2":
            W = _preferential_matrix(A, p["epsilon"])
            th, eta = p["theta"], p["eta"]
            return lambda f: (W + eta * (W @ W)) @ (f * _pw(ki, th))
        if canon == "UserCF":

            def cf(f):
                kf = f.sum()
                if kf == 0:
                    return np.zeros(I)
                s = (A @ f) * _pw(ku, -0.5) / np.sqrt(kf)
                tot = s.sum()
                return (s @ A) / tot if tot > 0 else np.zeros(I)

            return cf
        raise KeyError(canon)

    return build


def dense_oracle(graph: BipartiteGraph, builder: Callable[[np.ndarray], object], f, user: int = -1) -> ScoreVector:
    """Scores from an explicitly materialized kernel.

    ``builder`` maps the dense adjacency to an ``I x I`` matrix or to a
    callable on the initial resource vector ``f``.
    """
    A = dense_adjacency(graph)
    f = np.asarray(f, dtype=np.float64)
    kernel = builder(A)
    h = kernel @ f if isinstance(kernel, np.ndarray) else kernel(f)
    return ScoreVector(user, np.asarray(h, dtype=np.float64))
