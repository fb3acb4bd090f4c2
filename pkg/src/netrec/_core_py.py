"""Pure-Python fallback for the compiled core (numpy/scipy, no build step).

Every function mirrors the one in ``_core.pyx``: same arguments, same
accumulation order where that matters, same tie-breaking. Spreading is
vectorised through scipy sparse products; the annealing sweep and the
assignment solver are plain loops and therefore much slower.
"""

from __future__ import annotations

import heapq
import math

import numpy as np
import scipy.sparse as sp

NAME = "python"


def spread(src_indptr, src_indices, X, w, n_dst):
    """out[b, d] = sum over sources s adjacent to d of X[b, s] * w[s]."""
    X = np.asarray(X, dtype=np.float64)
    n_src = X.shape[1]
    M = sp.csr_matrix(
        (np.ones(src_indices.shape[0]), src_indices, src_indptr), shape=(n_src, n_dst)
    )
    # the CSC transpose product visits sources in ascending order for every
    # destination, matching the compiled push loop term by term
    out = M.T @ (X * w).T
    return np.ascontiguousarray(out.T)


def spread_grouped(item_indptr, item_indices, user_indptr, user_indices, k_item, X, w_src, group, w_user, table):
    X = np.asarray(X, dtype=np.float64)
    n_users = user_indptr.shape[0] - 1
    n_items = X.shape[1]
    out = np.zeros_like(X)
    active = ((X * w_src) != 0.0).any(axis=0)
    for g in np.unique(group[active]):
        Xg = np.where(group == g, X, 0.0)
        Y = spread(item_indptr, item_indices, Xg, w_src, n_users)
        Z = spread(user_indptr, user_indices, Y, w_user, n_items)
        out += Z * table[g, k_item]
    return out


def target_ranks(S, excl_indptr, excl_indices, tgt_indptr, tgt_indices):
    B, n_items = S.shape
    ranks = np.empty(tgt_indices.shape[0], dtype=np.float64)
    ncand = np.empty(B, dtype=np.int64)
    for b in range(B):
        cand = np.ones(n_items, dtype=bool)
        cand[excl_indices[excl_indptr[b] : excl_indptr[b + 1]]] = False
        ncand[b] = int(cand.sum())
        lo, hi = tgt_indptr[b], tgt_indptr[b + 1]
        if lo == hi:
            continue
        sc = np.sort(S[b, cand])
        v = S[b, tgt_indices[lo:hi]]
        left = np.searchsorted(sc, v, side="left")
        right = np.searchsorted(sc, v, side="right")
        gt = sc.shape[0] - right
        ranks[lo:hi] = gt + (right - left + 1) / 2.0
    return ranks, ncand


def anneal_sweep(cost, assign, ii, jj, si, sj, uu, T, greedy, best=None, objective=0.0, best_objective=math.inf):
    Ls = assign.shape[1]
    accepted = 0
    total = 0.0
    for t in range(ii.shape[0]):
        i, j = int(ii[t]), int(jj[t])
        if i == j:
            continue
        a, c = int(si[t]), int(sj[t])
        bi, bj = assign[i, a], assign[j, c]
        if bi == bj:
            continue
        dR = cost[i, bj] + cost[j, bi] - cost[i, bi] - cost[j, bj]
        if not dR < math.inf:
            continue
        if dR < 0.0:
            ok = True
        elif dR > 0.0 and not greedy and T > 0.0:
            ok = uu[t] < math.exp(-dR / T)
        else:
            ok = False
        if not ok:
            continue
        if Ls > 1:
            row_i, row_j = assign[i], assign[j]
            if any(s != a and row_i[s] == bj for s in range(Ls)) or any(
                s != c and row_j[s] == bi for s in range(Ls)
            ):
                continue
        assign[i, a] = bj
        assign[j, c] = bi
        total += dR
        accepted += 1
        if best is not None and objective + total < best_objective:
            best_objective = objective + total
            best[...] = assign
    return accepted, total, best_objective


def assign_capacitated(cost, pool_indptr, pool_indices, capacity):
    U, I = cost.shape
    SINK = U + I
    assign = np.full(U, -1, dtype=np.int64)
    pu = np.zeros(U)
    pi = np.zeros(I)
    pt = 0.0
    occ = np.zeros(I, dtype=np.int64)
    holders: list[list[int]] = [[] for _ in range(I)]
    inf = math.inf
    cost_l = cost.tolist()
    pools = [pool_indices[pool_indptr[i] : pool_indptr[i + 1]].tolist() for i in range(U)]
    feasible = True
    for s in range(U):
        dist = [inf] * (U + I + 1)
        done = [False] * (U + I + 1)
        par = [-1] * (I + 1)
        dist[s] = 0.0
        heap = [(0.0, s)]
        pu_l, pi_l = pu.tolist(), pi.tolist()
        while heap:
            d, x = heapq.heappop(heap)
            if done[x]:
                continue
            done[x] = True
            if x == SINK:
                break
            if x < U:
                row = cost_l[x]
                cur = assign[x]
                for a in pools[x]:
                    if a == cur:
                        continue
                    c = row[a]
                    if not c < inf:
                        continue
                    nd = d + c + pu_l[x] - pi_l[a]
                    if nd < dist[U + a]:
                        dist[U + a] = nd
                        par[a] = x
                        heapq.heappush(heap, (nd, U + a))
            else:
                a = x - U
                if occ[a] < capacity:
                    nd = d + pi_l[a] - pt
                    if nd < dist[SINK]:
                        dist[SINK] = nd
                        par[I] = a
                        heapq.heappush(heap, (nd, SINK))
                # the compiled version walks a most-recent-first list
                for j in reversed(holders[a]):
                    nd = d - cost_l[j][a] + pi_l[a] - pu_l[j]
                    if nd < dist[j]:
                        dist[j] = nd
                        heapq.heappush(heap, (nd, j))
        dt = dist[SINK]
        if not dt < inf:
            feasible = False
            break
        dv = np.minimum(np.array(dist), dt)
        pu += dv[:U]
        pi += dv[U:SINK]
        pt += dt
        a = par[I]
        occ[a] += 1
        while True:
            i = par[a]
            prev = int(assign[i])
            if prev >= 0:
                holders[prev].remove(i)
            assign[i] = a
            holders[a].append(i)
            if prev < 0:
                break
            a = prev
    return assign, pu, pi, pt, feasible
