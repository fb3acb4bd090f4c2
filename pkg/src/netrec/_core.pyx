# cython: language_level=3
"""Compiled inner loops. Same signatures and results as ``_core_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, INFINITY
from libc.stdlib cimport malloc, realloc, free

cnp.import_array()

ctypedef cnp.int64_t i64
ctypedef cnp.int32_t i32

NAME = "cython"


def spread(const i64[::1] src_indptr, const i32[::1] src_indices,
           const double[:, ::1] X, const double[::1] w, Py_ssize_t n_dst):
    """out[b, d] = sum over sources s adjacent to d of X[b, s] * w[s]."""
    cdef Py_ssize_t B = X.shape[0], n_src = X.shape[1]
    out = np.zeros((B, n_dst), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t b, s, p
    cdef double v
    with nogil:
        for b in range(B):
            for s in range(n_src):
                v = X[b, s] * w[s]
                if v != 0.0:
                    for p in range(src_indptr[s], src_indptr[s + 1]):
                        o[b, src_indices[p]] += v
    return out


def spread_grouped(const i64[::1] item_indptr, const i32[::1] item_indices,
                   const i64[::1] user_indptr, const i32[::1] user_indices,
                   const i64[::1] k_item, const double[:, ::1] X,
                   const double[::1] w_src, const i32[::1] group,
                   const double[::1] w_user, const double[:, ::1] table):
    """Two-step spread with a destination factor depending on the source group.

    out[b, a] = sum_g table[g, k_a] * sum_j a_ja w_user[j] sum_{s in g} a_js X[b, s] w_src[s]
    """
    cdef Py_ssize_t B = X.shape[0], n_items = X.shape[1]
    cdef Py_ssize_t n_users = user_indptr.shape[0] - 1
    cdef Py_ssize_t n_groups = table.shape[0]
    out = np.zeros((B, n_items), dtype=np.float64)
    cdef double[:, ::1] o = out
    u_arr = np.zeros(n_users, dtype=np.float64)
    cdef double[::1] u = u_arr
    src_arr = np.empty(n_items, dtype=np.int32)
    srt_arr = np.empty(n_items, dtype=np.int32)
    cnt_arr = np.zeros(n_groups + 1, dtype=np.int64)
    cdef i32[::1] src = src_arr
    cdef i32[::1] srt = srt_arr
    cdef i64[::1] cnt = cnt_arr
    cdef Py_ssize_t b, s, p, q, j, g, n_src, start, stop, r
    cdef double v
    with nogil:
        for b in range(B):
            n_src = 0
            for g in range(n_groups + 1):
                cnt[g] = 0
            for s in range(n_items):
                if X[b, s] * w_src[s] != 0.0:
                    src[n_src] = <i32>s
                    n_src += 1
                    cnt[group[s] + 1] += 1
            for g in range(n_groups):
                cnt[g + 1] += cnt[g]
            # stable counting sort of sources by group
            for r in range(n_src):
                s = src[r]
                srt[cnt[group[s]]] = <i32>s
                cnt[group[s]] += 1
            start = 0
            while start < n_src:
                g = group[srt[start]]
                stop = start
                while stop < n_src and group[srt[stop]] == g:
                    s = srt[stop]
                    v = X[b, s] * w_src[s]
                    for p in range(item_indptr[s], item_indptr[s + 1]):
                        u[item_indices[p]] += v
                    stop += 1
                for j in range(n_users):
                    if u[j] != 0.0:
                        v = u[j] * w_user[j]
                        u[j] = 0.0
                        if v != 0.0:
                            for q in range(user_indptr[j], user_indptr[j + 1]):
                                o[b, user_indices[q]] += v * table[g, k_item[user_indices[q]]]
                start = stop
    return out


def target_ranks(const double[:, ::1] S, const i64[::1] excl_indptr, const i32[::1] excl_indices,
                 const i64[::1] tgt_indptr, const i32[::1] tgt_indices):
    """Mid-rank of each target item among the non-excluded items of its row.

    Returns ``(ranks, n_candidates)``; ranks are 1-based, ties share the
    average position of their block.
    """
    cdef Py_ssize_t B = S.shape[0], n_items = S.shape[1]
    cdef Py_ssize_t n_tgt = tgt_indices.shape[0]
    ranks_arr = np.empty(n_tgt, dtype=np.float64)
    ncand_arr = np.empty(B, dtype=np.int64)
    mask_arr = np.zeros(n_items, dtype=np.uint8)
    cdef double[::1] ranks = ranks_arr
    cdef i64[::1] ncand = ncand_arr
    cdef cnp.uint8_t[::1] mask = mask_arr
    cdef Py_ssize_t b, p, t, a, gt, eq, n_ex
    cdef double sv, x
    with nogil:
        for b in range(B):
            n_ex = 0
            for p in range(excl_indptr[b], excl_indptr[b + 1]):
                if not mask[excl_indices[p]]:
                    mask[excl_indices[p]] = 1
                    n_ex += 1
            ncand[b] = n_items - n_ex
            for t in range(tgt_indptr[b], tgt_indptr[b + 1]):
                sv = S[b, tgt_indices[t]]
                gt = 0
                eq = 0
                for a in range(n_items):
                    if not mask[a]:
                        x = S[b, a]
                        if x > sv:
                            gt += 1
                        elif x == sv:
                            eq += 1
                ranks[t] = gt + (eq + 1) / 2.0
            for p in range(excl_indptr[b], excl_indptr[b + 1]):
                mask[excl_indices[p]] = 0
    return ranks_arr, ncand_arr


def anneal_sweep(const double[:, ::1] cost, i64[:, ::1] assign,
                 const i64[::1] ii, const i64[::1] jj,
                 const i64[::1] si, const i64[::1] sj,
                 const double[::1] uu, double T, bint greedy,
                 i64[:, ::1] best=None, double objective=0.0, double best_objective=INFINITY):
    """One macro step of pair swaps; ``assign`` is updated in place.

    Returns ``(n_accepted, total_delta, best_objective)``. A swap is
    rejected when it would give a user an item it cannot take (infinite
    cost) or already holds. When ``best`` is given, the running objective
    (starting at ``objective``) is tracked and ``assign`` is copied into
    ``best`` whenever it drops below ``best_objective``.
    """
    cdef Py_ssize_t n = ii.shape[0], Ls = assign.shape[1]
    cdef Py_ssize_t t, i, j, a, c, s
    cdef i64 bi, bj
    cdef double dR, total = 0.0
    cdef long accepted = 0
    cdef bint ok, track = best is not None
    cdef Py_ssize_t U = assign.shape[0], r
    with nogil:
        for t in range(n):
            i = ii[t]
            j = jj[t]
            if i == j:
                continue
            a = si[t]
            c = sj[t]
            bi = assign[i, a]
            bj = assign[j, c]
            if bi == bj:
                continue
            dR = cost[i, bj] + cost[j, bi] - cost[i, bi] - cost[j, bj]
            if not (dR < INFINITY):
                continue
            if dR < 0.0:
                ok = True
            elif dR > 0.0 and not greedy and T > 0.0:
                ok = uu[t] < exp(-dR / T)
            else:
                ok = False
            if not ok:
                continue
            if Ls > 1:
                for s in range(Ls):
                    if (s != a and assign[i, s] == bj) or (s != c and assign[j, s] == bi):
                        ok = False
                        break
                if not ok:
                    continue
            assign[i, a] = bj
            assign[j, c] = bi
            total += dR
            accepted += 1
            if track and objective + total < best_objective:
                best_objective = objective + total
                for r in range(U):
                    for s in range(Ls):
                        best[r, s] = assign[r, s]
    return accepted, total, best_objective


# --- capacitated assignment (successive shortest paths) -------------------

cdef struct Heap:
    double *key
    i64 *node
    Py_ssize_t size
    Py_ssize_t cap


cdef inline bint _less(Heap *h, Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    if h.key[a] < h.key[b]:
        return True
    if h.key[a] > h.key[b]:
        return False
    return h.node[a] < h.node[b]


cdef inline void _swap(Heap *h, Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    cdef double k = h.key[a]
    cdef i64 n = h.node[a]
    h.key[a] = h.key[b]
    h.node[a] = h.node[b]
    h.key[b] = k
    h.node[b] = n


cdef int _push(Heap *h, double key, i64 node) noexcept nogil:
    cdef Py_ssize_t i, parent
    cdef double *nk
    cdef i64 *nn
    if h.size == h.cap:
        nk = <double *> realloc(h.key, 2 * h.cap * sizeof(double))
        if nk == NULL:
            return -1
        h.key = nk
        nn = <i64 *> realloc(h.node, 2 * h.cap * sizeof(i64))
        if nn == NULL:
            return -1
        h.node = nn
        h.cap = 2 * h.cap
    i = h.size
    h.key[i] = key
    h.node[i] = node
    h.size += 1
    while i > 0:
        parent = (i - 1) // 2
        if _less(h, i, parent):
            _swap(h, i, parent)
            i = parent
        else:
            break
    return 0


cdef void _pop(Heap *h, double *key, i64 *node) noexcept nogil:
    cdef Py_ssize_t i = 0, l, r, m
    key[0] = h.key[0]
    node[0] = h.node[0]
    h.size -= 1
    h.key[0] = h.key[h.size]
    h.node[0] = h.node[h.size]
    while True:
        l = 2 * i + 1
        r = l + 1
        m = i
        if l < h.size and _less(h, l, m):
            m = l
        if r < h.size and _less(h, r, m):
            m = r
        if m == i:
            break
        _swap(h, i, m)
        i = m


def assign_capacitated(const double[:, ::1] cost, const i64[::1] pool_indptr,
                       const i32[::1] pool_indices, i64 capacity):
    """Minimum-cost assignment of every user to one item, at most ``capacity`` users per item.

    Users are inserted one at a time; each insertion follows a shortest
    augmenting path (Dijkstra on reduced costs) through the residual graph
    users -> items -> sink. Only (user, item) pairs listed in the user's pool
    are used; the returned potentials let the caller check optimality
    against the full cost matrix.

    Returns ``(assign, pot_user, pot_item, pot_sink, feasible)``.
    """
    cdef Py_ssize_t U = cost.shape[0], I = cost.shape[1]
    cdef Py_ssize_t V = U + I + 1
    cdef i64 SINK = U + I
    assign_arr = np.full(U, -1, dtype=np.int64)
    pu_arr = np.zeros(U, dtype=np.float64)
    pi_arr = np.zeros(I, dtype=np.float64)
    occ_arr = np.zeros(I, dtype=np.int64)
    head_arr = np.full(I, -1, dtype=np.int64)
    nxt_arr = np.full(U, -1, dtype=np.int64)
    prv_arr = np.full(U, -1, dtype=np.int64)
    dist_arr = np.empty(V, dtype=np.float64)
    done_arr = np.zeros(V, dtype=np.uint8)
    par_arr = np.full(I + 1, -1, dtype=np.int64)
    cdef i64[::1] asg = assign_arr
    cdef double[::1] pu = pu_arr
    cdef double[::1] pi = pi_arr
    cdef i64[::1] occ = occ_arr
    cdef i64[::1] head = head_arr
    cdef i64[::1] nxt = nxt_arr
    cdef i64[::1] prv = prv_arr
    cdef double[::1] dist = dist_arr
    cdef cnp.uint8_t[::1] done = done_arr
    cdef i64[::1] par = par_arr   # item -> user that reached it; par[I] = last item before sink
    cdef double pt = 0.0
    cdef Heap h
    cdef Py_ssize_t s, v, p
    cdef i64 x, a, i, j, prev
    cdef double d, nd, dt, c
    cdef bint feasible = True
    cdef int err = 0

    h.cap = 1024
    h.size = 0
    h.key = <double *> malloc(h.cap * sizeof(double))
    h.node = <i64 *> malloc(h.cap * sizeof(i64))
    if h.key == NULL or h.node == NULL:
        free(h.key)
        free(h.node)
        raise MemoryError()

    with nogil:
        for s in range(U):
            for v in range(V):
                dist[v] = INFINITY
                done[v] = 0
            h.size = 0
            dist[s] = 0.0
            err = _push(&h, 0.0, s)
            dt = INFINITY
            while h.size > 0 and err == 0:
                _pop(&h, &d, &x)
                if done[x]:
                    continue
                done[x] = 1
                if x == SINK:
                    break
                if x < U:
                    i = x
                    for p in range(pool_indptr[i], pool_indptr[i + 1]):
                        a = pool_indices[p]
                        if a == asg[i]:
                            continue
                        c = cost[i, a]
                        if not (c < INFINITY):
                            continue
                        nd = d + c + pu[i] - pi[a]
                        if nd < dist[U + a]:
                            dist[U + a] = nd
                            par[a] = i
                            err = _push(&h, nd, U + a)
                else:
                    a = x - U
                    if occ[a] < capacity:
                        nd = d + pi[a] - pt
                        if nd < dist[SINK]:
                            dist[SINK] = nd
                            par[I] = a
                            err = _push(&h, nd, SINK)
                    j = head[a]
                    while j >= 0:
                        nd = d - cost[j, a] + pi[a] - pu[j]
                        if nd < dist[j]:
                            dist[j] = nd
                            err = _push(&h, nd, j)
                        j = nxt[j]
            if err != 0:
                break
            dt = dist[SINK]
            if not (dt < INFINITY):
                feasible = False
                break
            for v in range(U):
                pu[v] += dist[v] if dist[v] < dt else dt
            for v in range(I):
                pi[v] += dist[U + v] if dist[U + v] < dt else dt
            pt += dt
            # augment along parents back to the inserted user
            a = par[I]
            occ[a] += 1
            while True:
                i = par[a]
                prev = asg[i]
                if prev >= 0:
                    if prv[i] >= 0:
                        nxt[prv[i]] = nxt[i]
                    else:
                        head[prev] = nxt[i]
                    if nxt[i] >= 0:
                        prv[nxt[i]] = prv[i]
                asg[i] = a
                prv[i] = -1
                nxt[i] = head[a]
                if head[a] >= 0:
                    prv[head[a]] = i
                head[a] = i
                if prev < 0:
                    break
                a = prev
    free(h.key)
    free(h.node)
    if err != 0:
        raise MemoryError()
    return assign_arr, pu_arr, pi_arr, pt, bool(feasible)
