"""Time the compiled and pure-Python cores on the same inputs.

Usage: ``python benchmarks/bench_backends.py [--data PATH] [--repeat N]``.
Without ``--data`` a random graph of MovieLens size is used. Results of
the two backends are checked for agreement before timing is reported.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from netrec import available_backends, build_graph
from netrec._backend import get_backend
from netrec.crowd import RankMatrix, assign_mpo
from netrec.ingest import load_dataset
from netrec.recommenders import KernelContext, MethodSpec, indicator_rows


def _random_links(n_users=943, n_items=1682, n_links=82520, seed=0):
    rng = np.random.default_rng(seed)
    # popularity-skewed items, as in rating data
    p = 1.0 / np.arange(1, n_items + 1) ** 0.8
    p /= p.sum()
    links = np.column_stack([rng.integers(0, n_users, 3 * n_links), rng.choice(n_items, 3 * n_links, p=p)])
    links = np.unique(links, axis=0)
    return links[rng.permutation(len(links))[:n_links]], n_users, n_items


def _best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data", help="ratings file; random graph if omitted")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--users", type=int, default=256, help="users per scoring batch")
    args = ap.parse_args(argv)

    if args.data:
        ds = load_dataset(args.data)
        links, nu, ni = ds.links, ds.n_users, ds.n_items
    else:
        links, nu, ni = _random_links()
    g = build_graph(links, nu, ni)
    users = np.flatnonzero(g.k_user > 0)[: args.users]
    X = indicator_rows(g, users)
    spec = MethodSpec.parse("Qiu2011(theta=1.0)")

    backends = available_backends()
    print(f"graph: U={g.n_users} I={g.n_items} L={g.n_links}; backends: {', '.join(backends)}")
    results = {}
    for name in backends:
        core = get_backend(name)
        ctx = KernelContext(g, core)
        row = {}
        row["probs"] = _best_of(lambda: ctx.probs(X), args.repeat)
        row["qiu2011"] = _best_of(lambda: spec.kernel.score(ctx, X, **spec.params), args.repeat)
        S = row["probs"][1]
        R = RankMatrix.from_scores(S, g, users)
        start = assign_mpo(R, 5)
        rng = np.random.default_rng(1)
        n = 100 * len(users)
        draws = [rng.integers(0, len(users), n), rng.integers(0, len(users), n),
                 np.zeros(n, np.int64), np.zeros(n, np.int64), rng.random(n)]

        def sweep():
            items = start.items.copy()
            return core.anneal_sweep(np.ascontiguousarray(R.cost), items, *draws, 5.0, False)[0]

        row["anneal_sweep"] = _best_of(sweep, args.repeat)
        ptr = np.arange(0, (len(users) + 1) * 50, 50, dtype=np.int64)
        idx = np.ascontiguousarray(R.prefs[:, :50].ravel().astype(np.int32))
        row["assign_capacitated"] = _best_of(
            lambda: core.assign_capacitated(np.ascontiguousarray(R.cost), ptr, idx, 2)[0], 1
        )
        results[name] = row

    names = list(results[backends[0]])
    print(f"{'operation':22s}" + "".join(f"{b:>12s}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for op in names:
        t = [results[b][op][0] for b in backends]
        line = f"{op:22s}" + "".join(f"{x * 1e3:10.1f}ms" for x in t)
        if len(backends) > 1:
            a, b = results[backends[0]][op][1], results[backends[1]][op][1]
            same = np.allclose(a, b, rtol=1e-12, atol=0) if isinstance(a, np.ndarray) else a == b
            line += f"{t[1] / t[0]:11.1f}x" + ("" if same else "  MISMATCH")
        print(line)


if __name__ == "__main__":
    main()
