import itertools
import logging

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from netrec import build_graph
from netrec.recommenders import (
    KernelContext,
    MethodSpec,
    UnknownMethodError,
    dense_oracle,
    get_kernel,
    indicator_rows,
    method_names,
    oracle_builder,
    rank_candidates,
    score,
    score_batch,
    score_heats,
    score_hybrid,
    score_probs,
    score_user_cf,
    score_zhou2008,
)
from netrec.recommenders.kernels import blattner_passes
from netrec.recommenders.oracle import dense_adjacency, heats_matrix, probs_matrix

from .conftest import A, B, C, D, graphs

# parameter cases per kernel; each case is checked against the dense oracle
PARAM_GRID = {
    "ProbS": [{}],
    "HeatS": [{}],
    "ProbS-HeatS": [{"lambda": v} for v in (0.0, 0.3, 0.75, 1.0)],
    "Zhou2008": [{"theta": v} for v in (-0.8, 0.0, 0.5, 1.0)],
    "Zhou2009": [{"eta": v} for v in (-0.8, 0.0, 1.0)],
    "RunRan2010": [{"theta": v} for v in (-0.6, 0.0, 1.0)],
    "Blattner2010": [{}],
    "Liu2011": [{"theta": v} for v in (-0.5, 0.0, 0.8, 1.0)],
    "Liu2011*": [{"theta": v} for v in (-0.3, 0.0, 0.14, 1.0)],
    "Lu2011": [{"epsilon": v} for v in (-0.8, 0.0, 1.0)],
    "Lu2011*": [{"epsilon": e, "theta": t} for e, t in itertools.product((-0.8, 0.5), (-0.2, 0.3))],
    "Qiu2011": [{"theta": v} for v in (-0.5, 0.0, 1.0, 1.5)],
    "Guo2012": [{"theta": v} for v in (0.0, 1.0, 1.8, 4.0)],
    "Liu2012": [{"lambda": l, "theta": t} for l, t in itertools.product((0.0, 0.25, 1.0), (-0.6, 0.0, 1.0))],
    "Qiu2013": [{"theta": v} for v in (-0.5, 0.0, 0.7)],
    "Zeng2013": [{"theta": t, "n": n} for t, n in itertools.product((-0.5, 0.0, 1.2), (1, 2, 3, 4))],
    "Zeng2014": [{"lambda": l, "theta": t} for l, t in itertools.product((0.0, 0.3, 1.0), (-1.0, 1.0, 1.9))],
    "3hybrid1": [
        {"theta": t, "epsilon": e, "eta": h}
        for t, e, h in itertools.product((0.5, 1.0, 1.1), (-0.5, 0.0), (-0.8, 0.0))
    ],
    "3hybrid2": [
        {"theta": t, "epsilon": e, "eta": h}
        for t, e, h in itertools.product((-0.6, 0.0), (-0.5, 0.0), (-0.8, 0.0, 1.0))
    ],
    "UserCF": [{}],
}

# (method, params, reference method, reference params): bit-exact reductions
ENDPOINTS = [
    ("ProbS-HeatS", {"lambda": 1.0}, "ProbS", {}),
    ("ProbS-HeatS", {"lambda": 0.0}, "HeatS", {}),
    ("Zhou2008", {"theta": 0.0}, "ProbS", {}),
    ("Zhou2009", {"eta": 0.0}, "ProbS", {}),
    ("RunRan2010", {"theta": 0.0}, "ProbS", {}),
    ("Liu2011", {"theta": 1.0}, "HeatS", {}),
    ("Liu2011*", {"theta": 0.0}, "HeatS", {}),
    ("Lu2011", {"epsilon": 0.0}, "ProbS", {}),
    ("Lu2011*", {"epsilon": 0.0, "theta": 0.0}, "ProbS", {}),
    ("Qiu2011", {"theta": 0.0}, "ProbS", {}),
    ("Guo2012", {"theta": 1.0}, "ProbS", {}),
    ("Liu2012", {"lambda": 1.0, "theta": 0.0}, "ProbS", {}),
    ("Qiu2013", {"theta": 0.0}, "ProbS", {}),
    ("Zeng2013", {"theta": 0.7, "n": 1}, "ProbS", {}),
    ("Zeng2014", {"lambda": 1.0, "theta": 1.0}, "ProbS", {}),
    ("3hybrid1", {"theta": 1.0, "epsilon": 0.0, "eta": 0.0}, "ProbS", {}),
    ("3hybrid2", {"theta": 0.0, "epsilon": 0.0, "eta": 0.0}, "ProbS", {}),
    ("3hybrid2", {"theta": 0.0, "epsilon": 0.0, "eta": 1.0}, "Zhou2009", {"eta": 1.0}),
]

_hyp = settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])


def _all_scores(g, name, params, backend=None):
    ctx = KernelContext(g, backend)
    return score_batch(g, MethodSpec(name, params), ctx=ctx)


def _oracle_scores(g, name, params):
    Adj = dense_adjacency(g)
    kernel = oracle_builder(name, **params)(Adj)
    rows = []
    for f in Adj:
        rows.append(kernel @ f if isinstance(kernel, np.ndarray) else kernel(f))
    return np.array(rows).reshape(g.n_users, g.n_items)


def test_all_kernels_registered():
    assert set(PARAM_GRID) == set(method_names())
    assert len(method_names()) == 20  # 19 kernels plus the UserCF baseline


class TestOracleEquivalence:
    @_hyp
    @given(graphs())
    def test_all_kernels_match_oracle(self, g):
        for name, cases in PARAM_GRID.items():
            for params in cases:
                got = _all_scores(g, name, params)
                ref = _oracle_scores(g, name, params)
                scale = max(np.abs(ref).max(initial=0.0), 1.0)
                np.testing.assert_allclose(got, ref, rtol=1e-9, atol=1e-12 * scale, err_msg=f"{name} {params}")

    @settings(max_examples=20, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
    @given(graphs(max_users=30, max_items=30))
    def test_backends_agree_with_oracle(self, backend, g):
        for name in ("ProbS", "Qiu2011", "Zeng2014", "Blattner2010"):
            params = PARAM_GRID[name][-1]
            np.testing.assert_allclose(
                _all_scores(g, name, params, backend), _oracle_scores(g, name, params), rtol=1e-9, atol=1e-12
            )

    def test_dense_oracle_g1(self, g1):
        f = indicator_rows(g1, [1])[0]
        np.testing.assert_allclose(
            dense_oracle(g1, oracle_builder("ProbS"), f, 1).scores, score_probs(g1, 1).scores, rtol=1e-15
        )
        np.testing.assert_allclose(
            dense_oracle(g1, oracle_builder("HeatS"), f, 1).scores, score_heats(g1, 1).scores, rtol=1e-15
        )

    def test_dense_oracle_empty_graph(self):
        g = build_graph([], 2, 3)
        out = dense_oracle(g, oracle_builder("ProbS"), np.ones(3))
        np.testing.assert_array_equal(out.scores, np.zeros(3))


class TestEndpoints:
    @_hyp
    @given(graphs())
    def test_reductions_bit_exact(self, g):
        for name, params, ref_name, ref_params in ENDPOINTS:
            np.testing.assert_array_equal(
                _all_scores(g, name, params), _all_scores(g, ref_name, ref_params), err_msg=f"{name} {params}"
            )

    @settings(max_examples=30, deadline=None)
    @given(graphs(), st.floats(-1.0, 1.0))
    def test_guo_is_zhou2008_mirror(self, g, theta):
        np.testing.assert_allclose(
            _all_scores(g, "Guo2012", {"theta": theta}),
            _all_scores(g, "Zhou2008", {"theta": 1.0 - theta}),
            rtol=1e-12,
            atol=1e-15,
        )


class TestConservation:
    @settings(max_examples=100, deadline=None)
    @given(graphs())
    def test_probs_family_conserves(self, g):
        users = np.flatnonzero(g.k_user > 0)
        X = indicator_rows(g, users)
        for name, params in (("ProbS", {}), ("RunRan2010", {"theta": 0.7}), ("RunRan2010", {"theta": -0.4})):
            h = score_batch(g, MethodSpec(name, params), users)
            np.testing.assert_allclose(h.sum(axis=1), X.sum(axis=1), rtol=1e-10)

    @settings(max_examples=100, deadline=None)
    @given(graphs())
    def test_zeng2013_each_iteration_conserves(self, g):
        ctx = KernelContext(g)
        X = indicator_rows(g, np.flatnonzero(g.k_user > 0))
        mass = X.sum(axis=1)
        for _ in range(4):
            X = ctx.probs(X)
            np.testing.assert_allclose(X.sum(axis=1), mass, rtol=1e-10)

    @settings(max_examples=100, deadline=None)
    @given(graphs(), st.integers(0, 2**32 - 1))
    def test_blattner_forward_conserves_when_degrees_at_least_two(self, g, seed):
        links = g.links()
        # give every user at least two items
        rng = np.random.default_rng(seed)
        extra = [(u, int(a)) for u in range(g.U) for a in rng.choice(g.I, 2, replace=False)]
        h = build_graph(np.vstack([links, extra]) if len(links) else extra, g.U, g.I)
        ctx = KernelContext(h)
        X = indicator_rows(h, range(h.U))
        fwd, _ = blattner_passes(ctx, X)
        np.testing.assert_allclose(fwd.sum(axis=1), X.sum(axis=1), rtol=1e-10)

    @settings(max_examples=100, deadline=None)
    @given(graphs())
    def test_probs_columns_and_heats_rows_sum_to_one(self, g):
        Adj = dense_adjacency(g)
        live = g.k_item > 0
        np.testing.assert_allclose(probs_matrix(Adj).sum(axis=0)[live], 1.0, rtol=1e-10)
        np.testing.assert_allclose(heats_matrix(Adj).sum(axis=1)[live], 1.0, rtol=1e-10)


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(graphs(), st.integers(0, 2**32 - 1))
    def test_heats_bounded(self, g, seed):
        f = np.random.default_rng(seed).random((3, g.I)) * 5
        out = get_kernel("HeatS").score(KernelContext(g), f)
        assert np.all(out >= 0)
        assert np.all(out <= f.max(axis=1, keepdims=True) * (1 + 1e-12))

    @settings(max_examples=40, deadline=None)
    @given(graphs())
    def test_non_negative_scores(self, g):
        for name, cases in PARAM_GRID.items():
            for params in cases:
                if name in ("Zhou2009", "3hybrid1", "3hybrid2") and params.get("eta", 0) < 0:
                    continue  # negative eta subtracts a second spread by design
                assert np.all(_all_scores(g, name, params) >= 0), (name, params)

    @settings(max_examples=40, deadline=None)
    @given(graphs(), st.integers(0, 2**32 - 1))
    def test_relabeling_equivariance(self, g, seed):
        rng = np.random.default_rng(seed)
        pu, pi = rng.permutation(g.U), rng.permutation(g.I)
        links = g.links()
        h = build_graph(np.column_stack([pu[links[:, 0]], pi[links[:, 1]]]), g.U, g.I)
        for name in ("ProbS", "Zeng2014", "3hybrid1"):
            params = PARAM_GRID[name][-1]
            s_g = _all_scores(g, name, params)
            s_h = _all_scores(h, name, params)
            np.testing.assert_allclose(s_h[np.ix_(pu, pi)], s_g, rtol=1e-12, atol=1e-15)

    def test_asymmetry_witness(self):
        # items 0 (degree 3) and 1 (degree 1) share user 0
        g = build_graph([(0, 0), (0, 1), (1, 0), (2, 0)], 3, 2)
        W = probs_matrix(dense_adjacency(g))
        assert W[0, 1] > W[1, 0]

    def test_unknown_method_lists_names(self):
        with pytest.raises(UnknownMethodError) as exc:
            get_kernel("NoSuchMethod")
        assert "ProbS" in str(exc.value)

    def test_method_spec_round_trip(self):
        spec = MethodSpec.parse("Zeng2014(lambda=0.3, theta=1.9)")
        assert MethodSpec.parse(str(spec)) == spec
        with pytest.raises(ValueError):
            MethodSpec("Zeng2013", {"n": 1.5})
        with pytest.raises(ValueError):
            MethodSpec("ProbS", {"theta": 1.0})


class TestG1:
    def test_probs(self, g1):
        s = score_probs(g1, 1).scores
        assert s[C] == pytest.approx(5 / 18, rel=1e-15)
        assert s[D] == pytest.approx(1 / 6, rel=1e-15)

    def test_heats(self, g1):
        s = score_heats(g1, 1).scores
        assert s[C] == pytest.approx(2 / 3, rel=1e-15)
        assert s[D] == pytest.approx(1 / 2, rel=1e-15)

    def test_hybrid_endpoints(self, g1):
        np.testing.assert_array_equal(score_hybrid(g1, 1, 1.0).scores, score_probs(g1, 1).scores)
        np.testing.assert_array_equal(score_hybrid(g1, 1, 0.0).scores, score_heats(g1, 1).scores)

    def test_hybrid_outside_range_warns(self, g1, caplog):
        with caplog.at_level(logging.WARNING):
            score_hybrid(g1, 1, 1.5)
        assert "outside" in caplog.text

    def test_zhou2008_theta_one(self, g1):
        assert score_zhou2008(g1, 1, 1.0).scores[C] == pytest.approx(2 / 3, rel=1e-15)

    def test_user_cf_similarity(self, g1):
        # s(u2,u1) = 2/sqrt(6), s(u2,u3) = 1/2, s(u2,u2) = 1; C is reached only through u1
        s12, s23 = 2 / np.sqrt(6), 1 / 2
        sc = score_user_cf(g1, 1).scores
        assert sc[C] == pytest.approx(s12 / (1 + s12 + s23), rel=1e-14)
        assert sc[D] == pytest.approx(s23 / (1 + s12 + s23), rel=1e-14)

    def test_qiu2011_per_source_lambda(self, g1):
        # k_max = 3: lambda_A = 2/3, lambda_B = 1
        kA, kB, kC = 2.0, 3.0, 1.0
        wCA = 1 / 3 / (kC ** (1 - 2 / 3) * kA ** (2 / 3))  # via u1
        wCB = 1 / 3 / kB  # via u1
        assert score(g1, 1, "Qiu2011", theta=1.0).scores[C] == pytest.approx(wCA + wCB, rel=1e-14)

    def test_degree_zero_user(self, caplog):
        g = build_graph([(0, 0), (0, 1)], 2, 2)
        with caplog.at_level(logging.WARNING):
            s = score_probs(g, 1)
        np.testing.assert_array_equal(s.scores, [0.0, 0.0])
        assert "no training links" in caplog.text

    def test_single_link(self):
        g = build_graph([(0, 0)], 1, 3)
        s = score_probs(g, 0).scores
        np.testing.assert_array_equal(s[1:], 0.0)

    def test_heats_complete_graph(self):
        g = build_graph([(u, a) for u in range(3) for a in range(4)], 3, 4)
        np.testing.assert_allclose(score_heats(g, 0).scores, 1.0, rtol=1e-15)

    def test_blattner_all_degree_one(self):
        g = build_graph([(0, 0), (1, 1), (2, 1)], 3, 3)
        np.testing.assert_array_equal(score(g, 0, "Blattner2010").scores, 0.0)

    def test_guo_no_overlap(self):
        g = build_graph([(0, 0), (1, 1)], 2, 2)
        np.testing.assert_array_equal(score(g, 0, "Guo2012", theta=0.0).scores[1], 0.0)

    def test_user_cf_identical_and_disjoint(self):
        g = build_graph([(0, 0), (0, 1), (1, 0), (1, 1), (1, 2), (2, 3)], 3, 4)
        # user 2 shares nothing with user 0 so item 3 gets nothing
        assert score_user_cf(g, 0).scores[3] == 0.0


class TestRankCandidates:
    def test_g1_order(self, g1):
        rc = rank_candidates(score_probs(g1, 1), g1, 1)
        np.testing.assert_array_equal(rc.items, [C, D])
        np.testing.assert_array_equal(rc.ranks, [1.0, 2.0])

    def test_full_tie_mid_rank(self):
        g = build_graph([(0, 0)], 1, 101)
        rc = rank_candidates(np.zeros(101), g, 0)
        assert rc.items.size == 100
        np.testing.assert_array_equal(rc.ranks, 50.5)

    def test_all_collected(self):
        g = build_graph([(0, 0), (0, 1)], 1, 2)
        rc = rank_candidates(np.ones(2), g, 0)
        assert rc.items.size == 0 and rc.ranks.size == 0

    def test_partial_tie(self):
        g = build_graph([(0, 0)], 1, 5)
        rc = rank_candidates(np.array([9.0, 3.0, 1.0, 3.0, 0.5]), g, 0)
        np.testing.assert_array_equal(rc.items, [1, 3, 2, 4])
        np.testing.assert_array_equal(rc.ranks, [1.5, 1.5, 3.0, 4.0])

    def test_collected_excluded_even_if_top(self, g1):
        rc = rank_candidates(np.array([9.0, 9.0, 0.0, 0.0]), g1, 1)
        assert A not in rc.items and B not in rc.items
