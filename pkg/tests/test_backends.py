import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netrec import available_backends
from netrec._backend import backend_name, get_backend, set_backend
from netrec.crowd import RankMatrix, assign_mpo
from netrec.recommenders import KernelContext, MethodSpec, indicator_rows, score_batch

from .conftest import graphs

needs_both = pytest.mark.skipif(len(available_backends()) < 2, reason="compiled extension not built")


class TestSelection:
    def test_python_always_available(self):
        assert "python" in available_backends()
        assert get_backend("python").NAME == "python"

    def test_unknown_name(self):
        with pytest.raises(ValueError):
            set_backend("fortran")
        with pytest.raises(ValueError):
            get_backend("fortran")

    def test_switch_and_restore(self):
        before = backend_name()
        try:
            assert set_backend("python").NAME == "python"
            assert backend_name() == "python"
        finally:
            set_backend(before)

    @pytest.mark.parametrize("name", ["python", "auto"])
    def test_environment_variable(self, name):
        env = {**os.environ, "NETREC_BACKEND": name}
        out = subprocess.run(
            [sys.executable, "-c", "from netrec._backend import backend_name; print(backend_name())"],
            env=env, capture_output=True, text=True, check=True,
        ).stdout.strip()
        expected = "python" if name == "python" else available_backends()[0]
        assert out == expected


@needs_both
class TestAgreement:
    @settings(max_examples=40, deadline=None)
    @given(graphs(), st.sampled_from(["ProbS", "HeatS", "Qiu2011(theta=1.3)", "Zeng2013(theta=0.5)",
                                      "Blattner2010", "3hybrid1(theta=1.1,epsilon=-0.5,eta=-0.8)"]))
    def test_scores(self, g, method):
        spec = MethodSpec.parse(method)
        a = score_batch(g, spec, ctx=KernelContext(g, "cython"))
        b = score_batch(g, spec, ctx=KernelContext(g, "python"))
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)

    @settings(max_examples=40, deadline=None)
    @given(graphs(), st.integers(0, 2**32 - 1))
    def test_target_ranks(self, g, seed):
        rng = np.random.default_rng(seed)
        users = np.flatnonzero(g.k_user > 0)
        S = rng.integers(0, 4, (users.size, g.I)).astype(float)  # many ties
        excl_ptr = np.r_[0, np.cumsum(g.k_user[users])].astype(np.int64)
        excl_idx = (np.concatenate([g.items_of(u) for u in users]) if users.size else np.zeros(0)).astype(np.int32)
        tgt = [rng.choice(g.I, int(rng.integers(0, 3)), replace=False) for _ in users]
        tgt_ptr = np.r_[0, np.cumsum([len(t) for t in tgt])].astype(np.int64)
        tgt_idx = (np.concatenate(tgt) if tgt else np.zeros(0)).astype(np.int32)
        a = get_backend("cython").target_ranks(S, excl_ptr, excl_idx, tgt_ptr, tgt_idx)
        b = get_backend("python").target_ranks(S, excl_ptr, excl_idx, tgt_ptr, tgt_idx)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    @pytest.mark.parametrize("L", [1, 3])
    def test_anneal_sweep(self, L):
        rng = np.random.default_rng(L)
        R = RankMatrix.from_ranks(np.array([rng.permutation(20) + 1 for _ in range(30)], dtype=float))
        start = assign_mpo(R, 5, L)
        n = 3000
        draws = (rng.integers(0, 30, n), rng.integers(0, 30, n), rng.integers(0, L, n), rng.integers(0, L, n),
                 rng.random(n))
        out = []
        for name in ("cython", "python"):
            items = start.items.copy()
            best = items.copy()
            res = get_backend(name).anneal_sweep(R.cost, items, *draws, 3.0, False, best, start.objective,
                                                 start.objective)
            out.append((res, items, best))
        assert out[0][0] == out[1][0]
        np.testing.assert_array_equal(out[0][1], out[1][1])
        np.testing.assert_array_equal(out[0][2], out[1][2])

    @pytest.mark.parametrize("cap", [1, 2, 7])
    def test_assign_capacitated(self, cap):
        rng = np.random.default_rng(cap)
        R = RankMatrix.from_ranks(np.array([rng.permutation(15) + 1 for _ in range(25)], dtype=float))
        ptr = np.arange(0, 26 * 15, 15, dtype=np.int64)
        idx = np.ascontiguousarray(R.prefs.ravel().astype(np.int32))
        a = get_backend("cython").assign_capacitated(R.cost, ptr, idx, cap)
        b = get_backend("python").assign_capacitated(R.cost, ptr, idx, cap)
        assert a[4] == b[4]
        if a[4]:
            np.testing.assert_array_equal(a[0], b[0])
            np.testing.assert_allclose(a[3], b[3], rtol=1e-12)

    def test_indicator_rows_shared(self, g1):
        X = indicator_rows(g1, [0, 1, 2])
        for name in ("cython", "python"):
            np.testing.assert_array_equal(KernelContext(g1, name).probs(X), KernelContext(g1, "python").probs(X))
