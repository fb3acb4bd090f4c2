import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

from netrec import available_backends, build_graph

ROOT = Path(__file__).resolve().parents[1]
MOVIELENS = Path(os.environ.get("NETREC_MOVIELENS", ROOT / "data" / "ml-100k" / "u.data"))

# users u1..u3 -> 0..2, items A..D -> 0..3
A, B, C, D = range(4)
G1_LINKS = [(0, A), (0, B), (0, C), (1, A), (1, B), (2, B), (2, D)]


@pytest.fixture
def g1():
    return build_graph(G1_LINKS, 3, 4)


@pytest.fixture(params=available_backends())
def backend(request):
    return request.param


@pytest.fixture(scope="session")
def movielens():
    if not MOVIELENS.exists():
        pytest.skip(f"MovieLens ratings not found at {MOVIELENS} (run scripts/fetch_movielens.py)")
    from netrec.ingest import load_dataset

    return load_dataset(MOVIELENS)


def random_links(seed, n_users, n_items, density):
    rng = np.random.default_rng(seed)
    mask = rng.random((n_users, n_items)) < density
    u, a = np.nonzero(mask)
    return np.column_stack([u, a])


@st.composite
def graphs(draw, max_users=50, max_items=50, min_side=2):
    """Random bipartite graphs; some users and items may have no links."""
    nu = draw(st.integers(min_side, max_users))
    ni = draw(st.integers(min_side, max_items))
    density = draw(st.floats(0.05, 0.6))
    seed = draw(st.integers(0, 2**32 - 1))
    return build_graph(random_links(seed, nu, ni, density), nu, ni)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
