import numpy as np
import pytest
from hypothesis import strategies as st

from hmcm.hierarchy import build_from_edges, build_from_prefix_codes


# -- independent oracles ------------------------------------------------------
# These walk the child lists directly and never touch the closure matrix or
# the compiled kernels.

def dfs_descendants(hier, a):
    out, stack = set(), [a]
    while stack:
        x = stack.pop()
        out.add(x)
        stack.extend(hier.children[x])
    return out


def naive_mcm(h, hier):
    h = np.asarray(h, dtype=float)
    out = np.empty_like(h)
    trace = np.empty(h.shape, dtype=np.int64)
    for a in range(hier.label_count):
        best = None
        for b in sorted(dfs_descendants(hier, a)):
            if best is None or h[b] > h[best]:
                best = b
        out[a], trace[a] = h[best], best
    return out, trace


def naive_mcloss(h, y, hier, eps=1e-7):
    h = np.clip(np.asarray(h, dtype=float), eps, 1 - eps)
    m, _ = naive_mcm(h, hier)
    total = 0.0
    for a in range(hier.label_count):
        if y[a]:
            total -= np.log(max(y[b] * h[b] for b in dfs_descendants(hier, a)))
        else:
            total -= np.log(1 - m[a])
    return total


def random_forest_pairs(rng, n):
    """Edges of a random forest over shuffled names (canonical order != depth order)."""
    names = [f"x{k:03d}" for k in rng.permutation(n)]
    pairs, roots = [], []
    for i in range(n):
        if i == 0 or rng.random() < 0.1:
            roots.append(names[i])
        else:
            pairs.append((names[i], names[int(rng.integers(0, i))]))
    linked = {lab for pr in pairs for lab in pr}
    return pairs, [r for r in roots if r not in linked]


def random_hierarchy(rng, n):
    return build_from_edges(*random_forest_pairs(rng, n))


@st.composite
def hierarchies(draw, max_labels=50):
    n = draw(st.integers(1, max_labels))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_hierarchy(np.random.default_rng(seed), n)


# -- small fixed trees ----------------------------------------------------------

@pytest.fixture
def chain():
    """1 -> 11 -> 112"""
    return build_from_prefix_codes(["112"])


@pytest.fixture
def tree():
    """a -> {b, c}"""
    return build_from_edges([("b", "a"), ("c", "a")])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
