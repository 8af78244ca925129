import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from syndcorr.blossom import MatchingError, matching_weight, max_weight_matching, min_weight_perfect_matching


def brute_min_perfect(n, weights):
    best = math.inf

    def rec(left, acc):
        nonlocal best
        if acc >= best:
            return
        if not left:
            best = acc
            return
        a = left[0]
        for b in left[1:]:
            w = weights.get((a, b), weights.get((b, a), math.inf))
            if math.isfinite(w):
                rec([v for v in left if v not in (a, b)], acc + w)

    rec(list(range(n)), 0)
    return best


def brute_max_weight(n, edges):
    best = 0
    for r in range(n // 2 + 1):
        for sub in itertools.combinations(edges, r):
            used = [v for e in sub for v in e[:2]]
            if len(used) == len(set(used)):
                best = max(best, sum(e[2] for e in sub))
    return best


@st.composite
def complete_graphs(draw, max_half=4):
    n = 2 * draw(st.integers(1, max_half))
    w = {(i, j): draw(st.integers(0, 40)) for i in range(n) for j in range(i + 1, n)}
    return n, w


@settings(max_examples=150, deadline=None)
@given(complete_graphs())
def test_perfect_matching_is_minimal(g):
    n, w = g
    pairs = min_weight_perfect_matching(n, w)
    assert sorted(v for p in pairs for v in p) == list(range(n))
    assert matching_weight(pairs, w) == brute_min_perfect(n, w)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 7).flatmap(lambda n: st.tuples(
    st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1), st.integers(1, 30)), max_size=12))))
def test_max_weight_matching_general_graphs(case):
    n, raw = case
    seen, edges = set(), []
    for i, j, w in raw:
        if i != j and (min(i, j), max(i, j)) not in seen:
            seen.add((min(i, j), max(i, j)))
            edges.append((i, j, w))
    mate = max_weight_matching(edges)
    for v, m in enumerate(mate):
        if m >= 0:
            assert mate[m] == v
    got = sum(w for i, j, w in edges if i < len(mate) and mate[i] == j)
    assert got == brute_max_weight(n, edges)


def test_float_weights_and_missing_edges():
    w = {(0, 1): 0.5, (2, 3): 0.25, (0, 2): 0.1, (1, 3): 0.1, (0, 3): math.inf}
    pairs = min_weight_perfect_matching(4, w)
    assert math.isclose(matching_weight(pairs, w), 0.2)


def test_no_perfect_matching():
    with pytest.raises(MatchingError):
        min_weight_perfect_matching(4, {(0, 1): 1.0, (0, 2): 1.0, (0, 3): 1.0})
    with pytest.raises(MatchingError):
        min_weight_perfect_matching(3, {(0, 1): 1.0})
