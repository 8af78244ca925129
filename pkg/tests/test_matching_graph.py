import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from syndcorr.matching_graph import (build_aux_graph, build_syndrome_graph, build_tables, combine,
                                     compute_weights, path_parities, path_sum_bruteforce, to_dot, to_json,
                                     weights_from_adjacency)
from syndcorr.noise_sim import NoiseParams, detector_error_model


def random_adjacency(rng, n_real, p_max=0.2, max_deg=4):
    """Symmetric detector block plus two boundary columns; row sums stay below 1."""
    m = n_real + 2
    A = np.zeros((m, m))
    for i in range(n_real):
        for j in range(i + 1, m):
            if j < n_real and (np.count_nonzero(A[i, :n_real]) >= max_deg or np.count_nonzero(A[j, :n_real]) >= max_deg):
                continue
            if rng.random() < 0.35:
                p = rng.uniform(1e-4, p_max)
                A[i, j] = p
                if j < n_real:
                    A[j, i] = p
    return A


def walk_sums(A, max_len):
    """Sum of products of edge probabilities over every walk of 1..max_len steps (explicit enumeration)."""
    m = A.shape[0]
    nbrs = [[j for j in range(m) if A[i, j] > 0] for i in range(m)]
    S = np.zeros_like(A)

    def dfs(src, v, prod, depth):
        if depth == max_len:
            return
        for u in nbrs[v]:
            q = prod * A[v, u]
            S[src, u] += q
            dfs(src, u, q, depth + 1)

    for s in range(m):
        dfs(s, s, 1.0, 0)
    return S


def test_walk_enumeration_matches_inverse(rng):
    for _ in range(5):
        A = random_adjacency(rng, 5, max_deg=3)
        w = weights_from_adjacency(A, 5)
        S = walk_sums(A, 9)
        r = np.abs(A).sum(axis=1).max()
        tail = r ** 10 / (1 - r)
        got = np.where(np.isfinite(w[:5]), np.exp(-w[:5]), 0.0)
        assert np.all(got >= S[:5] - 1e-12)
        assert np.all(got <= S[:5] + tail + 1e-12)


@pytest.mark.parametrize("n_real", [2, 5, 8, 10])
def test_weights_match_path_sum(rng, n_real):
    for _ in range(20):
        A = random_adjacency(rng, n_real)
        w = weights_from_adjacency(A, n_real)
        part, tail = path_sum_bruteforce(A, 9)
        got = np.where(np.isfinite(w[:n_real]), np.exp(-w[:n_real]), 0.0)
        lo = part[:n_real] - 1e-9
        hi = part[:n_real] + tail[:n_real] + 1e-9
        assert np.all((got >= lo) & (got <= hi))
        # the bracket closes when the series is carried on to convergence
        full, tail2 = path_sum_bruteforce(A, 400)
        assert tail2.max() < 1e-12
        np.testing.assert_allclose(got, full[:n_real], rtol=0, atol=1e-9)


def test_divergent_path_sum_is_rejected():
    A = np.zeros((4, 4))
    A[0, 1] = A[1, 0] = 0.7
    A[0, 0] = 0.6
    with pytest.raises(np.linalg.LinAlgError):
        weights_from_adjacency(A, 2)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 0.5), st.floats(0, 0.5))
def test_combine_is_xor_probability(p, q):
    r = combine(p, q)
    assert 0 <= r <= 0.5 + 1e-15
    assert math.isclose(1 - 2 * r, (1 - 2 * p) * (1 - 2 * q), abs_tol=1e-12)


@pytest.fixture(scope="module")
def dem_graphs(sched4):
    dem = detector_error_model(sched4, NoiseParams())
    return {k: build_aux_graph(dem.probabilities, k, sched4) for k in ("X", "Z")}


def test_aux_graph_shapes(dem_graphs, sched4):
    for kind, g in dem_graphs.items():
        assert all(d.ancilla[0] == kind for d in g.nodes)
        assert all(0 < p < 0.5 for p in g.edges.values())
        assert set(g.parity) == set(g.edges)
        assert all(j >= g.n_nodes or i < j for i, j in g.edges)
        A = g.adjacency()
        assert np.allclose(A[:g.n_nodes, :g.n_nodes], A[:g.n_nodes, :g.n_nodes].T)
        assert not A[g.n_nodes:].any()
    # some edges of each graph flip the logical that graph predicts
    assert all(any(g.parity.values()) for g in dem_graphs.values())


def test_dm_max_validation(sched4):
    with pytest.raises(ValueError):
        build_aux_graph({}, "Z", sched4, dm_max=0)
    with pytest.raises(ValueError):
        build_aux_graph({}, "Z", sched4, dm_max=sched4.cycles + 2)
    with pytest.raises(ValueError):
        build_aux_graph({}, "Y", sched4)


def test_tables_consistency(dem_graphs):
    g = dem_graphs["Z"]
    w = compute_weights(g)
    t = build_tables(g, w)
    n = g.n_nodes
    assert np.allclose(t.W, t.W.T)
    assert np.all(np.diag(t.W) == np.inf)
    assert np.all(t.Wb <= w.w[:n, n:].min(axis=1) + 1e-15)
    # path weights never beat the single most likely path they include
    dist = path_parities(g)
    best = np.minimum(dist[:, :n, 0], dist[:, :n, 1])
    off = ~np.eye(n, dtype=bool)
    assert np.all(t.W[off] <= best[off] + 1e-9)


def test_syndrome_graph_layout(dem_graphs):
    g = dem_graphs["Z"]
    sg = build_syndrome_graph(g, compute_weights(g), [0, 3, 5])
    k = 3
    assert sg.n_vertices == 6
    assert all(sg.weights[(k + a, k + b)] == 0.0 for a in range(k) for b in range(a + 1, k))
    assert all((a, k + a) in sg.weights for a in range(k))


def test_exports(dem_graphs):
    g = dem_graphs["X"]
    dot = to_dot(g)
    assert dot.startswith("graph aux_X {") and dot.count(" -- ") == len(g.edges)
    import json
    doc = json.loads(to_json(g, compute_weights(g)))
    assert len(doc["nodes"]) == g.size and len(doc["edges"]) == len(g.edges)
    assert len(doc["weights"]) == g.size
