import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from syndcorr.code_model import DetectorCoord, ErrorSignature, canonical_key
from syndcorr.correlation_inference import (InferenceError, ModelSupport, analytic_moment, analytic_moments,
                                            covariance, covariance_panel, cycle_average, default_support,
                                            estimate_moments, infer_pairwise_spitz, infer_probabilities,
                                            moments_from_values)
from syndcorr.noise_sim import SignatureChannel, sample_signature_channels

NODES = tuple(DetectorCoord("V1", 2 * i) for i in range(6))


def all_subsets(nodes):
    return [c for r in range(1, len(nodes) + 1) for c in itertools.combinations(nodes, r)]


@st.composite
def channel_sets(draw, n_nodes=5):
    nodes = NODES[:n_nodes]
    subs = all_subsets(nodes)
    picks = draw(st.lists(st.sampled_from(range(len(subs))), min_size=1, max_size=10, unique=True))
    ps = [draw(st.floats(1e-4, 0.3)) for _ in picks]
    return nodes, [SignatureChannel(ErrorSignature(subs[i]), p) for i, p in zip(picks, ps)]


@settings(max_examples=60, deadline=None)
@given(channel_sets())
def test_exact_recovery_with_full_support(case):
    nodes, chans = case
    subs = all_subsets(nodes)
    model = infer_probabilities(analytic_moments(chans, subs, nodes), ModelSupport(subs))
    truth = {c.signature.detectors: c.probability for c in chans}
    for key in subs:
        assert model.p(key) == pytest.approx(truth.get(key, 0.0), abs=1e-10)
        assert model.stderr(key) is None


@settings(max_examples=60, deadline=None)
@given(channel_sets(n_nodes=4).filter(lambda c: all(ch.signature.weight <= 2 for ch in c[1])))
def test_pairwise_formula_agrees_when_nothing_heavier(case):
    nodes, chans = case
    pairs = [s for s in all_subsets(nodes) if len(s) <= 2]
    mom = analytic_moments(chans, all_subsets(nodes), nodes)
    a = infer_probabilities(mom, ModelSupport(pairs))
    b = infer_pairwise_spitz(mom, ModelSupport(pairs))
    for k in pairs:
        assert a.p(k) == pytest.approx(b.p(k), abs=1e-12)


def test_pairwise_rejects_heavy_support():
    mom = analytic_moments([], all_subsets(NODES[:3]), NODES[:3])
    with pytest.raises(ValueError):
        infer_pairwise_spitz(mom, ModelSupport([NODES[:3]]))


def test_analytic_moment_definition():
    ch = [SignatureChannel(ErrorSignature(NODES[:2]), 0.1), SignatureChannel(ErrorSignature(NODES[1:3]), 0.2)]
    assert analytic_moment(ch, NODES[:1]) == pytest.approx(0.8)
    assert analytic_moment(ch, NODES[:2]) == pytest.approx(0.6)  # even overlap with the first channel
    assert analytic_moment(ch, NODES[:3]) == 1.0  # both overlaps even
    assert analytic_moment(ch, NODES[1:2]) == pytest.approx(0.8 * 0.6)


def test_moments_from_values_requires_all_subsets():
    a, b = NODES[:2]
    with pytest.raises(InferenceError):
        moments_from_values({(a, b): 0.9, (a,): 0.95})
    m = moments_from_values({(a, b): 0.9, (a,): 0.95, (b,): 0.96})
    assert m.value((b,)) == 0.96 and m.value(()) == 1.0


def test_empirical_moments_match_numpy():
    chans = [SignatureChannel(ErrorSignature(NODES[i:i + 2]), 0.05 + 0.01 * i) for i in range(5)]
    ds = sample_signature_channels(chans, NODES, 5000, 3)
    mom = estimate_moments(ds, [NODES[:3], NODES[2:5]])
    bits = ds.shots.astype(int)
    for sub in [NODES[:1], NODES[:3], NODES[2:5], NODES[1:2] + NODES[3:4]]:
        cols = [NODES.index(d) for d in sub]
        direct = np.mean(1 - 2 * (bits[:, cols].sum(axis=1) % 2))
        assert mom.value(sub) == pytest.approx(direct, abs=1e-12)
    i, j = NODES[0], NODES[1]
    assert covariance(ds, i, j) == pytest.approx(np.cov(bits[:, 0], bits[:, 1], bias=True)[0, 1], abs=1e-12)


def test_bootstrap_errors_are_calibrated():
    chans = [SignatureChannel(ErrorSignature(NODES[:1]), 0.05), SignatureChannel(ErrorSignature(NODES[:2]), 0.03),
             SignatureChannel(ErrorSignature(NODES[:3]), 0.02)]
    sup = ModelSupport(all_subsets(NODES[:3]))
    zs = []
    for seed in range(8):
        ds = sample_signature_channels(chans, NODES[:3], 20000, seed)
        m = infer_probabilities(estimate_moments(ds, sup), sup, n_boot=50, seed=seed)
        for c in chans:
            e = m.entries[c.signature.detectors]
            zs.append((e.p - c.probability) / e.stderr)
    zs = np.abs(zs)
    assert zs.max() < 5 and np.mean(zs < 2) > 0.8


def test_bootstrap_is_seeded():
    chans = [SignatureChannel(ErrorSignature(NODES[:2]), 0.05)]
    ds = sample_signature_channels(chans, NODES[:2], 3000, 0)
    sup = ModelSupport(all_subsets(NODES[:2]))
    a = infer_probabilities(estimate_moments(ds, sup), sup, n_boot=20, seed=4)
    b = infer_probabilities(estimate_moments(ds, sup), sup, n_boot=20, seed=4)
    assert [e.stderr for e in a.entries.values()] == [e.stderr for e in b.entries.values()]


def test_nonpositive_moment_is_flagged():
    a, b = NODES[:2]
    m = moments_from_values({(a, b): -0.2, (a,): 0.5, (b,): 0.5})
    model = infer_probabilities(m, ModelSupport([(a, b), (a,), (b,)]))
    assert "nonpositive_moment" in model.entries[(a, b)].flags


def test_support_is_ordered_and_hashable(sched4):
    sup = default_support(sched4)
    w = [len(k) for k in sup]
    assert w == sorted(w, reverse=True)
    assert sup.digest() == default_support(sched4).digest()
    assert len(default_support(sched4, c_class=False)) < len(sup)


def test_cycle_average(model4, sched4):
    avg = cycle_average(model4, sched4)
    assert avg.metadata["cycle_averaged"]
    assert all(k == canonical_key(k) for k in avg.keys())
    # a bulk signature averages its bulk copies
    key = next(k for k in model4.keys() if sched4.is_bulk(k) and len(k) == 2)
    copies = [e.p for k, e in model4.items() if canonical_key(k) == canonical_key(key) and sched4.is_bulk(k)]
    assert avg.p(canonical_key(key)) == pytest.approx(np.mean(copies))


def test_covariance_panel_shape(data4, sched4):
    names, M = covariance_panel(data4, 0, sched4)
    assert len(names) == 8 and M.shape == (8, 8)
    assert np.all(np.isfinite(np.diag(M)))
