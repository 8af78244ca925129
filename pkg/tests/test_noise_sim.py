import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from syndcorr.code_model import DetectorCoord, ErrorSignature, PauliFault, build_schedule, propagate_fault
from syndcorr.noise_sim import (NoiseParams, SignatureChannel, SyndromeDataset, first_order_detector_means,
                                independent_pauli_probability, inject_drift, location_rates, pack_rows,
                                random_channels, sample_signature_channels, simulate_circuit, unpack_rows)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 5), st.integers(1, 200), st.integers(0, 2**32 - 1))
def test_pack_roundtrip(r, n, seed):
    bits = np.random.default_rng(seed).integers(0, 2, size=(r, n)).astype(np.uint8)
    packed = pack_rows(bits)
    assert packed.shape == (r, (n + 63) // 64)
    assert np.array_equal(unpack_rows(packed, n), bits)


def test_dataset_validation():
    with pytest.raises(ValueError):
        SyndromeDataset.from_bits([DetectorCoord("Z1", 2)], np.zeros((3, 2), np.uint8))
    ds = SyndromeDataset.from_bits([DetectorCoord("Z1", 2), DetectorCoord("X1", 3)], [[1, 0], [0, 1], [1, 1]])
    assert ds.n_shots == 3 and ds.slice_shots(1, 3).shots.tolist() == [[0, 1], [1, 1]]


def test_noiseless_circuit_is_silent(sched4):
    ds = simulate_circuit(sched4, NoiseParams.zero(), 500, 0)
    assert not ds.shots.any() and not ds.truth.any()


def test_injected_fault_gives_its_signature(sched4):
    rng = np.random.default_rng(0)
    locs = rng.choice(len(sched4.locations), 25, replace=False)
    idx = sched4.detector_index
    for loc in locs:
        loc = int(loc)
        pauli = "XZ" if sched4.locations[loc].kind == "2q" else ("X" if sched4.locations[loc].kind == "ro" else "Y")
        f = PauliFault(loc, pauli)
        sig = propagate_fault(sched4, f)
        ds = simulate_circuit(sched4, NoiseParams.zero(), 70, 0, injected=[(65, f)])
        row = np.zeros(sched4.n_detectors, np.uint8)
        for d in sig.detectors:
            row[idx[d]] = 1
        assert np.array_equal(ds.shots[65], row)
        assert tuple(ds.truth[65]) == (sig.logical_flip_x, sig.logical_flip_z)
        assert ds.shots[:65].sum() == 0


def test_simulation_is_deterministic_and_thread_independent(sched4):
    a = simulate_circuit(sched4, NoiseParams(), 40000, 5, threads=1)
    b = simulate_circuit(sched4, NoiseParams(), 40000, 5, threads=3)
    c = simulate_circuit(sched4, NoiseParams(), 40000, 6)
    assert a.digest() == b.digest()
    assert a.digest() != c.digest()


def test_detector_means_follow_first_order_rates(sched4):
    ds = simulate_circuit(sched4, NoiseParams(), 100000, 2)
    mean = ds.shots.mean(axis=0)
    first = first_order_detector_means(sched4, NoiseParams())
    # first order overshoots by O(p^2); allow that plus 5 sigma of sampling noise
    sig = np.sqrt(mean * (1 - mean) / ds.n_shots)
    assert np.all(np.abs(mean - first) < 5 * sig + 2 * first ** 2 + 1e-3)


def test_depolarizing_decomposition():
    for kind in ("1q", "2q"):
        p = 0.01
        q = independent_pauli_probability(p, kind)
        n = 3 if kind == "1q" else 15
        # n independent Pauli channels at rate q leave the identity with this probability
        ident = (1 + n * (1 - 2 * q) ** ((n + 1) / 2)) / (n + 1)
        assert 1 - ident == pytest.approx(p, rel=1e-9)
    assert independent_pauli_probability(0.02, "ro") == 0.02


def test_heterogeneous_rates_are_seeded(sched4):
    a = location_rates(sched4, NoiseParams(mode="heterogeneous", spread=1.0, seed=1))
    b = location_rates(sched4, NoiseParams(mode="heterogeneous", spread=1.0, seed=1))
    c = location_rates(sched4, NoiseParams(mode="heterogeneous", spread=1.0, seed=2))
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    assert np.all((a >= 0) & (a < 1))


def test_noise_param_validation():
    with pytest.raises(ValueError):
        NoiseParams(mode="weird")
    with pytest.raises(ValueError):
        NoiseParams(p_2q=1.5)
    with pytest.raises(ValueError):
        NoiseParams(t_coherence=0)


def test_channel_sampler_marginals():
    nodes = tuple(DetectorCoord("V1", 2 * i) for i in range(3))
    chans = [SignatureChannel(ErrorSignature(nodes[:2]), 0.1), SignatureChannel(ErrorSignature(nodes[2:]), 0.3)]
    ds = sample_signature_channels(chans, nodes, 200000, 4)
    m = ds.shots.mean(axis=0)
    assert m == pytest.approx([0.1, 0.1, 0.3], abs=0.005)
    assert np.array_equal(ds.shots[:, 0], ds.shots[:, 1])
    assert ds.digest() == sample_signature_channels(chans, nodes, 200000, 4).digest()


def test_drift_switches_rates():
    nodes = (DetectorCoord("V1", 0),)
    a = [SignatureChannel(ErrorSignature(nodes), 0.0)]
    b = [SignatureChannel(ErrorSignature(nodes), 0.2)]
    ds = inject_drift(a, b, nodes, 100000, 0)
    assert ds.shots[:50000].sum() == 0
    assert ds.shots[50000:].mean() == pytest.approx(0.2, abs=0.01)
    with pytest.raises(ValueError):
        inject_drift(a, b, nodes, 10, 0, regime_split=1.0)


def test_random_channels():
    chans, nodes = random_channels(83, max_weight=12, seed=3)
    assert len(chans) == 83 and len({c.signature.detectors for c in chans}) == 83
    assert max(c.signature.weight for c in chans) <= 12
    assert all(0.001 <= c.probability <= 0.2 for c in chans)
    assert set(d for c in chans for d in c.signature.detectors) <= set(nodes)


def test_schedule_validation(layout):
    with pytest.raises(ValueError):
        build_schedule(layout, 0)
    with pytest.raises(ValueError):
        build_schedule(layout, 2, "Y")
