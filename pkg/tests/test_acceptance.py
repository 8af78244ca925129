"""Acceptance checks; each prints one PASS/FAIL line (run with ``-s`` to see them)."""

import math
import time

import numpy as np
import pytest

from syndcorr import diagnostics as dg
from syndcorr.blossom import matching_weight, min_weight_perfect_matching
from syndcorr.code_model import DetectorCoord, build_layout, build_schedule, enumerate_fault_catalog
from syndcorr.correlation_inference import (ModelSupport, cycle_average, default_support, estimate_moments,
                                            infer_probabilities)
from syndcorr.decoder import (CorrelatedConfig, MatchingDecoder, decode_dataset, fidelity_from_flips,
                              relative_improvement, uniform_graph)
from syndcorr.matching_graph import path_sum_bruteforce, weights_from_adjacency
from syndcorr.noise_sim import (NoiseParams, detector_error_model, random_channels, sample_signature_channels,
                                simulate_circuit)

pytestmark = pytest.mark.acceptance


def report(n, ok, msg):
    print(f"{'PASS' if ok else 'FAIL'} criterion {n}: {msg}")
    assert ok, msg


V = [DetectorCoord("V1", t) for t in (0, 2, 4)]


def test_c1_exact_recovery_full_support():
    t0 = time.perf_counter()
    _, full, _ = dg.bias_demo()
    dt = time.perf_counter() - t0
    truth = {(V[0],): 0.03, (V[0], V[1]): 0.025, tuple(V): 0.01}
    assert len(full) == 7
    err = max(abs(e.p - truth.get(k, 0.0)) for k, e in full.items())
    report(1, err < 1e-12 and dt < 1.0, f"max |p - truth| = {err:.2e} over 7 signatures in {dt:.3f}s")


def _spitz():
    t0 = time.perf_counter()
    pairs, _, spitz = dg.bias_demo()
    return [spitz.p(k) for k in pairs], time.perf_counter() - t0


def test_c2_pairwise_bias_singles_and_p12():
    got, dt = _spitz()
    # p1 = 0.01/0.49, p2 = p3 = -p1/2, p12 = 0.0345
    want = [1 / 49, -0.5 / 49, -0.5 / 49, 0.0345]
    err = max(abs(a - b) for a, b in zip(got[:4], want))
    report(2, err < 1e-9 and dt < 1.0, f"p1,p2,p3,p12 = {[round(g, 6) for g in got[:4]]}, max err {err:.1e}")


@pytest.mark.xfail(strict=True, reason="the pairwise formula gives p13 = p23 = p123 = 0.01 exactly; "
                                        "0.010204 is not attainable from these moments")
def test_c2_pairwise_bias_p13_p23():
    got, _ = _spitz()
    err = max(abs(g - 0.010204) for g in got[4:])
    print(f"FAIL criterion 2 (p13, p23): got {got[4]:.6f}, {got[5]:.6f}; listed 0.010204 (expected failure)")
    assert err < 1e-6


def test_c3_random_channel_validation():
    t0 = time.perf_counter()
    chans, nodes = random_channels(83, max_weight=12, seed=0)
    ds = sample_signature_channels(chans, nodes, 100000, 0)
    sup = ModelSupport([c.signature.detectors for c in chans])
    model = infer_probabilities(estimate_moments(ds, sup), sup, n_boot=100, seed=0)
    z = np.array([(model.p(c.signature.detectors) - c.probability) / model.stderr(c.signature.detectors)
                  for c in chans])
    dt = time.perf_counter() - t0
    az = np.abs(z)
    ok = len(chans) >= 80 and max(c.signature.weight for c in chans) == 12 and az.max() < 5 and np.mean(az < 2) >= 0.95
    report(3, bool(ok), f"{len(chans)} channels, max |z| = {az.max():.2f}, {100 * np.mean(az < 2):.1f}% within 2 "
                        f"stderr, {dt:.1f}s")


def _brute_syndrome(W, Wb):
    """Exhaustive minimum: each defect pairs with another defect or goes to the boundary."""
    k = len(Wb)
    best = math.inf

    def rec(left, acc):
        nonlocal best
        if not left:
            best = min(best, acc)
            return
        a, rest = left[0], left[1:]
        rec(rest, acc + Wb[a])
        for b in rest:
            rec([v for v in rest if v != b], acc + W[a][b])

    rec(list(range(k)), 0)
    return best


def test_c4_matching_optimality():
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(1000):
        k = int(rng.integers(1, 9))
        W = rng.integers(1, 60, size=(k, k))
        W = np.triu(W, 1) + np.triu(W, 1).T
        Wb = rng.integers(1, 60, size=k)
        # syndrome graph: defects 0..k-1, boundary copies k..2k-1 joined to each other at zero cost
        w = {}
        for i in range(k):
            for j in range(i + 1, k):
                w[(i, j)] = int(W[i, j])
                w[(k + i, k + j)] = 0
            w[(i, k + i)] = int(Wb[i])
        got = matching_weight(min_weight_perfect_matching(2 * k, w), w)
        bad += got != _brute_syndrome(W.tolist(), Wb.tolist())
    dt = time.perf_counter() - t0
    report(4, bad == 0 and dt < 60, f"1000 graphs with <= 8 defects, {bad} mismatches, {dt:.1f}s")


def test_c5_weight_matrix_oracle():
    rng = np.random.default_rng(5)
    worst_bracket, worst_conv = 0.0, 0.0
    for _ in range(200):
        n_real = int(rng.integers(2, 11))
        m = n_real + 2
        A = np.zeros((m, m))
        for i in range(n_real):
            for j in range(i + 1, m):
                if rng.random() < 0.3 and (j >= n_real or max(np.count_nonzero(A[i, :n_real]),
                                                              np.count_nonzero(A[j, :n_real])) < 4):
                    A[i, j] = rng.uniform(1e-4, 0.2)
                    if j < n_real:
                        A[j, i] = A[i, j]
        w = weights_from_adjacency(A, n_real)
        got = np.where(np.isfinite(w[:n_real]), np.exp(-w[:n_real]), 0.0)
        part, tail = path_sum_bruteforce(A, 9)
        worst_bracket = max(worst_bracket, float(np.max(part[:n_real] - got)),
                            float(np.max(got - part[:n_real] - tail[:n_real])))
        full, tail2 = path_sum_bruteforce(A, 400)
        assert tail2.max() < 1e-12
        worst_conv = max(worst_conv, float(np.abs(got - full[:n_real]).max()))
    ok = worst_bracket <= 1e-9 and worst_conv <= 1e-9
    report(5, ok, f"200 graphs <= 12 nodes: bracket violation {worst_bracket:.1e}, "
                  f"converged series error {worst_conv:.1e}")


# ---------------------------------------------------------------------------
# End-to-end on simulated device-rate data


@pytest.fixture(scope="module")
def e2e():
    sch = build_schedule(build_layout(3), 16, "Z")
    noise = NoiseParams(p_1q=0.0009, p_2q=0.015, p_ro=0.0116, t_coherence=35.0)
    ds = simulate_circuit(sch, noise, 200000, 1, threads=4)
    sup = default_support(sch)
    model = infer_probabilities(estimate_moments(ds, sup), sup, n_boot=100, seed=0)
    dem = detector_error_model(sch, noise)
    return sch, noise, ds, model, dem


@pytest.mark.slow
def test_c6a_xy_symmetry(e2e):
    sch, _, _, model, _ = e2e
    cat = enumerate_fault_catalog(sch)
    pts = dg.xy_symmetry(cycle_average(model, sch), cat)
    z = [abs(q.z()) for q in pts]
    report("6a", len(pts) > 0 and max(z) < 3, f"{len(pts)} X/Y pairs, max |z| = {max(z):.2f}")


@pytest.mark.slow
def test_c6b_p_vs_nu(e2e):
    sch, _, _, model, _ = e2e
    sc = dg.p_vs_nu(cycle_average(model, sch), enumerate_fault_catalog(sch))
    report("6b", sc.spearman > 0.5, f"Spearman(p, nu) = {sc.spearman:.3f} over {len(sc.points)} signatures")


@pytest.mark.slow
def test_c6c_consistent_with_injected_rates(e2e):
    _, _, _, model, dem = e2e
    z = []
    for k, e in model.items():
        assert e.stderr and math.isfinite(e.p), k
        z.append((e.p - dem.probabilities.get(k, 0.0)) / e.stderr)
    z = np.abs(z)
    report("6c", z.max() < 5, f"{len(z)} signatures, max |z| = {z.max():.2f}, {100 * np.mean(z < 2):.1f}% within 2")


@pytest.mark.slow
def test_c7_decoder_sanity(e2e):
    sch16, noise, ds16, model, _ = e2e
    avg = cycle_average(model, sch16)
    lay = sch16.layout
    F, uni = {}, {}
    for n in (1, 2, 4, 8, 16):
        sch = build_schedule(lay, n, "Z")
        ds = ds16 if n == 16 else simulate_circuit(sch, noise, 100000, 10 + n, threads=4)
        dec = MatchingDecoder.from_model(avg, sch)
        F[n] = fidelity_from_flips(decode_dataset(dec, ds, threads=4), ds.truth, 1)
        udec = MatchingDecoder({k: uniform_graph(g) for k, g in dec.graphs.items()}, sch.detector_list)
        uni[n] = fidelity_from_flips(decode_dataset(udec, ds, threads=4), ds.truth, 1)
    ns = sorted(F)
    mono = all(F[b].F <= F[a].F + 2 * math.hypot(F[a].stderr, F[b].stderr) for a, b in zip(ns, ns[1:]))
    beats = all(F[n].F >= uni[n].F - 2 * math.hypot(F[n].stderr, uni[n].stderr) for n in ns)
    report(7, mono and beats, "F(N) = " + ", ".join(f"{n}:{F[n].F:.4f}" for n in ns)
           + "; uniform " + ", ".join(f"{n}:{uni[n].F:.4f}" for n in ns))


@pytest.mark.slow
def test_c8_correlated_decoding():
    sch = build_schedule(build_layout(3), 4, "Z")
    noise = NoiseParams.depolarizing(0.003)
    dem = detector_error_model(sch, noise)
    dec = MatchingDecoder.from_model(dem.probabilities, sch)
    ds = simulate_circuit(sch, noise, 1000000, 5, threads=4)
    std = decode_dataset(dec, ds, threads=4)
    R = {}
    for g in (0.1, 0.3, 0.5, 0.8, 1.0):
        cfg = CorrelatedConfig.for_model(dem.probabilities, sch, dec, gamma=g)
        R[g] = relative_improvement(decode_dataset(dec, ds, threads=4, correlated=cfg), std, ds.truth, 1)
    stable = all(R[g][0] >= -2 * R[g][1] for g in (0.1, 0.3, 0.5, 0.8))
    breaks = R[1.0][0] < R[0.5][0]
    report(8, stable and breaks, ", ".join(f"R({g}) = {r:+.2e} +- {s:.1e}" for g, (r, s) in R.items()))


def test_c9_drift():
    r = dg.drift_demo(0.05, n_shots=1000000, seed=9)
    p12 = r.simulated[2]
    small = dg.drift_closed_form(0.005)[2] / 0.005 ** 2
    ok = abs(p12 - 0.003058) <= 0.0005 and abs(r.analytic[2] - 0.003058) < 5e-7 and abs(small - 1) < 0.1
    report(9, ok, f"p12 = {p12:.6f} +- {r.stderr[2]:.6f} simulated, {r.analytic[2]:.6f} closed form; "
                  f"p12/p^2 = {small:.4f} at p = 0.005")


def test_c10_determinism():
    sch = build_schedule(build_layout(3), 4, "Z")

    def pipeline():
        ds = simulate_circuit(sch, NoiseParams(), 30000, 3, threads=2)
        sup = default_support(sch)
        mom = estimate_moments(ds, sup)
        model = infer_probabilities(mom, sup, n_boot=10, seed=3)
        avg = cycle_average(model, sch)
        dec = MatchingDecoder.from_model(avg, sch)
        std = decode_dataset(dec, ds, threads=2, chunk=4096)
        cfg = CorrelatedConfig.for_model(avg, sch, dec, gamma=0.3)
        cor = decode_dataset(dec, ds, threads=2, chunk=4096, correlated=cfg)
        pvals = np.array([(e.p, e.stderr) for _, e in sorted(model.items())], dtype=float)
        return ds.digest(), pvals.tobytes(), std.tobytes(), cor.tobytes()

    a, b = pipeline(), pipeline()
    same = [x == y for x, y in zip(a, b)]
    report(10, all(same), "simulate / inference / decode / correlated decode identical across runs: "
                          + str(same))
