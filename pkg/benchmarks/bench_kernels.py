"""Compare the numba kernels with the pure numpy fallback.

Each backend runs in its own interpreter (the switch is read at import time),
timing the pipeline stages that sit on top of the hot kernels. Outputs from both
backends are hashed and compared.

    python3 benchmarks/bench_kernels.py [--shots 100000] [--cycles 4]
"""

import argparse
import hashlib
import json
import os
import subprocess
import sys
import time


def stage_timings(shots: int, cycles: int) -> dict:
    import numpy as np

    from syndcorr import kernels
    from syndcorr.code_model import build_layout, build_schedule
    from syndcorr.correlation_inference import cycle_average, default_support, estimate_moments, infer_probabilities
    from syndcorr.decoder import CorrelatedConfig, MatchingDecoder, decode_dataset
    from syndcorr.noise_sim import NoiseParams, simulate_circuit

    sch = build_schedule(build_layout(3), cycles, "Z")
    out, digests = {}, {}

    def timed(name, fn):
        t = time.perf_counter()
        r = fn()
        out[name] = time.perf_counter() - t
        return r

    # compile everything once on a tiny run so timings exclude JIT cost
    small = simulate_circuit(sch, NoiseParams(), 256, 99)
    sup = default_support(sch)
    m_small = estimate_moments(small, sup)
    model_small = cycle_average(infer_probabilities(m_small, sup, n_boot=2), sch)
    dec_small = MatchingDecoder.from_model(model_small, sch)
    decode_dataset(dec_small, small)
    decode_dataset(dec_small, small, correlated=CorrelatedConfig.for_model(model_small, sch, dec_small, 0.3))

    ds = timed("simulate (frame_propagate)", lambda: simulate_circuit(sch, NoiseParams(), shots, 1))
    digests["simulate"] = ds.digest()
    mom = timed("moments (subset_odd_counts)", lambda: estimate_moments(ds, sup))
    model = timed("inference (superset_pairs)", lambda: infer_probabilities(mom, sup, n_boot=10))
    avg = cycle_average(model, sch)
    dec = MatchingDecoder.from_model(avg, sch)
    pred = timed("decode (match_batch)", lambda: decode_dataset(dec, ds))
    digests["decode"] = hashlib.sha256(pred.tobytes()).hexdigest()
    cfg = CorrelatedConfig.for_model(avg, sch, dec, 0.3)
    n_corr = min(shots, 20000)
    sub = ds.slice_shots(0, n_corr)
    predc = timed(f"correlated decode, {n_corr} shots (redecode_batch)",
                  lambda: decode_dataset(dec, sub, correlated=cfg))
    digests["correlated"] = hashlib.sha256(predc.tobytes()).hexdigest()
    p = np.array([e.p for e in model.entries.values()])
    digests["inference"] = hashlib.sha256(np.round(np.nan_to_num(p), 10).tobytes()).hexdigest()
    return {"backend": kernels.BACKEND, "times": out, "digests": digests}


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--shots", type=int, default=100000)
    ap.add_argument("--cycles", type=int, default=4)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    a = ap.parse_args()
    if a.child:
        print(json.dumps(stage_timings(a.shots, a.cycles)))
        return
    res = {}
    for backend, flag in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, SYNDCORR_DISABLE_NUMBA=flag)
        cmd = [sys.executable, __file__, "--child", "--shots", str(a.shots), "--cycles", str(a.cycles)]
        proc = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
        res[backend] = json.loads(proc.stdout.strip().splitlines()[-1])
    print(f"d=3, N={a.cycles}, {a.shots} shots")
    print(f"{'stage':48s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s}")
    for stage, tn in res["numba"]["times"].items():
        tp = res["numpy"]["times"][stage]
        print(f"{stage:48s} {tn:10.3f} {tp:10.3f} {tp / tn:8.1f}x")
    for k, v in res["numba"]["digests"].items():
        same = "identical" if v == res["numpy"]["digests"][k] else "DIFFERENT"
        print(f"{k} output: {same}")


if __name__ == "__main__":
    main()
