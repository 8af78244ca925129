"""Command-line entry point: ``syndcorr <subcommand> [options]``.

Every subcommand writes its products under ``--out`` together with a
``manifest.json`` listing the resolved options, input and output digests, the
seed and package versions. Options may also come from a JSON ``--config``
file; flags given on the command line win.

Exit codes: 0 success, 1 malformed input, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__

log = logging.getLogger("syndcorr")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2


class NumericalFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Helpers


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _versions() -> Dict[str, str]:
    import numba
    import scipy
    return {"syndcorr": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__}


class Run:
    """Collects outputs of one subcommand and writes the manifest."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.inputs: List[str] = []
        self.outputs: List[str] = []
        self.summary: Dict = {}

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out / name

    def input(self, p: str) -> str:
        self.inputs.append(p)
        return p

    def finish(self) -> None:
        opts = {k: v for k, v in sorted(vars(self.args).items()) if k not in ("func", "config_data")}
        man = {"command": self.args.command, "options": opts, "seed": self.args.seed,
               "threads": self.args.threads, "versions": _versions(),
               "inputs": [{"path": p, "sha256": _sha256(Path(p))} for p in self.inputs],
               "outputs": [{"path": n, "sha256": _sha256(self.out / n)} for n in self.outputs],
               "summary": self.summary}
        with open(self.out / "manifest.json", "w") as fh:
            json.dump(man, fh, indent=1, sort_keys=True, default=str)
            fh.write("\n")


def _schedule(args):
    from .code_model import build_layout, build_schedule
    return build_schedule(build_layout(args.d), args.cycles, args.basis or "Z")


def _noise(args):
    from .noise_sim import NoiseParams
    if getattr(args, "depolarizing", None) is not None:
        return NoiseParams.depolarizing(args.depolarizing)
    return NoiseParams(mode=args.noise_mode, p_1q=args.p1q, p_2q=args.p2q, p_ro=args.pro,
                       t_coherence=args.t_coherence, spread=args.spread, seed=args.seed)


def _schedule_from_dataset(ds, args):
    """Schedule matching a dataset; cycles and basis come from provenance or the flags."""
    from .code_model import build_layout, build_schedule
    prov = ds.provenance or {}
    cycles = args.cycles if args.cycles is not None else prov.get("cycles")
    if cycles is None:
        cycles = _infer_cycles(ds)
    sch = build_schedule(build_layout(args.d), int(cycles), args.basis or prov.get("basis", "Z"))
    if tuple(sch.detector_list) != tuple(ds.detector_list):
        raise ValueError("dataset detectors do not match the schedule (check --d/--cycles/--basis)")
    return sch


def _infer_cycles(ds) -> int:
    ticks = {d.tick for d in ds.detector_list}
    from .code_model import CircuitSchedule
    return max(CircuitSchedule.detector_cycle(t) for t in ticks) - 1


def _write_csv(run: Run, name: str, header, rows) -> None:
    from .diagnostics import write_csv
    write_csv(run.path(name), header, rows)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_simulate(args) -> int:
    from .io import write_dataset
    from .noise_sim import simulate_circuit
    run = Run(args)
    sch = _schedule(args)
    ds = simulate_circuit(sch, _noise(args), args.shots, args.seed, threads=args.threads)
    write_dataset(run.path("dataset.qsyn"), ds)
    run.summary = {"shots": ds.n_shots, "detectors": ds.n_detectors, "digest": ds.digest()}
    run.finish()
    print(f"wrote {ds.n_shots} shots x {ds.n_detectors} detectors to {run.out / 'dataset.qsyn'}")
    return EXIT_OK


def cmd_sample(args) -> int:
    from .io import read_model, write_dataset
    from .noise_sim import sample_signature_channels
    run = Run(args)
    mf = read_model(run.input(args.model))
    chans = mf.channels()
    if mf.metadata.get("cycle_averaged"):
        raise ValueError("sampling needs a model with absolute detector ticks")
    if args.cycles is not None:
        dets = _schedule(args).detector_list
    else:
        from .code_model import detector_sort_key
        dets = sorted({d for c in chans for d in c.signature.detectors}, key=lambda d: (d.tick, detector_sort_key(d)))
    ds = sample_signature_channels(chans, dets, args.shots, args.seed)
    write_dataset(run.path("dataset.qsyn"), ds)
    run.summary = {"shots": ds.n_shots, "channels": len(chans), "digest": ds.digest()}
    run.finish()
    print(f"sampled {len(chans)} channels into {ds.n_shots} shots")
    return EXIT_OK


def cmd_correlate(args) -> int:
    from .correlation_inference import covariance_panel
    from .diagnostics import covariance_rows
    from .io import read_dataset
    run = Run(args)
    ds = read_dataset(run.input(args.data))
    sch = _schedule_from_dataset(ds, args)
    for dm in args.dm:
        names, M = covariance_panel(ds, dm, sch)
        name = "fig3a_cov.csv" if len(args.dm) == 1 else f"fig3a_cov_dm{dm}.csv"
        _write_csv(run, name, *covariance_rows(names, M))
    run.finish()
    print(f"covariance panels for dm={list(args.dm)} written")
    return EXIT_OK


def cmd_infer(args) -> int:
    from .code_model import enumerate_fault_catalog
    from .correlation_inference import cycle_average, default_support, estimate_moments, infer_probabilities
    from .io import ModelFileV1, read_dataset, write_model
    run = Run(args)
    ds = read_dataset(run.input(args.data))
    sch = _schedule_from_dataset(ds, args)
    sup = default_support(sch, c_class=not args.no_c_class)
    moments = estimate_moments(ds, sup)
    model = infer_probabilities(moments, sup, n_boot=args.boot, seed=args.seed)
    flagged = model.flagged()
    n_np = sum("nonpositive_moment" in f for f in flagged.values())
    write_model(run.path("model_absolute.json"), ModelFileV1.from_model(model, sch))
    avg = cycle_average(model, sch)
    write_model(run.path("model.json"), ModelFileV1.from_model(avg, sch, enumerate_fault_catalog(sch)))
    run.summary = {"signatures": len(model), "flagged": len(flagged), "nonpositive_moment": n_np}
    run.finish()
    print(f"inferred {len(model)} signatures ({len(avg)} cycle-averaged); {len(flagged)} flagged")
    if n_np and args.strict:
        raise NumericalFailure(f"{n_np} signatures hit a non-positive moment")
    return EXIT_OK


def cmd_graph(args) -> int:
    from .io import read_model
    from .matching_graph import build_aux_graph, compute_weights, to_dot, to_json
    run = Run(args)
    model = read_model(run.input(args.model)).to_model()
    sch = _schedule(args)
    for kind in args.kind:
        g = build_aux_graph(model, kind, sch, args.dm_max)
        w = compute_weights(g)
        with open(run.path(f"graph_{kind}.json"), "w") as fh:
            fh.write(to_json(g, w))
        with open(run.path(f"graph_{kind}.dot"), "w") as fh:
            fh.write(to_dot(g))
        print(f"{kind}: {g.n_nodes} nodes, {len(g.edges)} edges")
    run.finish()
    return EXIT_OK


def cmd_decode(args) -> int:
    from .decoder import (CorrelatedConfig, MatchingDecoder, decode_dataset, fidelity_from_flips,
                          logical_column, relative_improvement, uniform_graph)
    from .io import read_dataset, read_model
    run = Run(args)
    model = read_model(run.input(args.model)).to_model()
    rows = []
    for path in args.data:
        ds = read_dataset(run.input(path))
        sch = _schedule_from_dataset(ds, args)
        dec = MatchingDecoder.from_model(model, sch, args.dm_max)
        if args.uniform:
            dec = MatchingDecoder({k: uniform_graph(g) for k, g in dec.graphs.items()}, sch.detector_list)
        std = decode_dataset(dec, ds, threads=args.threads)
        pred = std
        if args.gamma is not None:
            cfg = CorrelatedConfig.for_model(model, sch, dec, args.gamma, args.first_kind)
            pred = decode_dataset(dec, ds, threads=args.threads, correlated=cfg)
        stem = Path(path).stem
        header = ["shot", "x_pred", "z_pred"] + (["x_true", "z_true"] if ds.truth is not None else [])
        body = (np.concatenate([np.arange(ds.n_shots)[:, None], pred, ds.truth], axis=1)
                if ds.truth is not None else np.concatenate([np.arange(ds.n_shots)[:, None], pred], axis=1))
        _write_csv(run, f"shots_{stem}.csv", header, body.tolist())
        if ds.truth is not None:
            col = logical_column(sch.prepared_basis)
            F = fidelity_from_flips(pred, ds.truth, col)
            R, Rse = relative_improvement(pred, std, ds.truth, col)
            rows.append((stem, sch.cycles, ds.n_shots, F.F, F.stderr, R, Rse))
            print(f"{stem}: N={sch.cycles} F={F.F:.6f} +- {F.stderr:.6f}")
    if rows:
        _write_csv(run, "summary.csv", ["dataset", "cycles", "shots", "F", "stderr", "rel_improvement",
                                        "rel_improvement_stderr"], rows)
    run.finish()
    return EXIT_OK


def cmd_diagnose(args) -> int:
    from .code_model import enumerate_fault_catalog
    from . import diagnostics as dg
    from .correlation_inference import covariance_panel, default_support
    from .io import read_dataset, read_model
    run = Run(args)
    ds = read_dataset(run.input(args.data))
    sch = _schedule_from_dataset(ds, args)
    cat = enumerate_fault_catalog(sch)
    names, M = covariance_panel(ds, 0, sch)
    _write_csv(run, dg.FIGURE_FILES["covariance"], *dg.covariance_rows(names, M))
    if args.model:
        model = read_model(run.input(args.model)).to_model()
        _write_csv(run, dg.FIGURE_FILES["classes"], *dg.class_rows(dg.class_totals(model, cat)))
        sc = dg.p_vs_nu(model, cat)
        _write_csv(run, dg.FIGURE_FILES["p_vs_nu"], *dg.nu_rows(sc))
        _write_csv(run, dg.FIGURE_FILES["xy"], *dg.xy_rows(dg.xy_symmetry(model, cat)))
        run.summary["spearman_nu"] = sc.spearman
    fit = dg.time_decay_fit(ds)
    _write_csv(run, dg.FIGURE_FILES["decay"], *dg.decay_rows(fit))
    run.summary["decay_base"] = fit.base if fit.fitted else None
    _write_csv(run, dg.FIGURE_FILES["mean_syndrome"], *dg.mean_syndrome_rows(dg.mean_syndrome_vs_cycle(ds)))
    if args.tprime:
        sups = {"with_C": default_support(sch, True), "without_C": default_support(sch, False)}
        rep = dg.tprime_analysis(ds, sups, sch, n_boot=args.boot, seed=args.seed)
        _write_csv(run, dg.FIGURE_FILES["tprime_cycles"], *dg.tprime_cycle_rows(rep))
        _write_csv(run, dg.FIGURE_FILES["tprime_ancillas"], *dg.tprime_ancilla_rows(rep))
    run.finish()
    print(f"diagnostics written to {run.out}")
    return EXIT_OK


def cmd_demo_bias(args) -> int:
    from .diagnostics import bias_demo
    run = Run(args)
    keys, full, spitz = bias_demo()
    label = lambda k: "p" + "".join(str(int(d.tick) // 2 + 1) for d in k)
    allkeys = sorted(full.keys(), key=lambda k: (len(k), k))
    print("full support:  " + "  ".join(f"{label(k)}={full.p(k):.6g}" for k in allkeys))
    print("pairwise only: " + "  ".join(f"{label(k)}={spitz.p(k):.6f}" for k in keys))
    rows = [(label(k), full.p(k), spitz.p(k) if k in spitz else float("nan")) for k in allkeys]
    _write_csv(run, "bias_demo.csv", ["signature", "p_full", "p_pairwise"], rows)
    run.finish()
    return EXIT_OK


def cmd_demo_drift(args) -> int:
    from .diagnostics import drift_demo, drift_rows
    run = Run(args)
    res = [drift_demo(p, args.eps, args.shots, args.seed) for p in args.p]
    for r in res:
        msg = f"p={r.p} eps={r.eps}: p12={r.analytic[2]:.6f} (closed form)"
        if r.simulated is not None:
            msg += f", {r.simulated[2]:.6f} +- {r.stderr[2]:.6f} (simulated)"
        print(msg)
    _write_csv(run, "appH.csv", *drift_rows(res))
    run.finish()
    return EXIT_OK


def cmd_validate(args) -> int:
    from .correlation_inference import ModelSupport, estimate_moments, infer_probabilities
    from .noise_sim import random_channels, sample_signature_channels
    run = Run(args)
    chans, nodes = random_channels(args.channels, max_weight=args.max_weight, seed=args.seed)
    ds = sample_signature_channels(chans, nodes, args.shots, args.seed)
    sup = ModelSupport([c.signature.detectors for c in chans])
    model = infer_probabilities(estimate_moments(ds, sup), sup, n_boot=args.boot, seed=args.seed)
    rows = []
    z = []
    for c in chans:
        e = model.entries[c.signature.detectors]
        zz = (e.p - c.probability) / e.stderr if e.stderr else float("nan")
        z.append(zz)
        rows.append((c.signature.weight, c.probability, e.p, e.stderr, zz))
    _write_csv(run, "validation.csv", ["weight", "true_p", "inferred_p", "stderr", "z"], rows)
    z = np.abs(np.array(z))
    run.summary = {"max_abs_z": float(np.nanmax(z)), "within_2": float(np.mean(z < 2)),
                   "within_5": float(np.mean(z < 5))}
    run.finish()
    print(f"{len(chans)} channels: max |z| = {run.summary['max_abs_z']:.2f}, "
          f"{100 * run.summary['within_2']:.1f}% within 2 stderr")
    if not np.isfinite(z).all():
        raise NumericalFailure("some probabilities could not be inferred")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def _common(p: argparse.ArgumentParser, code: bool = True) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--config", default=None, help="JSON file with option defaults")
    if code:
        p.add_argument("--d", type=int, default=3)
        p.add_argument("--cycles", type=int, default=None)
        p.add_argument("--basis", choices=("X", "Z"), default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="syndcorr", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="circuit-level Monte Carlo of the memory experiment")
    _common(p)
    p.add_argument("--shots", type=int, default=10000)
    p.add_argument("--noise-mode", choices=("uniform", "heterogeneous"), default="uniform")
    p.add_argument("--p1q", type=float, default=0.0009)
    p.add_argument("--p2q", type=float, default=0.015)
    p.add_argument("--pro", type=float, default=0.0116)
    p.add_argument("--t-coherence", type=float, default=35.0)
    p.add_argument("--spread", type=float, default=0.0)
    p.add_argument("--depolarizing", type=float, default=None, help="uniform rate for every location")
    p.set_defaults(func=cmd_simulate, cycles=16)

    p = sub.add_parser("sample", help="sample independent signature channels from a model file")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--shots", type=int, default=10000)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("correlate", help="cycle-averaged covariance panels")
    _common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--dm", type=int, nargs="+", default=[0])
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("infer", help="infer signature probabilities from a dataset")
    _common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--no-c-class", action="store_true")
    p.add_argument("--boot", type=int, default=100)
    p.add_argument("--strict", action="store_true", help="exit 2 when any moment is non-positive")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("graph", help="build decoding graphs and weights from a model")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--kind", nargs="+", choices=("X", "Z"), default=["X", "Z"])
    p.add_argument("--dm-max", type=int, default=2)
    p.set_defaults(func=cmd_graph, cycles=16)

    p = sub.add_parser("decode", help="decode datasets and report fidelities")
    _common(p)
    p.add_argument("--data", required=True, nargs="+")
    p.add_argument("--model", required=True)
    p.add_argument("--dm-max", type=int, default=2)
    p.add_argument("--gamma", type=float, default=None, help="enable correlated decoding")
    p.add_argument("--first-kind", choices=("X", "Z"), default="X")
    p.add_argument("--uniform", action="store_true", help="ignore model rates, equal edge weights")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("diagnose", help="write the per-figure diagnostic CSV files")
    _common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--model", default=None, help="cycle-averaged model file")
    p.add_argument("--tprime", action="store_true", help="also run the T' analysis (slow)")
    p.add_argument("--boot", type=int, default=20)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("demo-bias", help="three-detector example of omitted-signature bias")
    _common(p, code=False)
    p.set_defaults(func=cmd_demo_bias)

    p = sub.add_parser("demo-drift", help="apparent correlations from drifting rates")
    _common(p, code=False)
    p.add_argument("--p", type=float, nargs="+", default=[0.05, 0.005])
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--shots", type=int, default=1000000)
    p.set_defaults(func=cmd_demo_drift)

    p = sub.add_parser("validate", help="recover random signature channels from sampled data")
    _common(p, code=False)
    p.add_argument("--channels", type=int, default=83)
    p.add_argument("--max-weight", type=int, default=12)
    p.add_argument("--shots", type=int, default=100000)
    p.add_argument("--boot", type=int, default=100)
    p.set_defaults(func=cmd_validate)
    return ap


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    ap = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = ap.parse_args(argv)
    if args.config:
        from .io import FormatError
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(exc.msg, exc.lineno, exc.colno, args.config) from None
        if not isinstance(cfg, dict):
            raise FormatError("config must be a JSON object", 1, 1, args.config)
        known = vars(args)
        unknown = sorted(k for k in cfg if k.replace("-", "_") not in known)
        if unknown:
            raise FormatError(f"unknown config keys: {', '.join(unknown)}", 1, 1, args.config)
        # defaults from the file, explicit flags still win
        sub = ap._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in cfg.items()})
        args = ap.parse_args(argv)
    return args


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    from .correlation_inference import InferenceError
    from .io import FormatError
    try:
        args = parse_args(argv)
        if args.threads < 1:
            raise ValueError("--threads must be >= 1")
        return int(args.func(args))
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalFailure, InferenceError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
