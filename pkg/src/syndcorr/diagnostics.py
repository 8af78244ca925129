"""Analysis products computed from inferred models and raw syndrome data.

Every product is plain data (lists, dicts, arrays); ``write_csv`` and
``FIGURE_FILES`` turn them into the per-figure CSV files the CLI emits.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .code_model import (CircuitSchedule, DetectorCoord, ErrorClass, ErrorSignature, FaultCatalog,
                         canonical_detectors, classify_signature, detector_sort_key)
from .correlation_inference import (InferredModel, ModelSupport, estimate_moments, infer_probabilities)
from .noise_sim import SignatureChannel, inject_drift

FIGURE_FILES = {
    "covariance": "fig3a_cov.csv",
    "classes": "fig3b_classes.csv",
    "p_vs_nu": "fig4a.csv",
    "xy": "fig4b.csv",
    "decay": "fig5a.csv",
    "tprime_cycles": "fig5b.csv",
    "tprime_ancillas": "fig5c.csv",
    "mean_syndrome": "appB.csv",
    "drift": "appH.csv",
}


def _entries(model) -> Dict[Tuple[DetectorCoord, ...], Tuple[float, Optional[float]]]:
    if model is None:
        return {}
    if isinstance(model, InferredModel):
        return {k: (e.p, e.stderr) for k, e in model.entries.items()}
    return {canonical_detectors(k): (float(v), None) for k, v in dict(model).items()}


# ---------------------------------------------------------------------------
# Class totals


@dataclass
class ClassReport:
    totals: Dict[ErrorClass, float]
    dispersion: Dict[ErrorClass, float]
    counts: Dict[ErrorClass, int]
    clipped_totals: Dict[ErrorClass, float]

    def rows(self) -> List[Tuple[str, float, float, int, float]]:
        return [(c.value, self.totals[c], self.dispersion[c], self.counts[c], self.clipped_totals[c])
                for c in ErrorClass]


def class_totals(model, catalog: FaultCatalog) -> ClassReport:
    """Sum of probabilities per class; dispersion is sqrt(sum of squared deviations from the class mean)."""
    sched = catalog.schedule
    groups: Dict[ErrorClass, List[float]] = defaultdict(list)
    for key, (p, _) in _entries(model).items():
        if not math.isfinite(p):
            continue
        groups[classify_signature(key, sched.layout, sched, catalog)].append(p)
    totals, disp, counts, clipped = {}, {}, {}, {}
    for c in ErrorClass:
        v = np.array(groups.get(c, []), dtype=float)
        totals[c] = float(math.fsum(v)) if v.size else 0.0
        clipped[c] = float(math.fsum(np.clip(v, 0.0, None))) if v.size else 0.0
        disp[c] = float(math.sqrt(np.sum((v - v.mean()) ** 2))) if v.size else 0.0
        counts[c] = int(v.size)
    return ClassReport(totals, disp, counts, clipped)


# ---------------------------------------------------------------------------
# p versus number of Pauli/gate combinations


def signature_nu(catalog: FaultCatalog, key: Sequence[DetectorCoord]) -> int:
    return sum(e.nu for e in catalog.lookup(key))


@dataclass
class NuScatter:
    points: List[Tuple[Tuple[DetectorCoord, ...], int, float]]
    spearman: float


def p_vs_nu(model, catalog: FaultCatalog) -> NuScatter:
    """(signature, nu, p) for catalog signatures with nu >= 1, class T left out."""
    sched = catalog.schedule
    pts = []
    for key, (p, _) in sorted(_entries(model).items(), key=lambda kv: [detector_sort_key(d) for d in kv[0]]):
        if not math.isfinite(p):
            continue
        nu = signature_nu(catalog, key)
        if nu < 1:
            continue
        if classify_signature(key, sched.layout, sched, catalog) is ErrorClass.T:
            continue
        pts.append((key, nu, float(p)))
    if len(pts) >= 2 and len({n for _, n, _ in pts}) > 1:
        rho = float(stats.spearmanr([n for _, n, _ in pts], [p for *_, p in pts]).statistic)
    else:
        rho = float("nan")
    return NuScatter(pts, rho)


# ---------------------------------------------------------------------------
# X / Y symmetry


@dataclass(frozen=True)
class XYPoint:
    locations: Tuple[int, ...]
    key_x: Tuple[DetectorCoord, ...]
    key_y: Tuple[DetectorCoord, ...]
    p_x: float
    p_y: float
    se_x: Optional[float]
    se_y: Optional[float]

    def z(self) -> float:
        if self.se_x is None or self.se_y is None:
            return float("nan")
        s = math.hypot(self.se_x, self.se_y)
        return (self.p_x - self.p_y) / s if s > 0 else float("nan")


def _swap_xy(ref: CircuitSchedule, location: int, pauli: str, qubit: int) -> Tuple[int, str]:
    qs = ref.locations[location].qubits
    swap = {"X": "Y", "Y": "X"}
    return location, "".join(swap.get(c, c) if q == qubit else c for q, c in zip(qs, pauli))


def xy_pairs(catalog: FaultCatalog) -> List[Tuple[Tuple[int, ...], Tuple, Tuple]]:
    """Locations whose X and Y faults have signatures that only X / only Y errors there explain.

    A pair (k_X, k_Y) qualifies when the faults producing k_Y are exactly the
    faults producing k_X with X and Y exchanged on the faulted qubit. Noise that
    is symmetric under Z rotations of that qubit then gives p_X = p_Y. Several
    locations may share a pair of signatures (e.g. consecutive idles); they are
    reported together.
    """
    ref = catalog.reference
    faults_of: Dict[Tuple, set] = defaultdict(set)
    key_of: Dict[Tuple[int, str], Tuple] = {}
    for e in catalog:
        k = e.signature.detectors
        for f in e.faults:
            faults_of[k].add((f.location, f.pauli))
            if ref.locations[f.location].kind != "2q" and f.pauli in ("X", "Y"):
                key_of[(f.location, f.pauli)] = k
    found: Dict[Tuple, List[int]] = {}
    for (loc, pauli), kx in sorted(key_of.items()):
        if pauli != "X" or (loc, "Y") not in key_of:
            continue
        ky = key_of[(loc, "Y")]
        if kx == ky:
            continue
        q = ref.locations[loc].qubits[0]
        if {_swap_xy(ref, l, p, q) for l, p in faults_of[kx]} != faults_of[ky]:
            continue
        found.setdefault((kx, ky), []).append(loc)
    return [(tuple(locs), kx, ky) for (kx, ky), locs in found.items()]


def xy_symmetry(model, catalog: FaultCatalog) -> List[XYPoint]:
    ent = _entries(model)
    if not ent:
        return []
    out = []
    for locs, kx, ky in xy_pairs(catalog):
        if kx in ent and ky in ent:
            (px, sx), (py, sy) = ent[kx], ent[ky]
            out.append(XYPoint(locs, kx, ky, px, py, sx, sy))
    return out


# ---------------------------------------------------------------------------
# Long-time correlations


@dataclass
class DecayFit:
    dm: np.ndarray
    covariance: np.ndarray
    stderr: np.ndarray
    base: float
    amplitude: float
    residuals: np.ndarray
    fitted: bool
    note: str = ""

    def rows(self) -> List[Tuple[int, float, float]]:
        return [(int(d), float(c), float(s)) for d, c, s in zip(self.dm, self.covariance, self.stderr)]


def same_ancilla_covariance(dataset, max_dm: Optional[int] = None, ancillas: Optional[Iterable[str]] = None):
    """Mean covariance of one ancilla's detectors ``dm`` cycles apart, averaged over pairs and ancillas.

    Returns (dm, mean covariance, standard error of that mean).
    """
    by_anc: Dict[str, List[Tuple[int, int]]] = defaultdict(list)
    for i, d in enumerate(dataset.detector_list):
        by_anc[d.ancilla].append((d.tick, i))
    names = sorted(by_anc) if ancillas is None else list(ancillas)
    top = max(len(v) for v in by_anc.values()) - 1
    max_dm = top if max_dm is None else min(max_dm, top)
    acc = [[] for _ in range(max_dm + 1)]
    var = [[] for _ in range(max_dm + 1)]
    n = dataset.n_shots
    bits = dataset.shots
    for a in names:
        cols = [i for _, i in sorted(by_anc[a])]
        x = bits[:, cols].astype(np.float64)
        x -= x.mean(axis=0)
        for dm in range(1, max_dm + 1):
            if dm >= len(cols):
                break
            prod = x[:, :-dm] * x[:, dm:]
            acc[dm].extend(prod.mean(axis=0).tolist())
            var[dm].extend((prod.var(axis=0) / n).tolist())
    dms, cov, se = [], [], []
    for dm in range(1, max_dm + 1):
        if acc[dm]:
            dms.append(dm)
            cov.append(float(np.mean(acc[dm])))
            se.append(float(math.sqrt(np.sum(var[dm])) / len(var[dm])))
    return np.array(dms), np.array(cov), np.array(se)


def time_decay_fit(dataset, max_dm: Optional[int] = None, min_dm: int = 3) -> DecayFit:
    """Least-squares fit of log C = log C0 + dm log b over dm >= ``min_dm`` with C > 0."""
    dm, cov, se = same_ancilla_covariance(dataset, max_dm)
    sel = (dm >= min_dm)
    pos = sel & (cov > 0)
    if pos.sum() < 2:
        return DecayFit(dm, cov, se, float("nan"), float("nan"), np.zeros(0), False,
                        "fewer than two positive covariances in the fit range")
    x, y = dm[pos].astype(float), np.log(cov[pos])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (intercept + slope * x)
    note = "" if pos.sum() == sel.sum() else f"{int(sel.sum() - pos.sum())} non-positive points skipped"
    return DecayFit(dm, cov, se, float(math.exp(slope)), float(math.exp(intercept)), resid, True, note)


# ---------------------------------------------------------------------------
# Misclassification-like signatures


def tprime_signatures(schedule: CircuitSchedule) -> List[Tuple[DetectorCoord, DetectorCoord]]:
    """All pairs on one ancilla two cycles apart."""
    have = set(schedule.detector_list)
    out = []
    for d in schedule.detector_list:
        e = DetectorCoord(d.ancilla, d.tick + 4)
        if e in have:
            out.append((d, e))
    return out


@dataclass
class TPrimeReport:
    per_cycle: Dict[str, Dict[int, float]]       # support label -> cycle -> mean over ancillas
    per_ancilla: Dict[str, Dict[str, float]]     # support label -> ancilla -> mean over cycles
    reference: Dict[str, float] = field(default_factory=dict)   # injected p_mc per ancilla


def tprime_analysis(datasets, supports: Mapping[str, ModelSupport], schedule: CircuitSchedule,
                    p_mc: Optional[Mapping[str, float]] = None, n_boot: int = 20, seed: int = 0) -> TPrimeReport:
    """Infer the T' probabilities under each support (T' pairs are added when missing)."""
    if not isinstance(datasets, (list, tuple)):
        datasets = [datasets]
    tp = tprime_signatures(schedule)
    per_cycle: Dict[str, Dict[int, float]] = {}
    per_anc: Dict[str, Dict[str, float]] = {}
    for label, sup in supports.items():
        full = ModelSupport(set(sup.signatures) | set(tp))
        vals: Dict[Tuple, List[float]] = defaultdict(list)
        for ds in datasets:
            model = infer_probabilities(estimate_moments(ds, full), full, n_boot=n_boot, seed=seed)
            for k in tp:
                p = model.entries[k].p
                if math.isfinite(p):
                    vals[k].append(p)
        cyc: Dict[int, List[float]] = defaultdict(list)
        anc: Dict[str, List[float]] = defaultdict(list)
        for (a, b), ps in vals.items():
            p = float(np.mean(ps))
            cyc[CircuitSchedule.detector_cycle(a.tick)].append(p)
            if schedule.is_bulk((a, b)):
                anc[a.ancilla].append(p)
        per_cycle[label] = {c: float(np.mean(v)) for c, v in sorted(cyc.items())}
        per_anc[label] = {a: float(np.mean(v)) for a, v in sorted(anc.items())}
    return TPrimeReport(per_cycle, per_anc, dict(p_mc or {}))


def tprime_channels(schedule: CircuitSchedule, p_mc: Mapping[str, float]) -> List[SignatureChannel]:
    """Misclassification channels: one T' pair per ancilla readout, at the ancilla's rate."""
    return [SignatureChannel(ErrorSignature(pair), float(p_mc[pair[0].ancilla]))
            for pair in tprime_signatures(schedule) if p_mc.get(pair[0].ancilla, 0.0) > 0]


# ---------------------------------------------------------------------------
# Mean syndrome per cycle


def mean_syndrome_vs_cycle(dataset) -> Dict[str, List[Tuple[int, float]]]:
    """Per ancilla: (cycle, mean detector value), first and last cycles included."""
    means = dataset.shots.mean(axis=0) if dataset.n_shots else np.zeros(dataset.n_detectors)
    out: Dict[str, List[Tuple[int, float]]] = defaultdict(list)
    for d, m in zip(dataset.detector_list, means):
        out[d.ancilla].append((CircuitSchedule.detector_cycle(d.tick), float(m)))
    return {a: sorted(v) for a, v in sorted(out.items(), key=lambda kv: detector_sort_key(DetectorCoord(kv[0], 0)))}


# ---------------------------------------------------------------------------
# Drift


def drift_closed_form(p: float, eps: float = 1.0) -> Tuple[float, float, float]:
    """Apparent (p1, p2, p12) when both rates are (1 - eps) p for half the shots and (1 + eps) p after."""
    if not 0.0 < p < 0.25:
        raise ValueError("p must lie in (0, 0.25)")
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    m = 1.0 - 2.0 * p
    mm = m * m + 4.0 * eps * eps * p * p
    p12 = 0.5 - 0.5 * math.sqrt(m * m / mm)
    p1 = 0.5 - 0.5 * m / (1.0 - 2.0 * p12)
    return p1, p1, p12


@dataclass
class DriftResult:
    p: float
    eps: float
    analytic: Tuple[float, float, float]
    simulated: Optional[Tuple[float, float, float]] = None
    stderr: Optional[Tuple[float, float, float]] = None


def drift_demo(p: float, eps: float = 1.0, n_shots: int = 0, seed: int = 0) -> DriftResult:
    """Closed form, plus an inference on simulated two-regime data when ``n_shots`` > 0."""
    res = DriftResult(p, eps, drift_closed_form(p, eps))
    if n_shots > 0:
        nodes = (DetectorCoord("V1", 0), DetectorCoord("V1", 2))
        a = [SignatureChannel(ErrorSignature((n,)), (1 - eps) * p) for n in nodes]
        b = [SignatureChannel(ErrorSignature((n,)), (1 + eps) * p) for n in nodes]
        ds = inject_drift(a, b, nodes, n_shots, seed)
        sup = ModelSupport([(nodes[0],), (nodes[1],), nodes])
        model = infer_probabilities(estimate_moments(ds, sup), sup, seed=seed)
        keys = [(nodes[0],), (nodes[1],), nodes]
        res.simulated = tuple(model.entries[k].p for k in keys)
        res.stderr = tuple(model.entries[k].stderr for k in keys)
    return res


# ---------------------------------------------------------------------------
# CSV output


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _fmt(v):
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    if isinstance(v, tuple) and v and isinstance(v[0], DetectorCoord):
        return " ".join(f"{d.ancilla}:{d.tick}" for d in v)
    return v


def class_rows(report: ClassReport):
    return ["class", "total_p", "dispersion", "count", "total_p_clipped"], report.rows()


def nu_rows(scatter: NuScatter):
    return ["signature", "nu", "p"], [(k, n, p) for k, n, p in scatter.points]


def xy_rows(points: Sequence[XYPoint]):
    return (["locations", "signature_x", "signature_y", "p_x", "p_y", "se_x", "se_y"],
            [(" ".join(map(str, q.locations)), q.key_x, q.key_y, q.p_x, q.p_y,
              q.se_x if q.se_x is not None else "", q.se_y if q.se_y is not None else "") for q in points])


def decay_rows(fit: DecayFit):
    return ["dm", "covariance", "stderr"], fit.rows()


def mean_syndrome_rows(curves: Mapping[str, List[Tuple[int, float]]]):
    return ["ancilla", "cycle", "mean"], [(a, c, m) for a, v in curves.items() for c, m in v]


def covariance_rows(names: Sequence[str], M: np.ndarray):
    return ["ancilla"] + list(names), [(n,) + tuple(float(x) for x in row) for n, row in zip(names, M)]


def tprime_cycle_rows(rep: TPrimeReport):
    labels = sorted(rep.per_cycle)
    cycles = sorted({c for v in rep.per_cycle.values() for c in v})
    return ["cycle"] + labels, [(c,) + tuple(rep.per_cycle[l].get(c, float("nan")) for l in labels)
                                for c in cycles]


def tprime_ancilla_rows(rep: TPrimeReport):
    labels = sorted(rep.per_ancilla)
    ancs = sorted({a for v in rep.per_ancilla.values() for a in v},
                  key=lambda a: detector_sort_key(DetectorCoord(a, 0)))
    return (["ancilla", "p_mc"] + labels,
            [(a, rep.reference.get(a, float("nan"))) + tuple(rep.per_ancilla[l].get(a, float("nan"))
                                                             for l in labels) for a in ancs])


def drift_rows(results: Sequence[DriftResult]):
    rows = []
    for r in results:
        sim = r.simulated or (float("nan"),) * 3
        rows.append((r.p, r.eps) + tuple(r.analytic) + tuple(sim))
    return ["p", "eps", "p1", "p2", "p12", "p1_sim", "p2_sim", "p12_sim"], rows


# ---------------------------------------------------------------------------
# Bias from omitted high-weight signatures


BIAS_TRUTH = {(1,): 0.03, (1, 2): 0.025, (1, 2, 3): 0.01}


def bias_demo(truth: Optional[Mapping[Tuple[int, ...], float]] = None):
    """Three detectors with exact moments: full-support inversion versus the pairwise formula.

    Returns (keys, full model, pairwise model); keys are the six weight <= 2
    signatures in the order (1), (2), (3), (1,2), (1,3), (2,3).
    """
    from .correlation_inference import analytic_moments, infer_pairwise_spitz
    truth = dict(BIAS_TRUTH if truth is None else truth)
    nodes = [DetectorCoord("V1", 2 * i) for i in range(3)]
    sig = lambda t: tuple(nodes[i - 1] for i in t)
    channels = [SignatureChannel(ErrorSignature(sig(k)), p) for k, p in truth.items()]
    everything = [sig(t) for t in ((1,), (2,), (3,), (1, 2), (1, 3), (2, 3), (1, 2, 3))]
    moments = analytic_moments(channels, everything, nodes)
    full = infer_probabilities(moments, ModelSupport(everything))
    pairs = everything[:6]
    spitz = infer_pairwise_spitz(moments, ModelSupport(pairs))
    return pairs, full, spitz
