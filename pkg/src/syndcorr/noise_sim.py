"""Syndrome data generation.

Two samplers: a Pauli-frame simulation of the full memory circuit under
circuit-level depolarizing noise, and direct sampling of independent signature
channels (each flips a fixed detector set with probability p).

Random numbers come from Philox streams keyed by ``(seed, block)`` with a fixed
shot-block size, so a dataset does not depend on the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .code_model import (CircuitSchedule, DetectorCoord, ErrorSignature, PauliFault,
                         TWO_QUBIT_PAULIS, canonical_detectors, pauli_bits,
                         propagate_faults, run_frames)

BLOCK_SHOTS = 1 << 14
_SAMPLER_TAG = 0x5EED


@dataclass(frozen=True)
class NoiseParams:
    """Circuit noise; defaults are the averaged device rates used for simulation."""
    mode: str = "uniform"
    p_1q: float = 0.0009
    p_2q: float = 0.015
    p_ro: float = 0.0116
    t_coherence: float = 35.0
    spread: float = 0.0
    mu_2q: float = 0.015
    mu_1q: float = 0.0009
    sd_2q: float = 0.01
    sd_1q: float = 0.0004
    seed: int = 0
    p_idle: Optional[float] = None

    def __post_init__(self):
        if self.mode not in ("uniform", "heterogeneous"):
            raise ValueError("mode must be 'uniform' or 'heterogeneous'")
        for name in ("p_1q", "p_2q", "p_ro"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")
        if self.t_coherence <= 0 or self.spread < 0:
            raise ValueError("t_coherence must be positive and spread non-negative")

    def idle_probability(self, duration: float) -> float:
        if self.p_idle is not None:
            return self.p_idle
        if duration <= 0 or math.isinf(self.t_coherence):
            return 0.0
        return (1.0 - math.exp(-duration / self.t_coherence)) / 4.0

    @classmethod
    def zero(cls) -> "NoiseParams":
        return cls(p_1q=0.0, p_2q=0.0, p_ro=0.0, t_coherence=math.inf)

    @classmethod
    def depolarizing(cls, p: float) -> "NoiseParams":
        """Every gate, idle slot and readout at the same rate ``p``."""
        return cls(p_1q=p, p_2q=p, p_ro=p, p_idle=p, mu_2q=p, mu_1q=p)


@dataclass(frozen=True)
class SignatureChannel:
    signature: ErrorSignature
    probability: float


@dataclass
class SyndromeDataset:
    """Detector outcomes; stored bit-packed per detector (64 shots per word)."""
    detector_list: Tuple[DetectorCoord, ...]
    packed: np.ndarray
    n_shots: int
    truth: Optional[np.ndarray] = None
    provenance: Dict = field(default_factory=dict)

    def __post_init__(self):
        self.detector_list = tuple(DetectorCoord(str(a), int(t)) for a, t in self.detector_list)
        if self.packed.shape != (len(self.detector_list), (self.n_shots + 63) // 64):
            raise ValueError("packed array does not match detector count / shots")
        self.packed = np.ascontiguousarray(self.packed, dtype=np.uint64)
        if self.truth is not None:
            self.truth = np.ascontiguousarray(self.truth, dtype=np.uint8).reshape(self.n_shots, 2)
        self._shots = None
        self._index = None

    @property
    def n_detectors(self) -> int:
        return len(self.detector_list)

    @property
    def detector_index(self) -> Dict[DetectorCoord, int]:
        if self._index is None:
            self._index = {d: i for i, d in enumerate(self.detector_list)}
        return self._index

    @property
    def shots(self) -> np.ndarray:
        """Shot-major 0/1 matrix of shape (n_shots, n_detectors)."""
        if self._shots is None:
            self._shots = unpack_rows(self.packed, self.n_shots).T.copy()
        return self._shots

    @classmethod
    def from_bits(cls, detector_list, bits, truth=None, provenance=None) -> "SyndromeDataset":
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.ndim != 2 or bits.shape[1] != len(detector_list):
            raise ValueError("bit matrix width must equal the detector count")
        return cls(tuple(detector_list), pack_rows(bits.T), bits.shape[0], truth, dict(provenance or {}))

    def slice_shots(self, start: int, stop: int) -> "SyndromeDataset":
        bits = self.shots[start:stop]
        truth = None if self.truth is None else self.truth[start:stop]
        return SyndromeDataset.from_bits(self.detector_list, bits, truth, self.provenance)

    def digest(self) -> str:
        import hashlib
        h = hashlib.sha256()
        h.update(repr(self.detector_list).encode())
        h.update(self.packed.tobytes())
        if self.truth is not None:
            h.update(self.truth.tobytes())
        return h.hexdigest()


def pack_rows(rows: np.ndarray) -> np.ndarray:
    """(r, n) 0/1 array -> (r, ceil(n/64)) uint64 with shot s in bit s % 64."""
    rows = np.asarray(rows, dtype=np.uint8)
    r, n = rows.shape
    n_words = (n + 63) // 64
    padded = np.zeros((r, n_words * 64), dtype=np.uint8)
    padded[:, :n] = rows
    return np.packbits(padded, axis=1, bitorder="little").view(np.uint64).reshape(r, n_words)


def unpack_rows(packed: np.ndarray, n: int) -> np.ndarray:
    packed = np.ascontiguousarray(packed, dtype=np.uint64)
    bits = np.unpackbits(packed.view(np.uint8).reshape(packed.shape[0], -1), axis=1, bitorder="little")
    return bits[:, :n]


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed) & (2**63 - 1), *key])))


def sparse_hits(rng: np.random.Generator, n: int, p: float) -> np.ndarray:
    """Sorted indices in [0, n) each selected independently with probability p."""
    if p <= 0.0 or n <= 0:
        return np.empty(0, dtype=np.int64)
    if p >= 0.05:
        return np.flatnonzero(rng.random(n) < p)
    out = []
    pos = -1
    while True:
        need = int(n * p + 6.0 * math.sqrt(n * p) + 16)
        gaps = rng.geometric(p, size=need)
        cand = pos + np.cumsum(gaps)
        out.append(cand[cand < n])
        if cand[-1] >= n:
            break
        pos = int(cand[-1])
    return np.concatenate(out).astype(np.int64)


# ---------------------------------------------------------------------------
# Per-location error rates


def location_rates(schedule: CircuitSchedule, noise: NoiseParams) -> np.ndarray:
    """Total error probability at every fault location of ``schedule``."""
    rates = np.zeros(len(schedule.locations))
    draws = _heterogeneous_draws(schedule, noise) if noise.mode == "heterogeneous" else {}
    for loc in schedule.locations:
        if loc.kind == "2q":
            p = draws.get(("2q", tuple(sorted(loc.qubits))), noise.p_2q)
        elif loc.kind == "1q":
            p = draws.get(("1q", loc.qubits), noise.p_1q)
        elif loc.kind == "idle":
            p = noise.idle_probability(loc.duration)
        else:
            p = noise.p_ro
        rates[loc.index] = p
    return rates


def _heterogeneous_draws(schedule: CircuitSchedule, noise: NoiseParams) -> Dict:
    keys = sorted({(loc.kind, tuple(sorted(loc.qubits))) for loc in schedule.locations
                   if loc.kind in ("1q", "2q")})
    rng = _rng(noise.seed, 0x4E7)
    out = {}
    for kind, qs in keys:
        mu, sd = (noise.mu_2q, noise.sd_2q) if kind == "2q" else (noise.mu_1q, noise.sd_1q)
        v = rng.normal(mu, noise.spread * sd)
        out[(kind, qs)] = float(min(max(v, 0.0), 0.5 - 1e-12))
    return out


# ---------------------------------------------------------------------------
# Circuit simulation


def _block_events(schedule: CircuitSchedule, rates: np.ndarray, n: int, rng: np.random.Generator):
    locs_q0 = np.array([loc.qubits[0] for loc in schedule.locations], dtype=np.int64)
    locs_q1 = np.array([loc.qubits[-1] for loc in schedule.locations], dtype=np.int64)
    kinds = [loc.kind for loc in schedule.locations]
    ev_loc, ev_q, ev_shot, ev_x, ev_z = [], [], [], [], []
    for li, p in enumerate(rates):
        hits = sparse_hits(rng, n, float(p))
        if hits.size == 0:
            continue
        kind = kinds[li]
        if kind == "ro":
            xs, zs = np.ones(hits.size, np.uint8), np.zeros(hits.size, np.uint8)
            parts = [(locs_q0[li], xs, zs)]
        elif kind == "2q":
            v = rng.integers(1, 16, size=hits.size)
            a, b = v >> 2, v & 3
            parts = [(locs_q0[li], (a == 1) | (a == 2), (a == 2) | (a == 3)),
                     (locs_q1[li], (b == 1) | (b == 2), (b == 2) | (b == 3))]
        else:
            a = rng.integers(1, 4, size=hits.size)
            parts = [(locs_q0[li], (a == 1) | (a == 2), (a == 2) | (a == 3))]
        for q, xs, zs in parts:
            keep = np.asarray(xs, bool) | np.asarray(zs, bool)
            if not keep.any():
                continue
            m = int(keep.sum())
            ev_loc.append(np.full(m, li, np.int64))
            ev_q.append(np.full(m, q, np.int64))
            ev_shot.append(hits[keep])
            ev_x.append(np.asarray(xs, bool)[keep])
            ev_z.append(np.asarray(zs, bool)[keep])
    return _pack_events(len(schedule.locations), ev_loc, ev_q, ev_shot, ev_x, ev_z)


def _pack_events(n_loc, ev_loc, ev_q, ev_shot, ev_x, ev_z):
    if ev_loc:
        loc = np.concatenate(ev_loc)
        q = np.concatenate(ev_q)
        shot = np.concatenate(ev_shot)
        x = np.concatenate(ev_x)
        z = np.concatenate(ev_z)
    else:
        loc = q = shot = np.empty(0, np.int64)
        x = z = np.empty(0, bool)
    order = np.argsort(loc, kind="stable")
    loc, q, shot, x, z = loc[order], q[order], shot[order], x[order], z[order]
    bit = np.left_shift(np.uint64(1), (shot % 64).astype(np.uint64))
    ev_start = np.searchsorted(loc, np.arange(n_loc + 1)).astype(np.int64)
    return (ev_start, q.astype(np.int64), (shot // 64).astype(np.int64),
            np.where(x, bit, np.uint64(0)).astype(np.uint64),
            np.where(z, bit, np.uint64(0)).astype(np.uint64))


def simulate_circuit(schedule: CircuitSchedule, noise: NoiseParams, n_shots: int, seed: int,
                     threads: int = 1, injected: Sequence[Tuple[int, PauliFault]] = ()) -> SyndromeDataset:
    """Monte Carlo of the memory experiment; ``injected`` adds (shot, fault) pairs."""
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    rates = location_rates(schedule, noise)
    n_blocks = (n_shots + BLOCK_SHOTS - 1) // BLOCK_SHOTS
    inj_by_block: Dict[int, List[Tuple[int, PauliFault]]] = {}
    for shot, fault in injected:
        inj_by_block.setdefault(shot // BLOCK_SHOTS, []).append((shot % BLOCK_SHOTS, fault))

    def run(b):
        n = min(BLOCK_SHOTS, n_shots - b * BLOCK_SHOTS)
        events = _block_events(schedule, rates, n, _rng(seed, b))
        extra = inj_by_block.get(b)
        if extra:
            events = _merge_injected(schedule, events, extra)
        return run_frames(schedule, events, (n + 63) // 64)

    if threads > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            outs = list(ex.map(run, range(n_blocks)))
    else:
        outs = [run(b) for b in range(n_blocks)]
    full = np.concatenate(outs, axis=1)
    det = full[:-2]
    truth = unpack_rows(full[-2:], n_shots).T
    prov = {"sampler": "circuit", "seed": int(seed), "cycles": schedule.cycles,
            "distance": schedule.layout.distance, "basis": schedule.prepared_basis,
            "noise": {k: (v if not isinstance(v, float) or math.isfinite(v) else "inf")
                      for k, v in vars(noise).items()}}
    return SyndromeDataset(schedule.detector_list, det, n_shots, truth, prov)


def _merge_injected(schedule, events, extra):
    ev_start, ev_q, ev_w, ev_x, ev_z = events
    n_loc = len(schedule.locations)
    loc = np.repeat(np.arange(n_loc), np.diff(ev_start))
    add_loc, add_q, add_w, add_x, add_z = [], [], [], [], []
    for shot, fault in extra:
        lq = schedule.locations[fault.location].qubits
        letters = fault.pauli if len(fault.pauli) == len(lq) else fault.pauli + "I" * (len(lq) - len(fault.pauli))
        bit = np.uint64(1) << np.uint64(shot % 64)
        for q, p in zip(lq, letters):
            x, z = pauli_bits(p)
            if x or z:
                add_loc.append(fault.location)
                add_q.append(q)
                add_w.append(shot // 64)
                add_x.append(bit if x else np.uint64(0))
                add_z.append(bit if z else np.uint64(0))
    loc = np.concatenate([loc, np.array(add_loc, np.int64)])
    q = np.concatenate([ev_q, np.array(add_q, np.int64)])
    w = np.concatenate([ev_w, np.array(add_w, np.int64)])
    x = np.concatenate([ev_x, np.array(add_x, np.uint64)])
    z = np.concatenate([ev_z, np.array(add_z, np.uint64)])
    order = np.argsort(loc, kind="stable")
    return (np.searchsorted(loc[order], np.arange(n_loc + 1)).astype(np.int64),
            q[order], w[order], x[order], z[order])


# ---------------------------------------------------------------------------
# Exact decomposition into independent Pauli channels


def independent_pauli_probability(p: float, kind: str) -> float:
    """Per-Pauli probability of the independent-channel form of a depolarizer."""
    if p <= 0:
        return 0.0
    if kind == "2q":
        return 0.5 * (1.0 - (1.0 - 16.0 * p / 15.0) ** 0.125)
    if kind == "ro":
        return p
    return 0.5 * (1.0 - math.sqrt(1.0 - 4.0 * p / 3.0))


def pauli_channels(schedule: CircuitSchedule, noise: NoiseParams) -> List[Tuple[PauliFault, float]]:
    """Independent (fault, probability) channels equivalent to the circuit noise."""
    rates = location_rates(schedule, noise)
    out = []
    for loc in schedule.locations:
        p = rates[loc.index]
        if p <= 0:
            continue
        q = independent_pauli_probability(p, loc.kind)
        if loc.kind == "ro":
            out.append((PauliFault(loc.index, "X"), q))
        else:
            paulis = TWO_QUBIT_PAULIS if loc.kind == "2q" else ("X", "Y", "Z")
            out.extend((PauliFault(loc.index, s), q) for s in paulis)
    return out


@dataclass
class DetectorErrorModel:
    """Exact signature probabilities of the circuit noise (absolute ticks)."""
    probabilities: Dict[Tuple[DetectorCoord, ...], float]
    logical: Dict[Tuple[DetectorCoord, ...], Tuple[float, float]]
    contributions: Dict[Tuple[DetectorCoord, ...], List[Tuple[PauliFault, float]]]


def detector_error_model(schedule: CircuitSchedule, noise: NoiseParams) -> DetectorErrorModel:
    chans = pauli_channels(schedule, noise)
    sigs = propagate_faults(schedule, [f for f, _ in chans])
    prob: Dict[Tuple[DetectorCoord, ...], float] = {}
    logical: Dict[Tuple[DetectorCoord, ...], List[float]] = {}
    contrib: Dict[Tuple[DetectorCoord, ...], List[Tuple[PauliFault, float]]] = {}
    for (f, q), s in zip(chans, sigs):
        if not s.detectors:
            continue
        key = s.detectors
        p0 = prob.get(key, 0.0)
        prob[key] = p0 + q - 2.0 * p0 * q
        lx, lz = logical.setdefault(key, [0.0, 0.0])
        logical[key] = [lx + q * s.logical_flip_x, lz + q * s.logical_flip_z]
        contrib.setdefault(key, []).append((f, q))
    return DetectorErrorModel(prob, {k: tuple(v) for k, v in logical.items()}, contrib)


def first_order_detector_means(schedule: CircuitSchedule, noise: NoiseParams) -> np.ndarray:
    """First-order mean of every detector: sum of channel probabilities touching it."""
    dem = detector_error_model(schedule, noise)
    idx = schedule.detector_index
    out = np.zeros(schedule.n_detectors)
    for key, p in dem.probabilities.items():
        for d in key:
            out[idx[d]] += p
    return out


# ---------------------------------------------------------------------------
# Latent signature-channel model


def _channel_rows(channels: Sequence[SignatureChannel], detector_list) -> List[np.ndarray]:
    index = {DetectorCoord(*d): i for i, d in enumerate(detector_list)}
    seen = set()
    rows = []
    for ch in channels:
        dets = canonical_detectors(ch.signature.detectors)
        if dets in seen:
            raise ValueError("channel signatures must be distinct")
        seen.add(dets)
        try:
            rows.append(np.array([index[d] for d in dets], dtype=np.int64))
        except KeyError as exc:
            raise ValueError(f"unknown detector {exc.args[0]}") from None
        if not 0.0 <= ch.probability < 1.0:
            raise ValueError("channel probability outside [0, 1)")
    return rows


def _sample_segments(channels, detector_list, n_shots, seed, segments):
    """``segments``: list of (start, stop, probabilities) covering [0, n_shots)."""
    rows = _channel_rows(channels, detector_list)
    n_words = (n_shots + 63) // 64
    packed = np.zeros((len(detector_list), n_words), dtype=np.uint64)
    one = np.uint64(1)
    for ci, r in enumerate(rows):
        hits = []
        for si, (lo, hi, probs) in enumerate(segments):
            rng = _rng(seed, _SAMPLER_TAG, ci, si)
            hits.append(lo + sparse_hits(rng, hi - lo, float(probs[ci])))
        h = np.concatenate(hits) if hits else np.empty(0, np.int64)
        if h.size == 0 or r.size == 0:
            continue
        mask = np.zeros(n_words, dtype=np.uint64)
        np.bitwise_or.at(mask, h // 64, np.left_shift(one, (h % 64).astype(np.uint64)))
        packed[r] ^= mask
    return packed


def sample_signature_channels(channels: Sequence[SignatureChannel], detector_list, n_shots: int,
                              seed: int) -> SyndromeDataset:
    """Each shot triggers each channel independently; detectors are XORs."""
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    probs = [c.probability for c in channels]
    packed = _sample_segments(channels, detector_list, n_shots, seed, [(0, n_shots, probs)])
    return SyndromeDataset(tuple(detector_list), packed, n_shots, None,
                           {"sampler": "channels", "seed": int(seed), "channels": len(channels)})


def inject_drift(channels_a: Sequence[SignatureChannel], channels_b: Sequence[SignatureChannel],
                 detector_list, n_shots: int, seed: int, regime_split: float = 0.5) -> SyndromeDataset:
    """Channel rates switch from ``channels_a`` to ``channels_b`` after a fraction of the shots."""
    if not 0.0 < regime_split < 1.0:
        raise ValueError("regime_split must lie in (0, 1)")
    if [c.signature.detectors for c in channels_a] != [c.signature.detectors for c in channels_b]:
        raise ValueError("both regimes need the same signatures in the same order")
    cut = int(round(regime_split * n_shots))
    segs = [(0, cut, [c.probability for c in channels_a]),
            (cut, n_shots, [c.probability for c in channels_b])]
    packed = _sample_segments(channels_a, detector_list, n_shots, seed, segs)
    return SyndromeDataset(tuple(detector_list), packed, n_shots, None,
                           {"sampler": "drift", "seed": int(seed), "split": regime_split})


def random_channels(n_channels: int, n_nodes: int = 64, max_weight: int = 12,
                    p_range: Tuple[float, float] = (0.001, 0.2), seed: int = 0, span: int = 16,
                    ancilla: str = "V1") -> Tuple[List[SignatureChannel], Tuple[DetectorCoord, ...]]:
    """Distinct random signatures on a line of ``n_nodes`` synthetic detectors.

    Each signature lives inside ``span`` consecutive nodes (local, like physical
    errors). Weights are uniform on 1..max_weight and probabilities log-uniform
    on ``p_range``.
    """
    span = min(span, n_nodes)
    top = min(max_weight, span)
    rng = _rng(seed, _SAMPLER_TAG, 0xC4A)
    nodes = tuple(DetectorCoord(ancilla, 2 * i) for i in range(n_nodes))
    lo, hi = np.log(p_range[0]), np.log(p_range[1])
    seen = set()
    out = []
    tries = 0
    while len(out) < n_channels:
        tries += 1
        if tries > 1000 * n_channels:
            raise ValueError("cannot draw that many distinct signatures")
        w = int(rng.integers(1, top + 1))
        start = int(rng.integers(0, n_nodes - span + 1))
        pick = tuple(sorted((start + rng.choice(span, size=w, replace=False)).tolist()))
        if pick in seen:
            continue
        seen.add(pick)
        p = float(np.exp(rng.uniform(lo, hi)))
        out.append(SignatureChannel(ErrorSignature(tuple(nodes[i] for i in pick)), p))
    return out, nodes
