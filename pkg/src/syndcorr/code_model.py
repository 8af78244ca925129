"""Rotated surface-code layout, pipelined schedule and fault signatures.

Qubits are integers: data qubits first (``D1`` is 0), then the X-type and the
Z-type ancillas. Time is counted in half-cycle ticks: the prepared-type
stabilizers of cycle ``m`` are read at tick ``2m`` and the other type at
``2m + 1`` (its first round is skipped).
"""

from __future__ import annotations

import itertools
import json
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .kernels import OP_CZ, OP_H, OP_M, OP_NOISE, OP_RX, OP_RZ

PAULIS = ("I", "X", "Y", "Z")
TWO_QUBIT_PAULIS = tuple(a + b for a in PAULIS for b in PAULIS if a + b != "II")

# CZ visiting order inside a plaquette; (drow, dcol) offsets from the NW corner.
X_ORDER = ((0, 0), (0, 1), (1, 0), (1, 1))
Z_ORDER = ((0, 0), (1, 0), (0, 1), (1, 1))


def pauli_bits(p: str) -> Tuple[int, int]:
    """(x, z) symplectic bits of a single-qubit Pauli letter."""
    return (1 if p in ("X", "Y") else 0, 1 if p in ("Y", "Z") else 0)


class DetectorCoord(NamedTuple):
    ancilla: str
    tick: int


def _ancilla_key(name: str) -> Tuple[str, int]:
    return name[0], int(name[1:])


def detector_sort_key(d: DetectorCoord):
    return _ancilla_key(d.ancilla), d.tick


def canonical_detectors(dets: Iterable) -> Tuple[DetectorCoord, ...]:
    """Sorted, duplicate-free tuple of detectors (ancilla, then tick)."""
    out = {DetectorCoord(str(a), int(t)) for a, t in dets}
    return tuple(sorted(out, key=detector_sort_key))


@dataclass(frozen=True)
class ErrorSignature:
    detectors: Tuple[DetectorCoord, ...]
    logical_flip_x: bool = False
    logical_flip_z: bool = False

    def __post_init__(self):
        object.__setattr__(self, "detectors", canonical_detectors(self.detectors))
        object.__setattr__(self, "logical_flip_x", bool(self.logical_flip_x))
        object.__setattr__(self, "logical_flip_z", bool(self.logical_flip_z))

    @property
    def weight(self) -> int:
        return len(self.detectors)

    def shifted(self, dt: int) -> "ErrorSignature":
        return ErrorSignature(tuple(DetectorCoord(d.ancilla, d.tick + dt) for d in self.detectors),
                              self.logical_flip_x, self.logical_flip_z)

    def restricted(self, kind: str) -> Tuple[DetectorCoord, ...]:
        return tuple(d for d in self.detectors if d.ancilla[0] == kind)


class ErrorClass(str, Enum):
    B = "B"
    T = "T"
    Tprime = "Tprime"
    S_XZ = "S_XZ"
    S_Y = "S_Y"
    ST_X = "ST_X"
    ST_Y = "ST_Y"
    H_X = "H_X"
    H_Y = "H_Y"
    M_ZZ = "M_ZZ"
    M_XY = "M_XY"
    C = "C"
    Unclassified = "Unclassified"


@dataclass(frozen=True)
class PauliFault:
    location: int
    pauli: str

    def __post_init__(self):
        if not self.pauli or any(ch not in PAULIS for ch in self.pauli) or len(self.pauli) > 2:
            raise ValueError(f"bad Pauli string {self.pauli!r}")


# ---------------------------------------------------------------------------
# Layout


@dataclass(frozen=True)
class Ancilla:
    name: str
    kind: str
    qubit: int
    position: Tuple[float, float]
    slots: Tuple[Optional[int], ...]

    @property
    def support(self) -> Tuple[int, ...]:
        return tuple(q for q in self.slots if q is not None)


@dataclass(frozen=True)
class SurfaceCodeLayout:
    distance: int
    data_coords: Tuple[Tuple[int, int], ...]
    ancillas: Tuple[Ancilla, ...]
    logical_x_support: Tuple[int, ...]
    logical_z_support: Tuple[int, ...]
    boundary_assignment: Dict[Tuple[str, str], str] = field(hash=False, compare=False)

    @property
    def n_data(self) -> int:
        return len(self.data_coords)

    @property
    def n_qubits(self) -> int:
        return self.n_data + len(self.ancillas)

    def data_name(self, q: int) -> str:
        return f"D{q + 1}"

    def qubit_name(self, q: int) -> str:
        if q < self.n_data:
            return self.data_name(q)
        return self.ancillas[q - self.n_data].name

    def ancilla(self, name: str) -> Ancilla:
        return self._by_name[name]

    @property
    def _by_name(self) -> Dict[str, Ancilla]:
        cached = self.__dict__.get("_by_name_cache")
        if cached is None:
            cached = {a.name: a for a in self.ancillas}
            object.__setattr__(self, "_by_name_cache", cached)
        return cached

    def ancillas_of(self, kind: str) -> Tuple[Ancilla, ...]:
        return tuple(a for a in self.ancillas if a.kind == kind)

    @property
    def neighbors(self) -> Dict[str, List[Optional[int]]]:
        return {a.name: list(a.slots) for a in self.ancillas}

    def boundary_of(self, name: str) -> str:
        """Assigned boundary, or the geometrically closer one for bulk ancillas."""
        a = self.ancilla(name)
        label = self.boundary_assignment.get((a.kind, name))
        if label is not None:
            return label
        mid = (self.distance - 1) / 2
        if a.kind == "X":
            return "West" if a.position[1] < mid else "East"
        return "North" if a.position[0] < mid else "South"

    def adjacent(self, a: str, b: str) -> bool:
        """Whether two same-kind ancillas share a data qubit."""
        return bool(set(self.ancilla(a).support) & set(self.ancilla(b).support))

    def to_json(self) -> str:
        return json.dumps({
            "distance": self.distance,
            "data_qubits": [{"id": self.data_name(i), "row": r, "col": c}
                            for i, (r, c) in enumerate(self.data_coords)],
            "ancillas": [{"id": a.name, "kind": a.kind, "position": list(a.position),
                          "slots": [None if q is None else self.data_name(q) for q in a.slots]}
                         for a in self.ancillas],
            "logical_x_support": [self.data_name(q) for q in self.logical_x_support],
            "logical_z_support": [self.data_name(q) for q in self.logical_z_support],
            "boundary_assignment": {f"{k}:{n}": v for (k, n), v in sorted(self.boundary_assignment.items())},
        }, indent=2)


def build_layout(distance: int) -> SurfaceCodeLayout:
    """Rotated surface code of odd ``distance`` with a 3x3-style labelling.

    X-type weight-2 plaquettes sit on the north/south edges and Z-type ones on
    the west/east edges, so X-type ancillas talk to the east/west boundaries.
    """
    if int(distance) != distance or distance < 3 or distance % 2 == 0:
        raise ValueError("distance must be an odd integer >= 3")
    d = int(distance)
    data_coords = tuple((r, c) for r in range(d) for c in range(d))

    def data_at(r, c):
        return r * d + c if 0 <= r < d and 0 <= c < d else None

    plaquettes = {"X": [], "Z": []}
    for r in range(-1, d):
        for c in range(-1, d):
            kind = "X" if (r + c) % 2 == 0 else "Z"
            corners = [data_at(r + dr, c + dc) for dr in (0, 1) for dc in (0, 1)]
            n = sum(q is not None for q in corners)
            if n == 4:
                plaquettes[kind].append((r, c))
            elif n == 2:
                top_or_bottom = r in (-1, d - 1) and 0 <= c < d - 1
                left_or_right = c in (-1, d - 1) and 0 <= r < d - 1
                if (kind == "X" and top_or_bottom) or (kind == "Z" and left_or_right):
                    plaquettes[kind].append((r, c))
    plaquettes["X"].sort()
    plaquettes["Z"].sort(key=lambda rc: (rc[1], rc[0]))

    ancillas = []
    q = d * d
    for kind, order in (("X", X_ORDER), ("Z", Z_ORDER)):
        for i, (r, c) in enumerate(plaquettes[kind]):
            slots = tuple(data_at(r + dr, c + dc) for dr, dc in order)
            ancillas.append(Ancilla(f"{kind}{i + 1}", kind, q, (r + 0.5, c + 0.5), slots))
            q += 1

    boundary = {}
    for kind in ("X", "Z"):
        members = defaultdict(int)
        for a in ancillas:
            if a.kind == kind:
                for dq in a.support:
                    members[dq] += 1
        for a in ancillas:
            if a.kind != kind:
                continue
            lonely = [dq for dq in a.support if members[dq] == 1]
            for dq in lonely:
                r, c = data_coords[dq]
                if kind == "X":
                    label = "West" if c == 0 else "East" if c == d - 1 else None
                else:
                    label = "North" if r == 0 else "South" if r == d - 1 else None
                if label is not None:
                    boundary[(kind, a.name)] = label
    return SurfaceCodeLayout(
        distance=d,
        data_coords=data_coords,
        ancillas=tuple(ancillas),
        logical_x_support=tuple(r * d for r in range(d)),
        logical_z_support=tuple(range(d)),
        boundary_assignment=boundary,
    )


# ---------------------------------------------------------------------------
# Schedule


@dataclass(frozen=True)
class FaultLocation:
    index: int
    kind: str  # "1q", "2q", "idle" or "ro"
    qubits: Tuple[int, ...]
    half: int
    cycle: int
    layer: int
    duration: float = 0.0


@dataclass(frozen=True)
class LayerDurations:
    """Durations (microseconds) of the one-qubit and CZ layers."""
    t_1q: float = 0.05
    t_cz: float = 0.1


class CircuitSchedule:
    """Gate list of the pipelined memory experiment with noise markers."""

    def __init__(self, layout: SurfaceCodeLayout, cycles: int, prepared_basis: str = "Z",
                 durations: LayerDurations = LayerDurations()):
        if int(cycles) != cycles or cycles < 1:
            raise ValueError("cycles must be a positive integer")
        if prepared_basis not in ("X", "Z"):
            raise ValueError("prepared_basis must be 'X' or 'Z'")
        self.layout = layout
        self.cycles = int(cycles)
        self.prepared_basis = prepared_basis
        self.other_basis = "X" if prepared_basis == "Z" else "Z"
        self.durations = durations
        self._build()

    # -- construction -----------------------------------------------------
    def _build(self):
        lay = self.layout
        N = self.cycles
        P, O = self.prepared_basis, self.other_basis
        ops: List[Tuple[int, int, int, int]] = []
        locations: List[FaultLocation] = []
        records: List[Tuple[int, str]] = []
        layers: List[List[int]] = []
        ancilla_records: Dict[str, List[int]] = defaultdict(list)

        def noise(kind, qubits, half, cycle, layer, duration=0.0):
            loc = FaultLocation(len(locations), kind, tuple(qubits), half, cycle, layer, duration)
            locations.append(loc)
            ops.append((OP_NOISE, qubits[0], qubits[-1], loc.index))

        def record(code, q, label):
            ops.append((code, q, q, len(records)))
            records.append((q, label))
            return len(records) - 1

        data = list(range(lay.n_data))
        halves = [P] + [O, P] * (N - 1)
        self.half_kinds = tuple(halves)
        t1, tcz = self.durations.t_1q, self.durations.t_cz
        for h, K in enumerate(halves):
            cycle = h // 2 + 1 if h % 2 == 0 else (h + 1) // 2 + 1
            anc = lay.ancillas_of(K)
            for layer in range(6):
                start = len(ops)
                if layer in (0, 5):
                    for a in anc:
                        ops.append((OP_H, a.qubit, a.qubit, -1))
                        noise("1q", (a.qubit,), h, cycle, layer)
                    for dq in data:
                        if K == "X":
                            ops.append((OP_H, dq, dq, -1))
                            noise("1q", (dq,), h, cycle, layer)
                        else:
                            noise("idle", (dq,), h, cycle, layer, t1)
                else:
                    busy = set()
                    for a in anc:
                        dq = a.slots[layer - 1]
                        if dq is None:
                            noise("idle", (a.qubit,), h, cycle, layer, tcz)
                        else:
                            ops.append((OP_CZ, a.qubit, dq, -1))
                            noise("2q", (a.qubit, dq), h, cycle, layer)
                            busy.add(dq)
                    for dq in data:
                        if dq not in busy:
                            noise("idle", (dq,), h, cycle, layer, tcz)
                layers.append(list(range(start, len(ops))))
            start = len(ops)
            for a in anc:
                noise("ro", (a.qubit,), h, cycle, 6)
                ancilla_records[a.name].append(record(OP_M, a.qubit, f"{a.name}@{h}"))
            layers.append(list(range(start, len(ops))))

        # Logical frame snapshot before the final basis change.
        start = len(ops)
        snap_x = [record(OP_RZ, q, "snapX") for q in lay.logical_x_support]
        snap_z = [record(OP_RX, q, "snapZ") for q in lay.logical_z_support]
        final_half = len(halves)
        if P == "X":
            for dq in data:
                ops.append((OP_H, dq, dq, -1))
                noise("1q", (dq,), final_half, N + 1, 0)
        data_rec = []
        for dq in data:
            noise("ro", (dq,), final_half, N + 1, 6)
            data_rec.append(record(OP_M, dq, f"D{dq + 1}"))
        layers.append(list(range(start, len(ops))))

        arr = np.array(ops, dtype=np.int64).reshape(-1, 4)
        self.op_code = arr[:, 0].astype(np.int64)
        self.op_q0 = arr[:, 1].astype(np.int64)
        self.op_q1 = arr[:, 2].astype(np.int64)
        self.op_arg = arr[:, 3].astype(np.int64)
        self.layers = layers
        self.locations = tuple(locations)
        self.records = tuple(records)
        self.n_records = len(records)

        # Detectors.
        dets: List[Tuple[DetectorCoord, Tuple[int, ...]]] = []
        for a in lay.ancillas_of(P):
            r = ancilla_records[a.name]
            for k in range(1, N + 1):
                rule = tuple(r[j - 1] for j in (k - 2, k) if j >= 1)
                dets.append((DetectorCoord(a.name, 2 * k), rule))
            final = [r[j - 1] for j in (N - 1, N) if j >= 1] + [data_rec[dq] for dq in a.support]
            dets.append((DetectorCoord(a.name, 2 * N + 2), tuple(final)))
        for a in lay.ancillas_of(O):
            r = ancilla_records[a.name]  # round k of this ancilla is r[k - 1], k = 1..N-1
            for k in range(2, N):
                rule = tuple(r[j - 1] for j in (k - 2, k) if j >= 1)
                dets.append((DetectorCoord(a.name, 2 * k + 1), rule))
        dets.sort(key=lambda item: (item[0].tick, _ancilla_key(item[0].ancilla)))
        self.detector_list = tuple(d for d, _ in dets)
        self.detector_rule = tuple(r for _, r in dets)
        self.detector_index = {d: i for i, d in enumerate(self.detector_list)}
        lx = tuple(data_rec[q] for q in lay.logical_x_support)
        lz = tuple(data_rec[q] for q in lay.logical_z_support)
        if P == "Z":
            self.logical_rule = {"x": tuple(snap_x), "z": lz}
        else:
            self.logical_rule = {"x": lx, "z": tuple(snap_z)}
        self._rule_matrix = None

    # -- helpers ---------------------------------------------------------
    @property
    def n_detectors(self) -> int:
        return len(self.detector_list)

    @property
    def ticks(self) -> List[List[Tuple[str, Tuple[str, ...], int]]]:
        """Human-readable layers: (operation, qubit names, fault-location id)."""
        names = {OP_H: "H", OP_CZ: "CZ", OP_M: "M", OP_NOISE: "NOISE", OP_RX: "REC_X", OP_RZ: "REC_Z"}
        out = []
        for layer in self.layers:
            items = []
            for i in layer:
                c, a, b, arg = (int(self.op_code[i]), int(self.op_q0[i]),
                                int(self.op_q1[i]), int(self.op_arg[i]))
                qs = (a, b) if c == OP_CZ or (c == OP_NOISE and a != b) else (a,)
                items.append((names[c], tuple(self.layout.qubit_name(q) for q in qs),
                              arg if c == OP_NOISE else -1))
            out.append(items)
        return out

    def kind_of(self, ancilla: str) -> str:
        return ancilla[0]

    def tick_range(self, kind: str) -> Tuple[int, int]:
        ticks = [d.tick for d in self.detector_list if d.ancilla[0] == kind]
        return (min(ticks), max(ticks)) if ticks else (0, -1)

    def cycle_of_tick(self, tick: int) -> int:
        return tick // 2

    @staticmethod
    def detector_cycle(tick: int) -> int:
        """Cycle a detector belongs to (the final data readout counts as cycle N + 1)."""
        return (tick + 1) // 2

    def is_bulk(self, detectors: Iterable[DetectorCoord]) -> bool:
        """True when no detector lies in the first or the last cycle."""
        return all(2 <= self.detector_cycle(d.tick) <= self.cycles - 1 for d in detectors)

    def rule_matrix(self) -> np.ndarray:
        """(n_detectors + 2, n_records) 0/1 matrix; the last rows are X_L, Z_L."""
        if self._rule_matrix is None:
            M = np.zeros((self.n_detectors + 2, self.n_records), dtype=np.uint8)
            for i, rule in enumerate(self.detector_rule):
                for r in rule:
                    M[i, r] ^= 1
            for r in self.logical_rule["x"]:
                M[-2, r] ^= 1
            for r in self.logical_rule["z"]:
                M[-1, r] ^= 1
            self._rule_matrix = M
        return self._rule_matrix

    def evaluate(self, rec: np.ndarray) -> np.ndarray:
        """Turn packed record rows into packed detector rows plus two logical rows."""
        out = np.zeros((self.n_detectors + 2, rec.shape[1]), dtype=np.uint64)
        rules = list(self.detector_rule) + [self.logical_rule["x"], self.logical_rule["z"]]
        for i, rule in enumerate(rules):
            for r in rule:
                out[i] ^= rec[r]
        return out

    def to_json(self) -> str:
        return json.dumps({
            "cycles": self.cycles,
            "prepared_basis": self.prepared_basis,
            "layers": [[list(op) for op in layer] for layer in self.ticks],
            "detectors": [[d.ancilla, d.tick] for d in self.detector_list],
            "detector_rule": [list(r) for r in self.detector_rule],
        })


def build_schedule(layout: SurfaceCodeLayout, cycles: int, prepared_basis: str = "Z",
                   durations: LayerDurations = LayerDurations()) -> CircuitSchedule:
    return CircuitSchedule(layout, cycles, prepared_basis, durations)


# ---------------------------------------------------------------------------
# Fault propagation


def _fault_events(schedule: CircuitSchedule, faults: Sequence[PauliFault]):
    n_loc = len(schedule.locations)
    items = []
    for k, f in enumerate(faults):
        if not 0 <= f.location < n_loc:
            raise ValueError(f"invalid fault location {f.location}")
        loc = schedule.locations[f.location]
        if len(f.pauli) == 2 and len(loc.qubits) != 2:
            raise ValueError("two-qubit Pauli on a single-qubit location")
        letters = f.pauli if len(f.pauli) == len(loc.qubits) else f.pauli + "I" * (len(loc.qubits) - 1)
        if len(letters) != len(loc.qubits):
            raise ValueError("Pauli weight does not match the location")
        for q, p in zip(loc.qubits, letters):
            x, z = pauli_bits(p)
            if x or z:
                bit = np.uint64(1) << np.uint64(k % 64)
                items.append((f.location, q, k // 64, bit if x else np.uint64(0), bit if z else np.uint64(0)))
    items.sort(key=lambda t: t[0])
    ev_loc = np.array([t[0] for t in items], dtype=np.int64)
    ev_start = np.searchsorted(ev_loc, np.arange(n_loc + 1)).astype(np.int64)
    ev_q = np.array([t[1] for t in items], dtype=np.int64)
    ev_w = np.array([t[2] for t in items], dtype=np.int64)
    ev_x = np.array([t[3] for t in items], dtype=np.uint64)
    ev_z = np.array([t[4] for t in items], dtype=np.uint64)
    return ev_start, ev_q, ev_w, ev_x, ev_z


def run_frames(schedule: CircuitSchedule, events, n_words: int) -> np.ndarray:
    """Propagate sampled frame events; returns packed detector + logical rows."""
    ev_start, ev_q, ev_w, ev_x, ev_z = events
    rec = kernels.frame_propagate(schedule.op_code, schedule.op_q0, schedule.op_q1, schedule.op_arg,
                                  ev_start, ev_q, ev_w, ev_x, ev_z,
                                  schedule.layout.n_qubits, n_words, schedule.n_records)
    return schedule.evaluate(rec)


def propagate_faults(schedule: CircuitSchedule, faults: Sequence[PauliFault]) -> List[ErrorSignature]:
    """Signatures of many independent faults, one frame lane per fault."""
    if not faults:
        return []
    n_words = (len(faults) + 63) // 64
    out = run_frames(schedule, _fault_events(schedule, faults), n_words)
    bits = np.unpackbits(out.view(np.uint8).reshape(out.shape[0], -1), axis=1, bitorder="little")
    bits = bits[:, :len(faults)]
    dl = schedule.detector_list
    sigs = []
    for k in range(len(faults)):
        col = bits[:, k]
        idx = np.flatnonzero(col[:-2])
        sigs.append(ErrorSignature(tuple(dl[i] for i in idx), bool(col[-2]), bool(col[-1])))
    return sigs


def propagate_fault(schedule: CircuitSchedule, fault: PauliFault) -> ErrorSignature:
    return propagate_faults(schedule, [fault])[0]


def location_paulis(loc: FaultLocation) -> Tuple[str, ...]:
    return TWO_QUBIT_PAULIS if loc.kind == "2q" else ("X", "Y", "Z")


def all_faults(schedule: CircuitSchedule, locations: Optional[Iterable[FaultLocation]] = None) -> List[PauliFault]:
    locs = schedule.locations if locations is None else locations
    return [PauliFault(loc.index, p) for loc in locs for p in location_paulis(loc)]


# ---------------------------------------------------------------------------
# Catalog


def canonical_shift(detectors: Sequence[DetectorCoord]) -> int:
    """Even shift that moves the earliest tick to 0 or 1."""
    t0 = min(d.tick for d in detectors)
    return -(t0 - (t0 % 2))


def canonicalize(sig: ErrorSignature) -> ErrorSignature:
    if not sig.detectors:
        return sig
    return sig.shifted(canonical_shift(sig.detectors))


def canonical_key(detectors: Sequence[DetectorCoord]) -> Tuple[DetectorCoord, ...]:
    if not detectors:
        return ()
    dt = canonical_shift(detectors)
    return canonical_detectors((d.ancilla, d.tick + dt) for d in detectors)


@dataclass
class CatalogEntry:
    signature: ErrorSignature
    faults: List[PauliFault]
    nu: int
    qubit_kinds: set = field(default_factory=set)

    @property
    def multiplicity(self) -> int:
        return len(self.faults)


class FaultCatalog:
    """Signatures of all single faults in one bulk cycle, time-canonicalised."""

    def __init__(self, schedule: CircuitSchedule, reference: CircuitSchedule, cycle: int,
                 entries: Dict[ErrorSignature, CatalogEntry]):
        self.schedule = schedule
        self.reference = reference
        self.cycle = cycle
        self.entries = entries
        self._by_det: Dict[Tuple[DetectorCoord, ...], List[CatalogEntry]] = defaultdict(list)
        for e in entries.values():
            self._by_det[e.signature.detectors].append(e)
        self._class_cache: Dict[Tuple[DetectorCoord, ...], ErrorClass] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries.values())

    def lookup(self, detectors: Sequence[DetectorCoord]) -> List[CatalogEntry]:
        """Entries whose signature is a time-translate of ``detectors``."""
        return self._by_det.get(canonical_key(detectors), [])

    def detector_keys(self) -> List[Tuple[DetectorCoord, ...]]:
        return sorted(self._by_det, key=lambda k: (len(k), [detector_sort_key(d) for d in k]))

    def total_nu(self) -> int:
        return sum(e.nu for e in self.entries.values())


def _bulk_reference(schedule: CircuitSchedule) -> Tuple[CircuitSchedule, int]:
    if schedule.cycles >= 7:
        return schedule, schedule.cycles // 2 + 1
    ref = build_schedule(schedule.layout, 7, schedule.prepared_basis, schedule.durations)
    return ref, 4


def enumerate_fault_catalog(schedule: CircuitSchedule) -> FaultCatalog:
    """All single faults of one bulk cycle (both halves) and their signatures.

    ``nu`` counts the two-qubit Pauli/CZ combinations behind a signature;
    faults with equal detectors and equal logical flips share one entry.
    """
    ref, cycle = _bulk_reference(schedule)
    locs = [loc for loc in ref.locations if loc.cycle == cycle]
    faults = all_faults(ref, locs)
    sigs = propagate_faults(ref, faults)
    n_data = ref.layout.n_data
    entries: Dict[ErrorSignature, CatalogEntry] = {}
    for f, s in zip(faults, sigs):
        if not s.detectors:
            continue
        key = canonicalize(s)
        e = entries.get(key)
        if e is None:
            e = entries[key] = CatalogEntry(key, [], 0)
        e.faults.append(f)
        loc = ref.locations[f.location]
        if loc.kind == "2q":
            e.nu += 1
        e.qubit_kinds.add(_fault_origin(ref, f, n_data))
    return FaultCatalog(schedule, ref, cycle, entries)


def _fault_origin(schedule: CircuitSchedule, fault: PauliFault, n_data: int) -> str:
    """Coarse label of the physical fault: data/ancilla single-qubit or genuine two-qubit."""
    loc = schedule.locations[fault.location]
    letters = fault.pauli if len(fault.pauli) == len(loc.qubits) else fault.pauli
    active = [(q, p) for q, p in zip(loc.qubits, letters) if p != "I"]
    if len(active) == 2:
        return "2q:" + "".join(p for _, p in active)
    q, p = active[0]
    return ("data:" if q < n_data else "anc:") + p


def absolute_fault_signatures(schedule: CircuitSchedule) -> Tuple[List[PauliFault], List[ErrorSignature]]:
    """Every single fault of the whole schedule with its absolute signature."""
    faults = all_faults(schedule)
    return faults, propagate_faults(schedule, faults)


# ---------------------------------------------------------------------------
# Classification


def _part_shape(layout: SurfaceCodeLayout, part: Sequence[DetectorCoord]) -> str:
    if not part:
        return "none"
    if len(part) == 1:
        return "b"
    if len(part) > 2:
        return "many"
    a, b = part
    if a.ancilla == b.ancilla:
        dt = abs(a.tick - b.tick)
        return {2: "t", 4: "tp"}.get(dt, "long")
    if not layout.adjacent(a.ancilla, b.ancilla):
        return "h"
    return "s" if a.tick == b.tick else "st"


def _geometric_class(layout: SurfaceCodeLayout, detectors: Sequence[DetectorCoord]) -> Optional[ErrorClass]:
    xs = [d for d in detectors if d.ancilla[0] == "X"]
    zs = [d for d in detectors if d.ancilla[0] == "Z"]
    if not xs or not zs:
        shape = _part_shape(layout, xs or zs)
        return {"b": ErrorClass.B, "t": ErrorClass.T, "tp": ErrorClass.Tprime, "s": ErrorClass.S_XZ,
                "st": ErrorClass.ST_X, "h": ErrorClass.H_X}.get(shape)
    sx, sz = _part_shape(layout, xs), _part_shape(layout, zs)
    if "many" in (sx, sz) or "long" in (sx, sz) or "t" in (sx, sz) or "tp" in (sx, sz):
        return None
    if "h" in (sx, sz):
        return ErrorClass.H_Y
    spread = max(d.tick for d in detectors) - min(d.tick for d in detectors)
    if "st" in (sx, sz) or spread > 1:
        return ErrorClass.ST_Y
    return ErrorClass.S_Y


def _entry_class(layout: SurfaceCodeLayout, entries: List[CatalogEntry]) -> ErrorClass:
    dets = entries[0].signature.detectors
    origins = set().union(*(e.qubit_kinds for e in entries))
    single = {o for o in origins if not o.startswith("2q:")}
    if len(dets) == 1:
        return ErrorClass.B
    if not single:
        letters = {o[3:] for o in origins}
        if "ZZ" in letters:
            return ErrorClass.M_ZZ
        if letters & {"XX", "XY", "YX", "YY"}:
            return ErrorClass.M_XY
    geo = _geometric_class(layout, dets)
    if geo in (ErrorClass.T, ErrorClass.Tprime, ErrorClass.B):
        return geo
    data_faults = {o for o in single if o.startswith("data:")}
    if data_faults:
        if geo is not None:
            return geo
    if single:
        # Ancilla faults that spread onto data qubits are hooks.
        kinds = {d.ancilla[0] for d in dets}
        if geo in (ErrorClass.S_XZ, ErrorClass.S_Y) and not data_faults:
            return geo
        return ErrorClass.H_Y if len(kinds) == 2 else ErrorClass.H_X
    return geo if geo is not None else ErrorClass.Unclassified


def matches_c_template(layout: SurfaceCodeLayout, detectors: Sequence[DetectorCoord],
                       max_time_span: int = 9, max_nbr_sep: int = 2) -> bool:
    if not detectors:
        return False
    ticks = [d.tick for d in detectors]
    span = max(ticks) - min(ticks)
    names = {d.ancilla for d in detectors}
    if len(names) == 1 and span <= 2 * (max_time_span - 1):
        return True
    if span > 2 * max_nbr_sep:
        return False
    for dq in range(layout.n_data):
        nbrs = {a.name for a in layout.ancillas if dq in a.support}
        if names <= nbrs:
            return True
    return False


def classify_signature(signature, layout: SurfaceCodeLayout, schedule: CircuitSchedule,
                       catalog: Optional[FaultCatalog] = None) -> ErrorClass:
    """Class label of a signature (absolute or canonical ticks)."""
    dets = signature.detectors if isinstance(signature, ErrorSignature) else canonical_detectors(signature)
    if not dets:
        return ErrorClass.Unclassified
    if catalog is None:
        catalog = _default_catalog(schedule)
    key = canonical_key(dets)
    cached = catalog._class_cache.get(key)
    if cached is not None:
        return cached
    if len(dets) == 1:
        cls = ErrorClass.B
    else:
        geo = _geometric_class(layout, dets)
        entries = catalog.lookup(dets)
        if geo in (ErrorClass.T, ErrorClass.Tprime):
            cls = geo
        elif entries:
            cls = _entry_class(layout, entries)
        elif matches_c_template(layout, dets):
            cls = ErrorClass.C
        else:
            cls = ErrorClass.Unclassified
    catalog._class_cache[key] = cls
    return cls


_CATALOG_CACHE: Dict[Tuple[int, str, LayerDurations], FaultCatalog] = {}


def _default_catalog(schedule: CircuitSchedule) -> FaultCatalog:
    key = (schedule.layout.distance, schedule.prepared_basis, schedule.durations)
    cat = _CATALOG_CACHE.get(key)
    if cat is None:
        cat = _CATALOG_CACHE[key] = enumerate_fault_catalog(schedule)
    return cat


# ---------------------------------------------------------------------------
# C-class templates


def generate_c_class(layout: SurfaceCodeLayout, schedule: CircuitSchedule, max_time_span: int = 9,
                     max_nbr_sep: int = 2, catalog: Optional[FaultCatalog] = None,
                     max_window: int = 16) -> List[ErrorSignature]:
    """Canonical subsets of the two leakage-like templates not produced by single faults.

    (a) any subset of one ancilla's detectors within ``max_time_span`` cycles;
    (b) any subset of the detectors of the ancillas around one data qubit within
    ``max_nbr_sep`` cycles.
    """
    if max_time_span < 1 or max_nbr_sep < 0:
        raise ValueError("spans must be positive")
    if catalog is None:
        catalog = _default_catalog(schedule)
    windows = c_class_windows(layout, schedule, max_time_span, max_nbr_sep, max_window)
    seen = set()
    out = []
    for win in windows:
        # Only subsets that contain an earliest-tick detector need keeping; the
        # rest are translates covered by a later window.
        k = len(win)
        for mask in range(1, 1 << k):
            subset = [win[i] for i in range(k) if (mask >> i) & 1]
            key = canonical_key(subset)
            if key in seen:
                continue
            seen.add(key)
            if len(key) == 1 or catalog.lookup(key) or _geometric_class(layout, key) is ErrorClass.Tprime:
                continue
            out.append(ErrorSignature(key))
    out.sort(key=lambda s: (s.weight, [detector_sort_key(d) for d in s.detectors]))
    return out


def c_class_windows(layout: SurfaceCodeLayout, schedule: CircuitSchedule, max_time_span: int = 9,
                    max_nbr_sep: int = 2, max_window: int = 16,
                    absolute: bool = False) -> List[Tuple[DetectorCoord, ...]]:
    """Detector windows of the two templates.

    With ``absolute`` every placement inside the schedule is returned, else one
    placement per tick parity in the bulk of a long reference schedule.
    """
    if absolute:
        ref = schedule
    else:
        ref = build_schedule(schedule.layout, 2 * max_time_span + 2 * max_nbr_sep + 6,
                             schedule.prepared_basis, schedule.durations)
    by_anc: Dict[str, List[int]] = defaultdict(list)
    for d in ref.detector_list:
        by_anc[d.ancilla].append(d.tick)
    wins = []
    span_a = 2 * (max_time_span - 1)
    for a in layout.ancillas:
        ticks = sorted(by_anc.get(a.name, []))
        starts = ticks if absolute else ticks[2:3]
        for t0 in starts:
            win = tuple(DetectorCoord(a.name, t) for t in ticks if t0 <= t <= t0 + span_a)
            if len(win) > max_window:
                raise MemoryError("time span too large for the subset budget")
            wins.append(win)
    span_b = 2 * max_nbr_sep
    all_ticks = sorted({d.tick for d in ref.detector_list})
    for dq in range(layout.n_data):
        nbrs = [a.name for a in layout.ancillas if dq in a.support]
        dets = [d for d in ref.detector_list if d.ancilla in nbrs]
        if absolute:
            starts = all_ticks
        else:
            mid = all_ticks[len(all_ticks) // 2]
            starts = [mid - (mid % 2), mid - (mid % 2) + 1]
        for t0 in starts:
            win = tuple(d for d in dets if t0 <= d.tick <= t0 + span_b)
            if not win or min(d.tick for d in win) != t0:
                continue
            if len(win) > max_window:
                raise MemoryError("neighbour window too large for the subset budget")
            wins.append(win)
    # Absolute windows contained in another window add nothing.
    uniq = sorted(set(wins), key=lambda w: (-len(w), [detector_sort_key(d) for d in w]))
    kept: List[Tuple[DetectorCoord, ...]] = []
    kept_sets: List[frozenset] = []
    for w in uniq:
        s = frozenset(w)
        if any(s <= k for k in kept_sets):
            continue
        kept.append(w)
        kept_sets.append(s)
    return kept


def instantiate(detectors: Sequence[DetectorCoord], schedule: CircuitSchedule) -> List[Tuple[DetectorCoord, ...]]:
    """All even time-translates of a relative signature that exist in ``schedule``."""
    if not detectors:
        return []
    idx = schedule.detector_index
    ticks = [d.tick for d in detectors]
    lo, hi = min(d.tick for d in schedule.detector_list), max(d.tick for d in schedule.detector_list)
    out = []
    t0 = min(ticks)
    for shift in range(lo - t0 - ((lo - t0) % 2), hi - t0 + 1, 2):
        cand = tuple(DetectorCoord(d.ancilla, d.tick + shift) for d in detectors)
        if all(c in idx for c in cand):
            out.append(cand)
    return out


def subsets(items: Sequence, min_size: int = 1):
    for r in range(min_size, len(items) + 1):
        yield from itertools.combinations(items, r)
