"""Decoding graphs of one stabilizer type and their matching weights.

An :class:`AuxGraph` has one node per detector of the chosen kind plus two
boundary pseudo-nodes. Edge probabilities come from the single-kind
projections of the model's signatures. Matching weights between all nodes
are ``-ln((1 - A)^-1 - 1)`` (a sum over all paths that avoid the boundaries),
and the logical parity of a node pair is the parity of its most likely path.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .code_model import (CircuitSchedule, DetectorCoord, absolute_fault_signatures, canonical_key,
                         detector_sort_key)

BOUNDARY_NODES = {"X": ("BE", "BW"), "Z": ("BN", "BS")}
_LABEL_TO_NODE = {"East": "BE", "West": "BW", "North": "BN", "South": "BS"}
KIND_LOGICAL = {"X": 0, "Z": 1}  # column of the truth / flip pair a graph predicts


def combine(p: float, q: float) -> float:
    """Probability that exactly one of two independent events happens."""
    return p * (1.0 - q) + q * (1.0 - p)


@dataclass
class EdgeSource:
    signature: Tuple[DetectorCoord, ...]
    probability: float
    flips: Tuple[bool, bool]


@dataclass
class AuxGraph:
    kind: str
    nodes: Tuple[DetectorCoord, ...]
    boundaries: Tuple[str, str]
    dm_max: int
    edges: Dict[Tuple[int, int], float] = field(default_factory=dict)
    parity: Dict[Tuple[int, int], int] = field(default_factory=dict)
    sources: Dict[Tuple[int, int], List[EdgeSource]] = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def size(self) -> int:
        return len(self.nodes) + 2

    @property
    def index(self) -> Dict[DetectorCoord, int]:
        cached = self.__dict__.get("_index")
        if cached is None:
            cached = self.__dict__["_index"] = {d: i for i, d in enumerate(self.nodes)}
        return cached

    def node_name(self, i: int) -> str:
        if i < self.n_nodes:
            d = self.nodes[i]
            return f"{d.ancilla}@{d.tick}"
        return self.boundaries[i - self.n_nodes]

    def boundary_index(self, label: str) -> int:
        return self.n_nodes + self.boundaries.index(label)

    def adjacency(self) -> np.ndarray:
        """Matrix A: symmetric between detectors, boundary columns only (boundary rows stay zero)."""
        n = self.n_nodes
        A = np.zeros((n + 2, n + 2))
        for (i, j), p in self.edges.items():
            if j >= n:
                A[i, j] = p
            else:
                A[i, j] = A[j, i] = p
        return A

    def edge_key(self, a, b) -> Tuple[int, int]:
        return (a, b) if a < b else (b, a)


def _node_cycle(d: DetectorCoord) -> int:
    return CircuitSchedule.detector_cycle(d.tick)


@lru_cache(maxsize=8)
def _fault_signature_table(schedule: CircuitSchedule) -> Dict[Tuple[DetectorCoord, ...], Tuple[bool, bool]]:
    """Distinct single-fault signatures of ``schedule`` with their (majority) logical flips."""
    _, sigs = absolute_fault_signatures(schedule)
    votes: Dict[Tuple[DetectorCoord, ...], List[int]] = {}
    for s in sigs:
        if not s.detectors:
            continue
        v = votes.setdefault(s.detectors, [0, 0, 0])
        v[0] += 1
        v[1] += int(s.logical_flip_x)
        v[2] += int(s.logical_flip_z)
    return {k: (2 * v[1] > v[0], 2 * v[2] > v[0]) for k, v in votes.items()}


def fault_signatures(schedule: CircuitSchedule) -> Dict[Tuple[DetectorCoord, ...], Tuple[bool, bool]]:
    return _fault_signature_table(schedule)


def model_probability(model, key: Tuple[DetectorCoord, ...]) -> float:
    """Probability of an absolute signature under a (possibly cycle-averaged) model; 0 if absent."""
    if model is None:
        return 0.0
    if isinstance(model, dict):
        return float(model.get(key, 0.0))
    averaged = bool(model.metadata.get("cycle_averaged"))
    k = canonical_key(key) if averaged else key
    if k in model.entries:
        p = model.entries[k].p
        return float(p) if math.isfinite(p) else 0.0
    return 0.0


def build_aux_graph(model, kind: str, schedule: CircuitSchedule, dm_max: int = 2) -> AuxGraph:
    """Edges from the single-kind projections of every single-fault signature of ``schedule``.

    ``model`` is an :class:`InferredModel` (absolute or cycle-averaged) or a
    plain ``{signature: p}`` dict. Projections with more than two detectors
    are dropped, negative probabilities clip to zero, and signatures sharing a
    projection combine as independent events.
    """
    if kind not in BOUNDARY_NODES:
        raise ValueError("kind must be 'X' or 'Z'")
    if dm_max < 1:
        raise ValueError("dm_max must be >= 1")
    if dm_max > schedule.cycles + 1:
        raise ValueError("dm_max exceeds the number of cycles in the schedule")
    nodes = tuple(d for d in schedule.detector_list if d.ancilla[0] == kind)
    g = AuxGraph(kind, nodes, BOUNDARY_NODES[kind], dm_max)
    idx = g.index
    layout = schedule.layout
    for key, flips in sorted(fault_signatures(schedule).items(),
                             key=lambda kv: [(d.tick, detector_sort_key(d)) for d in kv[0]]):
        proj = [d for d in key if d.ancilla[0] == kind]
        if not proj or len(proj) > 2:
            continue
        p = model_probability(model, key)
        if not p > 0.0:
            continue
        p = min(p, 0.5 - 1e-12)
        if len(proj) == 2:
            a, b = proj
            if abs(_node_cycle(a) - _node_cycle(b)) > dm_max:
                continue
            e = g.edge_key(idx[a], idx[b])
        else:
            label = _LABEL_TO_NODE[layout.boundary_of(proj[0].ancilla)]
            e = (idx[proj[0]], g.boundary_index(label))
        g.edges[e] = combine(g.edges.get(e, 0.0), p)
        g.sources.setdefault(e, []).append(EdgeSource(key, p, flips))
    assign_logical_parities(g)
    return g


def assign_logical_parities(graph: AuxGraph) -> AuxGraph:
    """Parity of each edge = logical flip of its most likely source signature."""
    col = KIND_LOGICAL[graph.kind]
    for e, srcs in graph.sources.items():
        best = max(srcs, key=lambda s: (s.probability, [(-d.tick, d.ancilla) for d in s.signature]))
        graph.parity[e] = int(best.flips[col])
    return graph


# ---------------------------------------------------------------------------
# Weights


@dataclass
class WeightMatrix:
    w: np.ndarray  # (n + 2, n + 2); boundary entries mirrored for symmetry

    def __getitem__(self, ij):
        return self.w[ij]


def compute_weights(graph: AuxGraph) -> WeightMatrix:
    """Element-wise ``-ln((1 - A)^-1 - 1)``; unreachable pairs get +inf."""
    A = graph.adjacency()
    return WeightMatrix(weights_from_adjacency(A, graph.n_nodes))


def weights_from_adjacency(A: np.ndarray, n_real: Optional[int] = None) -> np.ndarray:
    m = A.shape[0]
    if n_real is None:
        n_real = m
    if m == 0:
        return np.zeros((0, 0))
    rho = float(np.max(np.abs(np.linalg.eigvals(A[:n_real, :n_real])))) if n_real else 0.0
    if not rho < 1.0:
        raise np.linalg.LinAlgError(f"path sum diverges (spectral radius {rho:.3g})")
    inv = np.linalg.solve(np.eye(m) - A, np.eye(m))
    S = inv - np.eye(m)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(S > 0, -np.log(np.where(S > 0, S, 1.0)), np.inf)
    # mirror boundary columns onto the boundary rows
    w[n_real:, :n_real] = w[:n_real, n_real:].T
    w[n_real:, n_real:] = np.inf
    return w


def path_sum_bruteforce(A: np.ndarray, max_len: int = 9) -> Tuple[np.ndarray, np.ndarray]:
    """Sum over walks of length 1..max_len and an element-wise bound on the rest."""
    m = A.shape[0]
    total = np.zeros_like(A)
    power = np.eye(m)
    for _ in range(max_len):
        power = power @ A
        total += power
    norm = np.abs(A).sum(axis=1).max() if m else 0.0
    nxt = power @ A
    if norm < 1.0:
        tail = np.abs(nxt).sum(axis=1, keepdims=True) / (1.0 - norm) * np.ones((1, m))
    else:
        tail = np.full_like(A, np.inf)
    return total, tail


# ---------------------------------------------------------------------------
# Parities of most likely paths


@dataclass
class DecodingTables:
    """Everything the matcher needs for one kind."""
    graph: AuxGraph
    W: np.ndarray      # (n, n) detector-detector weights
    P: np.ndarray      # (n, n) uint8 parities
    Wb: np.ndarray     # (n,) weight to the better boundary
    Pb: np.ndarray     # (n,) parity of that boundary path
    Bsel: np.ndarray   # (n,) which boundary (0/1)
    direct: np.ndarray  # (n, n + 2) bool: most likely path is the single direct edge


def edge_arrays(graph: AuxGraph) -> Tuple[np.ndarray, np.ndarray]:
    """Dense ``-ln p`` edge weights (inf if absent) and edge parities over all nodes."""
    m = graph.size
    E = np.full((m, m), np.inf)
    Pe = np.zeros((m, m), dtype=np.uint8)
    for (i, j), p in graph.edges.items():
        if p > 0:
            E[i, j] = E[j, i] = -math.log(p)
            Pe[i, j] = Pe[j, i] = graph.parity.get((i, j), 0)
    return E, Pe


def path_parities(graph: AuxGraph, sources: Optional[Sequence[int]] = None) -> np.ndarray:
    """(S, n + 2, 2) shortest ``-ln p`` distances by parity; boundaries are not passable."""
    E, Pe = edge_arrays(graph)
    n = graph.n_nodes
    passable = np.zeros(graph.size, dtype=np.bool_)
    passable[:n] = True
    src = np.arange(n, dtype=np.int64) if sources is None else np.asarray(sources, dtype=np.int64)
    return kernels.parity_dijkstra(E, Pe, src, passable)


def build_tables(graph: AuxGraph, weights: Optional[WeightMatrix] = None) -> DecodingTables:
    if weights is None:
        weights = compute_weights(graph)
    n = graph.n_nodes
    w = weights.w
    dist = path_parities(graph)
    P = (dist[:, :n, 1] < dist[:, :n, 0]).astype(np.uint8)
    P = np.triu(P, 1)
    P = P + P.T  # use the i < j search for both orders
    wb = w[:n, n:n + 2]
    bsel = np.where(wb[:, 1] < wb[:, 0], 1, 0).astype(np.int64)
    Wb = wb[np.arange(n), bsel] if n else np.zeros(0)
    db = dist[np.arange(n), n + bsel] if n else np.zeros((0, 2))
    Pb = (db[:, 1] < db[:, 0]).astype(np.uint8) if n else np.zeros(0, np.uint8)
    E, _ = edge_arrays(graph)
    best = np.minimum(dist[:, :, 0], dist[:, :, 1]) if n else np.zeros((0, graph.size))
    direct = np.isfinite(E[:n]) & (E[:n] <= best + 1e-12)
    W = w[:n, :n].copy()
    np.fill_diagonal(W, np.inf)
    return DecodingTables(graph, W, P, Wb, Pb, bsel, direct)


# ---------------------------------------------------------------------------
# Syndrome graph


@dataclass
class SyndromeGraph:
    """Complete graph on defects plus one boundary copy per defect."""
    defects: Tuple[int, ...]           # aux-graph node ids
    weights: Dict[Tuple[int, int], float]
    parities: Dict[Tuple[int, int], int]
    boundary_choice: Tuple[int, ...]   # per defect, which boundary its copy stands for

    @property
    def n_vertices(self) -> int:
        return 2 * len(self.defects)


def build_syndrome_graph(graph: AuxGraph, weights: WeightMatrix, defects: Iterable,
                         tables: Optional[DecodingTables] = None) -> SyndromeGraph:
    """Vertices ``0..k-1`` are defects, ``k..2k-1`` their boundary copies."""
    idx = graph.index
    ids = sorted({d if isinstance(d, (int, np.integer)) else idx[DetectorCoord(*d)] for d in defects})
    if tables is None:
        tables = build_tables(graph, weights)
    k = len(ids)
    W: Dict[Tuple[int, int], float] = {}
    P: Dict[Tuple[int, int], int] = {}
    for a in range(k):
        for b in range(a + 1, k):
            W[(a, b)] = float(tables.W[ids[a], ids[b]])
            P[(a, b)] = int(tables.P[ids[a], ids[b]])
        W[(a, k + a)] = float(tables.Wb[ids[a]])
        P[(a, k + a)] = int(tables.Pb[ids[a]])
        for b in range(a + 1, k):
            W[(k + a, k + b)] = 0.0
            P[(k + a, k + b)] = 0
    return SyndromeGraph(tuple(ids), W, P, tuple(int(tables.Bsel[i]) for i in ids))


# ---------------------------------------------------------------------------
# Export


def to_dot(graph: AuxGraph) -> str:
    lines = [f"graph aux_{graph.kind} {{"]
    for i in range(graph.size):
        lines.append(f'  n{i} [label="{graph.node_name(i)}"];')
    for (i, j), p in sorted(graph.edges.items()):
        lines.append(f'  n{i} -- n{j} [p="{p:.6g}", parity={graph.parity.get((i, j), 0)}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_json(graph: AuxGraph, weights: Optional[WeightMatrix] = None) -> str:
    out = {
        "kind": graph.kind,
        "dm_max": graph.dm_max,
        "nodes": [graph.node_name(i) for i in range(graph.size)],
        "edges": [{"a": graph.node_name(i), "b": graph.node_name(j), "p": p,
                   "parity": graph.parity.get((i, j), 0)} for (i, j), p in sorted(graph.edges.items())],
    }
    if weights is not None:
        w = weights.w
        out["weights"] = [[None if not np.isfinite(v) else float(v) for v in row] for row in w]
    return json.dumps(out, indent=1)
