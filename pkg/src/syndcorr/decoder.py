"""Matching decoders: standard MWPM per stabilizer kind and correlated X/Z re-decoding.

Shots with at most ``max_k`` defects of a kind (16 by default, which covers
almost every d=3 shot) are matched by an exact subset dynamic program in
``kernels``; larger ones go through the blossom solver. Both are exact, so the
choice changes only the running time (and, for exactly tied optima, which
optimum is reported).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .blossom import MatchingError, matching_weight, min_weight_perfect_matching
from .code_model import CircuitSchedule, DetectorCoord
from .matching_graph import (KIND_LOGICAL, AuxGraph, DecodingTables, SyndromeGraph, build_aux_graph,
                             build_tables, combine,
                             fault_signatures, model_probability, weights_from_adjacency)

log = logging.getLogger(__name__)

KINDS = ("X", "Z")
P_MAX = 0.5 - 1e-12


@dataclass(frozen=True)
class Matching:
    """Pairs of syndrome-graph vertices; a vertex >= k is the boundary copy of vertex - k."""
    pairs: Tuple[Tuple[int, int], ...]
    weight: float
    parities: Tuple[int, ...]

    @property
    def parity(self) -> int:
        out = 0
        for p in self.parities:
            out ^= p
        return out


@dataclass
class DecodeResult:
    x_flip: bool
    z_flip: bool
    matchings: Dict[str, Matching] = field(default_factory=dict)
    diagnostics: Dict = field(default_factory=dict)

    @property
    def flips(self) -> Tuple[int, int]:
        return int(self.x_flip), int(self.z_flip)


def mwpm(graph: SyndromeGraph) -> Matching:
    """Exact minimum-weight perfect matching of a syndrome graph (blossom)."""
    n = graph.n_vertices
    if n % 2:
        raise MatchingError("syndrome graph needs an even number of vertices")
    pairs = tuple(sorted(min_weight_perfect_matching(n, graph.weights)))
    total = matching_weight(pairs, graph.weights)
    par = tuple(int(graph.parities.get(p, graph.parities.get((p[1], p[0]), 0))) for p in pairs)
    return Matching(pairs, total, par)


def _mates_to_matching(k: int, mates: np.ndarray, W, Wb, P, Pb) -> Matching:
    pairs = []
    for i in range(k):
        j = int(mates[i])
        if j < 0:
            pairs.append((i, k + i))
        elif i < j:
            pairs.append((i, j))
    ws, ps = [], []
    for i, j in pairs:
        if j >= k:
            ws.append(float(Wb[i]))
            ps.append(int(Pb[i]))
        else:
            ws.append(float(W[i, j]))
            ps.append(int(P[i, j]))
    return Matching(tuple(pairs), math.fsum(ws), tuple(ps))


def _matching_to_mates(k: int, m: Matching) -> np.ndarray:
    mates = np.full(k, -1, dtype=np.int64)
    for i, j in m.pairs:
        if i < k and j < k:
            mates[i], mates[j] = j, i
    return mates


def _blossom_local(w, wb, p, pb) -> Matching:
    k = len(wb)
    W, P = {}, {}
    for a in range(k):
        for b in range(a + 1, k):
            W[(a, b)] = float(w[a, b])
            P[(a, b)] = int(p[a, b])
            W[(k + a, k + b)] = 0.0
            P[(k + a, k + b)] = 0
        W[(a, k + a)] = float(wb[a])
        P[(a, k + a)] = int(pb[a])
    return mwpm(SyndromeGraph(tuple(range(k)), W, P, tuple([0] * k)))


# ---------------------------------------------------------------------------
# Standard decoder


@dataclass
class KindDecoder:
    """Graph, weights and lookup tables of one kind, plus the sparse arrays the kernels use."""
    graph: AuxGraph
    tables: DecodingTables
    G: np.ndarray            # (1 - A)^-1 over all nodes
    edge_list: Tuple[Tuple[int, int], ...]
    edge_id: Dict[Tuple[int, int], int]
    edge_p: np.ndarray
    ptr: np.ndarray
    nbr: np.ndarray
    ew: np.ndarray
    epar: np.ndarray
    pos_a: np.ndarray
    pos_b: np.ndarray

    @classmethod
    def from_graph(cls, graph: AuxGraph) -> "KindDecoder":
        A = graph.adjacency()
        m = graph.size
        w = weights_from_adjacency(A, graph.n_nodes)
        from .matching_graph import WeightMatrix
        tables = build_tables(graph, WeightMatrix(w))
        G = np.linalg.solve(np.eye(m) - A, np.eye(m))
        edge_list = tuple(sorted(e for e, p in graph.edges.items() if p > 0))
        edge_id = {e: i for i, e in enumerate(edge_list)}
        edge_p = np.array([graph.edges[e] for e in edge_list], dtype=np.float64)
        # CSR with both directions of every edge, rows in node order, columns ascending
        adj: List[List[Tuple[int, int]]] = [[] for _ in range(m)]
        for eid, (i, j) in enumerate(edge_list):
            adj[i].append((j, eid))
            adj[j].append((i, eid))
        ptr = np.zeros(m + 1, dtype=np.int64)
        nbr, ew, epar = [], [], []
        pos_a = np.full(len(edge_list), -1, dtype=np.int64)
        pos_b = np.full(len(edge_list), -1, dtype=np.int64)
        for v in range(m):
            for u, eid in sorted(adj[v]):
                i, j = edge_list[eid]
                if v == i:
                    pos_a[eid] = len(nbr)
                else:
                    pos_b[eid] = len(nbr)
                nbr.append(u)
                ew.append(-math.log(edge_p[eid]))
                epar.append(graph.parity.get((i, j), 0))
            ptr[v + 1] = len(nbr)
        return cls(graph, tables, G, edge_list, edge_id, edge_p, ptr,
                   np.array(nbr, dtype=np.int64), np.array(ew, dtype=np.float64),
                   np.array(epar, dtype=np.int64), pos_a, pos_b)

    @property
    def n_real(self) -> int:
        return self.graph.n_nodes

    @property
    def edge_ends(self) -> Tuple[np.ndarray, np.ndarray]:
        cached = self.__dict__.get("_ends")
        if cached is None:
            cached = self.__dict__["_ends"] = (np.array([e[0] for e in self.edge_list], dtype=np.int64),
                                               np.array([e[1] for e in self.edge_list], dtype=np.int64))
        return cached


@dataclass
class _KindBatch:
    offsets: np.ndarray
    nodes: np.ndarray
    flips: np.ndarray
    weights: np.ndarray
    mates: np.ndarray


def _defects(bits: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    rows, cols = np.nonzero(bits)
    counts = np.bincount(rows, minlength=bits.shape[0])
    offsets = np.zeros(bits.shape[0] + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return offsets, cols.astype(np.int64)


class MatchingDecoder:
    """Standard MWPM decoder for both kinds of one schedule."""

    def __init__(self, graphs: Dict[str, AuxGraph], detector_list: Sequence[DetectorCoord],
                 max_k: int = 16):
        if not 1 <= max_k <= 20:
            raise ValueError("max_k must lie in 1..20")
        self.max_k = int(max_k)
        self.detector_list = tuple(DetectorCoord(*d) for d in detector_list)
        index = {d: i for i, d in enumerate(self.detector_list)}
        self.kinds: Dict[str, KindDecoder] = {}
        self.columns: Dict[str, np.ndarray] = {}
        for kind in KINDS:
            g = graphs[kind]
            try:
                self.columns[kind] = np.array([index[d] for d in g.nodes], dtype=np.int64)
            except KeyError as exc:
                raise ValueError(f"graph node {exc.args[0]} missing from the detector list") from None
            self.kinds[kind] = KindDecoder.from_graph(g)

    @classmethod
    def from_model(cls, model, schedule: CircuitSchedule, dm_max: int = 2, max_k: int = 16) -> "MatchingDecoder":
        graphs = {k: build_aux_graph(model, k, schedule, dm_max) for k in KINDS}
        return cls(graphs, schedule.detector_list, max_k)

    @property
    def graphs(self) -> Dict[str, AuxGraph]:
        return {k: kd.graph for k, kd in self.kinds.items()}

    def _kind_bits(self, kind: str, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.ndim == 1:
            bits = bits[None, :]
        if bits.shape[1] != len(self.detector_list):
            raise ValueError("shot width does not match the detector list")
        return bits[:, self.columns[kind]]

    def decode_kind(self, kind: str, bits: np.ndarray) -> _KindBatch:
        kd = self.kinds[kind]
        t = kd.tables
        offsets, nodes = _defects(self._kind_bits(kind, bits))
        flips, weights, status, mates = kernels.match_batch(offsets, nodes, t.W, t.Wb, t.P, t.Pb, self.max_k)
        for s in np.nonzero(status)[0]:
            a, b = offsets[s], offsets[s + 1]
            idx = nodes[a:b]
            m = _blossom_local(t.W[np.ix_(idx, idx)], t.Wb[idx], t.P[np.ix_(idx, idx)], t.Pb[idx])
            flips[s] = m.parity
            weights[s] = m.weight
            mates[a:b] = _matching_to_mates(b - a, m)
        return _KindBatch(offsets, nodes, flips, weights, mates)

    def decode_batch(self, bits: np.ndarray) -> np.ndarray:
        """(n_shots, 2) predicted (x, z) flips."""
        out = np.zeros((np.atleast_2d(bits).shape[0], 2), dtype=np.uint8)
        for kind in KINDS:
            out[:, KIND_LOGICAL[kind]] = self.decode_kind(kind, bits).flips
        return out


def _kind_matching(dec: MatchingDecoder, kind: str, batch: _KindBatch) -> Matching:
    t = dec.kinds[kind].tables
    a, b = batch.offsets[0], batch.offsets[1]
    idx = batch.nodes[a:b]
    return _mates_to_matching(b - a, batch.mates[a:b], t.W[np.ix_(idx, idx)], t.Wb[idx],
                              t.P[np.ix_(idx, idx)], t.Pb[idx])


def decode_shot(decoder: MatchingDecoder, shot: np.ndarray) -> DecodeResult:
    shot = np.asarray(shot, dtype=np.uint8).reshape(1, -1)
    res = DecodeResult(False, False)
    used = {}
    for kind in KINDS:
        batch = decoder.decode_kind(kind, shot)
        m = _kind_matching(decoder, kind, batch)
        res.matchings[kind] = m
        used[kind] = m.weight
        if KIND_LOGICAL[kind] == 0:
            res.x_flip = bool(batch.flips[0])
        else:
            res.z_flip = bool(batch.flips[0])
    res.diagnostics["weights"] = used
    return res


def _chunks(n: int, size: int) -> List[Tuple[int, int]]:
    return [(a, min(a + size, n)) for a in range(0, n, size)] or [(0, 0)]


def decode_dataset(decoder: MatchingDecoder, dataset, threads: int = 1, chunk: int = 1 << 16,
                   correlated: Optional["CorrelatedConfig"] = None) -> np.ndarray:
    """Predicted (x, z) flips for every shot; chunks run in parallel, results are order-stable."""
    bits = dataset.shots if hasattr(dataset, "shots") else np.asarray(dataset, dtype=np.uint8)

    def run(span):
        part = bits[span[0]:span[1]]
        if correlated is None:
            return decoder.decode_batch(part)
        return correlated_batch(decoder, part, correlated)[0]

    spans = _chunks(bits.shape[0], chunk)
    if threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(run, spans))
    else:
        parts = [run(s) for s in spans]
    return np.concatenate(parts, axis=0)


def uniform_graph(graph: AuxGraph, p: Optional[float] = None) -> AuxGraph:
    """Same edges and parities, every edge at one probability (default: the mean)."""
    if p is None:
        vals = [v for v in graph.edges.values() if v > 0]
        p = float(np.mean(vals)) if vals else 0.0
    return replace(graph, edges={e: p for e in graph.edges}, parity=dict(graph.parity),
                   sources=dict(graph.sources))


# ---------------------------------------------------------------------------
# Correlated decoding


@dataclass
class YIndex:
    """Per flagging edge of one kind: candidate edges of the other kind with conditional probabilities."""
    flag_kind: str
    target_kind: str
    entries: Dict[Tuple[int, int], Dict[Tuple[int, int], float]]
    skipped: int = 0

    def csr(self, flag: KindDecoder, target: KindDecoder):
        """Dense flag-edge code lookup plus CSR of (target edge id, q)."""
        cached = self.__dict__.get("_csr")
        if cached is not None:
            return cached
        m = flag.graph.size
        code = np.full((m, m), -1, dtype=np.int64)
        ptr = [0]
        tgt, q = [], []
        for fid, (e, ups) in enumerate(sorted(self.entries.items())):
            code[e[0], e[1]] = code[e[1], e[0]] = fid
            for ce, val in sorted(ups.items()):
                tgt.append(target.edge_id[ce])
                q.append(val)
            ptr.append(len(tgt))
        cached = (code, np.array(ptr, dtype=np.int64), np.array(tgt, dtype=np.int64),
                  np.array(q, dtype=np.float64))
        self.__dict__["_csr"] = cached
        return cached


def _projection_edge(graph: AuxGraph, proj: Sequence[DetectorCoord], layout) -> Optional[Tuple[int, int]]:
    from .matching_graph import _LABEL_TO_NODE
    idx = graph.index
    if len(proj) == 1:
        return (idx[proj[0]], graph.boundary_index(_LABEL_TO_NODE[layout.boundary_of(proj[0].ancilla)]))
    if len(proj) == 2:
        return graph.edge_key(idx[proj[0]], idx[proj[1]])
    return None


def build_y_index(model, schedule: CircuitSchedule, graphs: Dict[str, AuxGraph], flag_kind: str) -> YIndex:
    """Conditional probabilities ``q(e_F, e_C)`` for Y signatures touching both kinds.

    For a flagging edge e_F, q(e_F, e_C) is the summed probability of Y
    signatures projecting onto (e_F, e_C), divided by the summed probability of
    all Y signatures projecting onto e_F plus the combined probability of the
    signatures whose projection is e_F alone.
    """
    target_kind = "Z" if flag_kind == "X" else "X"
    gF, gC = graphs[flag_kind], graphs[target_kind]
    layout = schedule.layout
    joint: Dict[Tuple[int, int], Dict[Tuple[int, int], float]] = {}
    y_total: Dict[Tuple[int, int], float] = {}
    proper: Dict[Tuple[int, int], float] = {}
    skipped = 0
    for key in sorted(fault_signatures(schedule), key=lambda k: [(d.tick, d.ancilla) for d in k]):
        pF = [d for d in key if d.ancilla[0] == flag_kind]
        pC = [d for d in key if d.ancilla[0] == target_kind]
        if not pF or len(pF) > 2:
            continue
        p = model_probability(model, key)
        if not p > 0:
            continue
        eF = _projection_edge(gF, pF, layout)
        if eF not in gF.edges:
            continue
        if not pC:
            proper[eF] = combine(proper.get(eF, 0.0), min(p, P_MAX))
            continue
        y_total[eF] = y_total.get(eF, 0.0) + p
        eC = _projection_edge(gC, pC, layout) if len(pC) <= 2 else None
        if eC is None or eC not in gC.edges:
            skipped += 1
            log.debug("Y signature %s has no edge in the %s graph; update skipped", key, target_kind)
            continue
        row = joint.setdefault(eF, {})
        row[eC] = row.get(eC, 0.0) + p
    entries = {}
    for eF, row in joint.items():
        den = y_total[eF] + proper.get(eF, 0.0)
        entries[eF] = {eC: v / den for eC, v in row.items()}
    return YIndex(flag_kind, target_kind, entries, skipped)


@dataclass
class CorrelatedConfig:
    gamma: float = 0.09
    first_kind: str = "X"
    max_iterations: int = 1
    y_signature_index: Optional[Dict[str, YIndex]] = None

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.first_kind not in KINDS:
            raise ValueError("first_kind must be 'X' or 'Z'")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    @classmethod
    def for_model(cls, model, schedule: CircuitSchedule, decoder: MatchingDecoder, gamma: float = 0.09,
                  first_kind: str = "X", max_iterations: int = 1) -> "CorrelatedConfig":
        graphs = decoder.graphs
        idx = {k: build_y_index(model, schedule, graphs, k) for k in KINDS}
        return cls(gamma, first_kind, max_iterations, idx)


def _flag_updates(decoder: MatchingDecoder, batch: _KindBatch, yidx: YIndex, gamma: float):
    """Per-shot (target edge id, new p) lists from the directly matched edges of ``batch``."""
    flag = decoder.kinds[yidx.flag_kind]
    target = decoder.kinds[yidx.target_kind]
    code, yptr, ytgt, yq = yidx.csr(flag, target)
    n_shots = len(batch.offsets) - 1
    shot_of = np.repeat(np.arange(n_shots), np.diff(batch.offsets))
    local = np.arange(len(batch.nodes)) - batch.offsets[shot_of]
    mates = batch.mates
    n = flag.n_real
    t = flag.tables
    # pairs between defects (counted once) and defect-boundary matches
    pair = (mates >= 0) & (local < mates)
    bnd = mates == -1
    src = np.concatenate([np.nonzero(pair)[0], np.nonzero(bnd)[0]])
    a_node = batch.nodes[src]
    b_node = np.concatenate([batch.nodes[batch.offsets[shot_of[pair]] + mates[pair]],
                             n + t.Bsel[batch.nodes[bnd]]]).astype(np.int64)
    fid = code[a_node, b_node]
    ok = (fid >= 0) & t.direct[a_node, b_node]
    fid, shots = fid[ok], shot_of[src][ok]
    if fid.size == 0:
        return np.zeros(n_shots + 1, dtype=np.int64), np.zeros(0, np.int64), np.zeros(0)
    counts = yptr[fid + 1] - yptr[fid]
    rep_shot = np.repeat(shots, counts)
    starts = np.repeat(yptr[fid], counts)
    within = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    pos = starts + within
    edge = ytgt[pos]
    q = yq[pos]
    order = np.lexsort((edge, rep_shot))
    rep_shot, edge, q = rep_shot[order], edge[order], q[order]
    key_change = np.ones(len(edge), dtype=bool)
    key_change[1:] = (rep_shot[1:] != rep_shot[:-1]) | (edge[1:] != edge[:-1])
    heads = np.nonzero(key_change)[0]
    qmax = np.maximum.reduceat(q, heads) if len(heads) else q
    u_shot, u_edge = rep_shot[heads], edge[heads]
    p_std = target.edge_p[u_edge]
    with np.errstate(divide="ignore"):
        p_new = np.exp((1.0 - gamma) * np.log(p_std) + gamma * np.log(np.maximum(qmax, 1e-300)))
    p_new = np.minimum(p_new, P_MAX)
    off = np.zeros(n_shots + 1, dtype=np.int64)
    np.cumsum(np.bincount(u_shot, minlength=n_shots), out=off[1:])
    return off, u_edge.astype(np.int64), p_new


def _redecode(decoder: MatchingDecoder, kind: str, base: _KindBatch, upd_off, upd_edge, upd_p) -> _KindBatch:
    """Re-decode shots that received updates; the others keep ``base`` unchanged."""
    kd = decoder.kinds[kind]
    has = np.nonzero(np.diff(upd_off) > 0)[0]
    out = _KindBatch(base.offsets, base.nodes, base.flips.copy(), base.weights.copy(), base.mates.copy())
    if has.size == 0:
        return out
    lens = base.offsets[has + 1] - base.offsets[has]
    sub_off = np.zeros(len(has) + 1, dtype=np.int64)
    np.cumsum(lens, out=sub_off[1:])
    sel = np.concatenate([np.arange(base.offsets[s], base.offsets[s + 1]) for s in has]).astype(np.int64)
    sub_nodes = base.nodes[sel]
    ulens = upd_off[has + 1] - upd_off[has]
    sub_uoff = np.zeros(len(has) + 1, dtype=np.int64)
    np.cumsum(ulens, out=sub_uoff[1:])
    usel = np.concatenate([np.arange(upd_off[s], upd_off[s + 1]) for s in has]).astype(np.int64)
    flips, weights, status, mates = kernels.redecode_batch(
        sub_off, sub_nodes, sub_uoff, upd_edge[usel], upd_p[usel], kd.G, kd.ptr, kd.nbr, kd.ew, kd.epar,
        np.array([e[0] for e in kd.edge_list], dtype=np.int64),
        np.array([e[1] for e in kd.edge_list], dtype=np.int64), kd.edge_p, kd.pos_a, kd.pos_b,
        kd.n_real, decoder.max_k)
    for r in np.nonzero(status)[0]:
        a, b = sub_off[r], sub_off[r + 1]
        ue, up = upd_edge[usel][sub_uoff[r]:sub_uoff[r + 1]], upd_p[usel][sub_uoff[r]:sub_uoff[r + 1]]
        w, wb, p, pb = kernels.modified_tables_numpy(
            sub_nodes[a:b], ue, up, kd.G, kd.ptr, kd.nbr, kd.ew, kd.epar, *kd.edge_ends, kd.edge_p, kd.pos_a, kd.pos_b, kd.n_real)
        m = _blossom_local(w, wb, p, pb)
        flips[r], weights[r] = m.parity, m.weight
        mates[a:b] = _matching_to_mates(b - a, m)
    out.flips[has] = flips
    out.weights[has] = weights
    out.mates[sel] = mates
    return out


def correlated_batch(decoder: MatchingDecoder, bits: np.ndarray, cfg: CorrelatedConfig):
    """(flips (n, 2), diagnostics) of correlated decoding for a block of shots."""
    if cfg.y_signature_index is None:
        raise ValueError("correlated decoding needs a Y-signature index")
    bits = np.atleast_2d(np.asarray(bits, dtype=np.uint8))
    first = cfg.first_kind
    other = "Z" if first == "X" else "X"
    batches = {k: decoder.decode_kind(k, bits) for k in KINDS}
    updated = {}
    if cfg.gamma > 0.0:
        flag, target = first, other
        for _ in range(cfg.max_iterations):
            # flags always come from a standard decode of the flagging kind in the first pass
            off, edge, p = _flag_updates(decoder, batches[flag], cfg.y_signature_index[flag], cfg.gamma)
            std = decoder.decode_kind(target, bits) if target in updated else batches[target]
            batches[target] = _redecode(decoder, target, std, off, edge, p)
            updated[target] = (off, edge, p)
            flag, target = target, flag
    out = np.zeros((bits.shape[0], 2), dtype=np.uint8)
    for k in KINDS:
        out[:, KIND_LOGICAL[k]] = batches[k].flips
    return out, {"updates": updated, "batches": batches}


def correlated_decode(shot: np.ndarray, decoder: MatchingDecoder, cfg: CorrelatedConfig) -> DecodeResult:
    shot = np.asarray(shot, dtype=np.uint8).reshape(1, -1)
    flips, diag = correlated_batch(decoder, shot, cfg)
    res = DecodeResult(bool(flips[0, 0]), bool(flips[0, 1]))
    for kind in KINDS:
        b = diag["batches"][kind]
        kd = decoder.kinds[kind]
        idx = b.nodes[b.offsets[0]:b.offsets[1]]
        k = len(idx)
        mates = b.mates[:k]
        pairs = []
        for i in range(k):
            j = int(mates[i])
            if j < 0:
                pairs.append((i, k + i))
            elif i < j:
                pairs.append((i, j))
        res.matchings[kind] = Matching(tuple(pairs), float(b.weights[0]), ())
    ups = []
    for kind, (off, edge, p) in diag["updates"].items():
        kd = decoder.kinds[kind]
        for e, pn in zip(edge[off[0]:off[1]], p[off[0]:off[1]]):
            ups.append((kind, kd.edge_list[int(e)], float(kd.edge_p[int(e)]), float(pn)))
    res.diagnostics["updated_edges"] = ups
    res.diagnostics["weights"] = {k: float(diag["batches"][k].weights[0]) for k in KINDS}
    return res


# ---------------------------------------------------------------------------
# Fidelity


@dataclass(frozen=True)
class Fidelity:
    F: float
    stderr: float
    n_shots: int


def logical_column(basis: str) -> int:
    """Truth column of the logical operator measured in ``basis`` (Z_L for a Z memory)."""
    if basis not in KINDS:
        raise ValueError("basis must be 'X' or 'Z'")
    return KIND_LOGICAL[basis]


def fidelity_from_flips(pred: np.ndarray, truth: np.ndarray, column: int) -> Fidelity:
    ok = np.asarray(pred)[:, column] == np.asarray(truth)[:, column]
    n = len(ok)
    if n == 0:
        raise ValueError("no shots")
    F = float(ok.mean())
    return Fidelity(F, math.sqrt(max(F * (1 - F), 0.0) / n), n)


def evaluate_fidelity(dataset, decoder: MatchingDecoder, basis: Optional[str] = None,
                      correlated: Optional[CorrelatedConfig] = None, threads: int = 1) -> Fidelity:
    if dataset.truth is None:
        raise ValueError("dataset has no truth labels")
    if basis is None:
        basis = dataset.provenance.get("basis", "Z")
    pred = decode_dataset(decoder, dataset, threads=threads, correlated=correlated)
    return fidelity_from_flips(pred, dataset.truth, logical_column(basis))


def relative_improvement(pred_mod: np.ndarray, pred_std: np.ndarray, truth: np.ndarray,
                         column: int) -> Tuple[float, float]:
    """(F_mod - F_std) / mean(F_mod, F_std) and its paired standard error."""
    a = (np.asarray(pred_mod)[:, column] == np.asarray(truth)[:, column]).astype(np.float64)
    b = (np.asarray(pred_std)[:, column] == np.asarray(truth)[:, column]).astype(np.float64)
    n = len(a)
    Fm, Fs = a.mean(), b.mean()
    Fbar = 0.5 * (Fm + Fs)
    if Fbar == 0:
        return 0.0, 0.0
    d = a - b
    se = float(d.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return float((Fm - Fs) / Fbar), se / Fbar
