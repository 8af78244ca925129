"""Error probabilities from syndrome correlations.

For a signature ``S`` of weight ``n`` the product of ``(1 - 2 p_c)`` over all
channels ``c`` containing ``S`` equals

    prod_{T subset S, T nonempty} <prod_{i in T} s_i> ** ((-1)**(|T|-1) / 2**(n-1))

with ``s_i = 1 - 2 sigma_i``. Dividing out the in-support strict supersets of
``S`` (already solved, since they are heavier) leaves ``1 - 2 p_S``.

Moments are stored per detector *window*: a detector set whose subsets are all
needed. The subset products of a window are obtained with one subset-sum
transform of the signed log-moments, which makes weight-12 signatures cheap.
"""

from __future__ import annotations

import hashlib
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from . import kernels
from .code_model import (CircuitSchedule, DetectorCoord, ErrorSignature, absolute_fault_signatures,
                         c_class_windows, canonical_detectors, canonical_key, detector_sort_key,
                         generate_c_class)
from .noise_sim import SignatureChannel, SyndromeDataset

Key = Tuple[DetectorCoord, ...]

MAX_WINDOW = 16


class InferenceError(RuntimeError):
    pass


def _as_key(sig) -> Key:
    if isinstance(sig, ErrorSignature):
        return sig.detectors
    return canonical_detectors(sig)


# ---------------------------------------------------------------------------
# Moments


@dataclass
class _Window:
    dets: Tuple[int, ...]
    exact: Optional[np.ndarray] = None  # moments for every mask (analytic cache)
    odd: Optional[np.ndarray] = None    # (2**k, n_blocks) odd-parity counts


class MomentCache:
    """Moments <prod (1 - 2 sigma_i)> of detector subsets.

    Lookups accept any iterable of ``DetectorCoord``; a subset is served from
    the first stored window containing it. With a dataset attached, missing
    subsets are computed on demand.
    """

    def __init__(self, detector_list: Sequence[DetectorCoord], n_shots: int,
                 dataset: Optional[SyndromeDataset] = None, n_blocks: int = 64):
        self.detector_list = tuple(DetectorCoord(*d) for d in detector_list)
        self.index = {d: i for i, d in enumerate(self.detector_list)}
        self.n_shots = int(n_shots)
        self.dataset = dataset
        self.windows: List[_Window] = []
        self._member: Dict[int, List[int]] = defaultdict(list)  # detector -> windows
        self.block_sizes = None
        self.block_words = None
        if dataset is not None:
            n_words = dataset.packed.shape[1]
            self.block_words = max(1, -(-n_words // max(1, n_blocks)))
            starts = np.arange(0, n_words, self.block_words)
            ends = np.minimum(starts + self.block_words, n_words)
            self.block_sizes = np.minimum(ends * 64, dataset.n_shots) - starts * 64

    # -- construction -----------------------------------------------------
    def _indices(self, subset) -> Tuple[int, ...]:
        try:
            return tuple(sorted({self.index[DetectorCoord(*d)] for d in subset}))
        except KeyError as exc:
            raise InferenceError(f"detector {exc.args[0]} not in the detector list") from None

    def _add_window(self, dets: Tuple[int, ...], exact: Optional[np.ndarray] = None) -> int:
        if len(dets) > MAX_WINDOW:
            raise MemoryError(f"window of {len(dets)} detectors exceeds the subset budget")
        w = _Window(tuple(dets), exact=exact)
        if exact is None:
            if self.dataset is None:
                raise InferenceError("missing moment and no dataset attached")
            w.odd = kernels.subset_odd_counts(self.dataset.packed, np.asarray(dets, dtype=np.int64),
                                              int(self.block_words))
        self.windows.append(w)
        wid = len(self.windows) - 1
        for d in dets:
            self._member[d].append(wid)
        return wid

    def find(self, idx: Tuple[int, ...]) -> Optional[Tuple[int, int]]:
        """(window id, local mask) of a stored superset window, or None."""
        if not idx:
            return None
        cands = None
        for d in idx:
            ws = self._member.get(d)
            if not ws:
                return None
            cands = set(ws) if cands is None else cands.intersection(ws)
            if not cands:
                return None
        wid = min(cands)
        pos = {d: i for i, d in enumerate(self.windows[wid].dets)}
        mask = 0
        for d in idx:
            mask |= 1 << pos[d]
        return wid, mask

    def ensure(self, subsets: Iterable) -> None:
        """Store windows covering ``subsets`` (heaviest first, maximal sets become windows)."""
        todo = sorted({self._indices(s) for s in subsets if len(s)}, key=lambda t: (-len(t), t))
        for idx in todo:
            if self.find(idx) is None:
                self._add_window(idx)

    # -- access ----------------------------------------------------------
    def window_moments(self, wid: int) -> np.ndarray:
        w = self.windows[wid]
        if w.exact is not None:
            return w.exact
        odd = w.odd.sum(axis=1)
        return 1.0 - 2.0 * odd / self.n_shots

    def window_replicates(self, wid: int, weights: np.ndarray) -> np.ndarray:
        """Moments of every mask under block-bootstrap weights (n_blocks, R)."""
        w = self.windows[wid]
        odd = w.odd.astype(np.float64) @ weights
        n = self.block_sizes.astype(np.float64) @ weights
        return 1.0 - 2.0 * odd / n[None, :]

    def value(self, subset) -> float:
        idx = self._indices(subset)
        if not idx:
            return 1.0
        loc = self.find(idx)
        if loc is None:
            if self.dataset is None:
                raise InferenceError(f"missing moment for {tuple(subset)}")
            self._add_window(idx)
            loc = self.find(idx)
        wid, mask = loc
        return float(self.window_moments(wid)[mask])

    def __getitem__(self, subset) -> Tuple[float, int]:
        return self.value(subset), self.n_shots

    def __contains__(self, subset) -> bool:
        try:
            idx = self._indices(subset)
        except InferenceError:
            return False
        return not idx or self.find(idx) is not None or self.dataset is not None

    @property
    def has_replicates(self) -> bool:
        return self.dataset is not None

    def bootstrap_weights(self, n_boot: int, seed: int) -> np.ndarray:
        n_blocks = len(self.block_sizes)
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 0xB007])))
        return rng.multinomial(n_blocks, np.full(n_blocks, 1.0 / n_blocks), size=n_boot).T.astype(np.float64)


def estimate_moments(dataset: SyndromeDataset, subsets: Iterable, exclude_boundary_cycles: bool = False,
                     schedule: Optional[CircuitSchedule] = None, n_blocks: int = 64) -> MomentCache:
    """Empirical moments of the requested subsets (and of all their subsets).

    With ``exclude_boundary_cycles`` subsets touching the first or last cycle
    of ``schedule`` are dropped.
    """
    if dataset.n_shots < 1:
        raise InferenceError("empty dataset")
    subs = [canonical_detectors(s) for s in subsets]
    if exclude_boundary_cycles:
        if schedule is None:
            raise ValueError("cycle exclusion needs the schedule")
        subs = [s for s in subs if schedule.is_bulk(s)]
    cache = MomentCache(dataset.detector_list, dataset.n_shots, dataset, n_blocks)
    cache.ensure(subs)
    return cache


def analytic_moment(channels: Sequence[SignatureChannel], subset) -> float:
    """Exact moment under independent channels: product of (1 - 2p) over odd overlaps."""
    s = set(canonical_detectors(subset))
    out = 1.0
    for ch in channels:
        if len(s.intersection(ch.signature.detectors)) % 2:
            out *= 1.0 - 2.0 * ch.probability
    return out


def analytic_moments(channels: Sequence[SignatureChannel], subsets: Iterable,
                     detector_list: Optional[Sequence[DetectorCoord]] = None) -> MomentCache:
    """Moment cache filled with exact values for windows covering ``subsets``."""
    subs = [canonical_detectors(s) for s in subsets]
    if detector_list is None:
        dets = set()
        for s in subs:
            dets.update(s)
        for ch in channels:
            dets.update(ch.signature.detectors)
        detector_list = sorted(dets, key=lambda d: (d.tick, detector_sort_key(d)))
    cache = MomentCache(detector_list, 0)
    rows = {}
    for ch in channels:
        rows[ch] = np.zeros(len(cache.detector_list), dtype=bool)
        for d in ch.signature.detectors:
            rows[ch][cache.index[d]] = True
    for idx in sorted({cache._indices(s) for s in subs if s}, key=lambda t: (-len(t), t)):
        if cache.find(idx) is not None:
            continue
        k = len(idx)
        masks = np.arange(1 << k)
        vals = np.ones(1 << k)
        for ch in channels:
            bits = 0
            for i, d in enumerate(idx):
                if rows[ch][d]:
                    bits |= 1 << i
            if bits:
                odd = np.bitwise_count(masks & bits) % 2 == 1
                vals[odd] *= 1.0 - 2.0 * ch.probability
        cache._add_window(idx, exact=vals)
    return cache


def moments_from_values(values: Mapping, detector_list: Optional[Sequence[DetectorCoord]] = None) -> MomentCache:
    """Cache built from an explicit {subset: moment} table (every subset of a window must be present)."""
    table = {canonical_detectors(k): float(v) for k, v in values.items()}
    if detector_list is None:
        dets = set()
        for k in table:
            dets.update(k)
        detector_list = sorted(dets, key=lambda d: (d.tick, detector_sort_key(d)))
    cache = MomentCache(detector_list, 0)
    for key in sorted(table, key=lambda t: (-len(t), [detector_sort_key(d) for d in t])):
        idx = cache._indices(key)
        if cache.find(idx) is not None:
            continue
        k = len(idx)
        vals = np.ones(1 << k)
        inv = {i: cache.detector_list[d] for i, d in enumerate(idx)}
        for mask in range(1, 1 << k):
            sub = canonical_detectors(inv[i] for i in range(k) if (mask >> i) & 1)
            if sub not in table:
                raise InferenceError(f"missing moment for {sub}")
            vals[mask] = table[sub]
        cache._add_window(idx, exact=vals)
    return cache


# ---------------------------------------------------------------------------
# Inversion


@dataclass
class ModelEntry:
    p: float
    stderr: Optional[float] = None
    flags: Tuple[str, ...] = ()


@dataclass
class InferredModel:
    entries: Dict[Key, ModelEntry]
    metadata: Dict = field(default_factory=dict)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, key) -> bool:
        return _as_key(key) in self.entries

    def p(self, key) -> float:
        return self.entries[_as_key(key)].p

    def stderr(self, key) -> Optional[float]:
        return self.entries[_as_key(key)].stderr

    def items(self):
        return self.entries.items()

    def keys(self):
        return self.entries.keys()

    def flagged(self) -> Dict[Key, Tuple[str, ...]]:
        return {k: e.flags for k, e in self.entries.items() if e.flags}


@dataclass
class ModelSupport:
    """Hypothesis set of signatures, kept sorted by decreasing weight."""
    signatures: Tuple[Key, ...]

    def __init__(self, signatures: Iterable):
        keys = {_as_key(s) for s in signatures}
        keys.discard(())
        self.signatures = tuple(sorted(keys, key=lambda k: (-len(k), [detector_sort_key(d) for d in k])))

    def __len__(self):
        return len(self.signatures)

    def __iter__(self):
        return iter(self.signatures)

    def digest(self) -> str:
        h = hashlib.sha256()
        for k in self.signatures:
            h.update(repr([(d.ancilla, d.tick) for d in k]).encode())
        return h.hexdigest()[:16]


def default_support(schedule: CircuitSchedule, c_class: bool = True, max_time_span: int = 9,
                    max_nbr_sep: int = 2) -> ModelSupport:
    """Signatures of every single fault in ``schedule``, plus the C-class subsets of all placements."""
    _, sigs = absolute_fault_signatures(schedule)
    keys = {s.detectors for s in sigs if s.detectors}
    if c_class:
        rel = {s.detectors for s in generate_c_class(schedule.layout, schedule, max_time_span, max_nbr_sep)}
        for win in c_class_windows(schedule.layout, schedule, max_time_span, max_nbr_sep, absolute=True):
            k = len(win)
            for mask in range(1, 1 << k):
                sub = tuple(win[i] for i in range(k) if (mask >> i) & 1)
                if len(sub) > 1 and canonical_key(sub) in rel:
                    keys.add(canonical_detectors(sub))
    return ModelSupport(keys)


def _subset_sum(f: np.ndarray) -> np.ndarray:
    """g[mask] = sum over submasks of f; leading axis has length 2**k."""
    g = f.copy()
    k = int(g.shape[0]).bit_length() - 1
    tail = g.shape[1:]
    for i in range(k):
        v = g.reshape((-1, 2, 1 << i) + tail)
        v[:, 1] += v[:, 0]
    return g


def _signed_logs(m: np.ndarray) -> np.ndarray:
    k = int(m.shape[0]).bit_length() - 1
    pc = np.bitwise_count(np.arange(1 << k, dtype=np.int64))
    sign = np.where(pc % 2 == 1, 1.0, -1.0)
    sign[0] = 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        lg = np.where(m > 0, np.log(np.where(m > 0, m, 1.0)), np.nan)
    lg[0] = 0.0
    return lg * (sign if m.ndim == 1 else sign[:, None])


def infer_probabilities(moments: MomentCache, support, n_boot: int = 100, seed: int = 0) -> InferredModel:
    """Solve for every support signature, heaviest first.

    Standard errors come from a block bootstrap over shots when the cache
    holds data; analytic caches give ``stderr=None``. The bootstrap cannot see
    fluctuations of events that happened to be absent from the data (heavy
    signatures with tiny rates), so it is floored by the delta-method error of
    the numerator evaluated under the fitted model.
    """
    if not isinstance(support, ModelSupport):
        support = ModelSupport(support)
    keys = list(support.signatures)
    n = len(keys)
    if n == 0:
        return InferredModel({}, {"support_hash": support.digest(), "shots": moments.n_shots,
                                  "cycle_averaged": False})
    idxs = [moments._indices(k) for k in keys]
    if moments.dataset is not None:
        moments.ensure(keys)
    locs = []
    for k, idx in zip(keys, idxs):
        loc = moments.find(idx)
        if loc is None:
            raise InferenceError(f"missing moment for {k}")
        locs.append(loc)

    use_boot = moments.has_replicates and n_boot > 0
    R = n_boot if use_boot else 0
    weights = moments.bootstrap_weights(n_boot, seed) if use_boot else None

    # Numerators per home window.
    by_window: Dict[int, List[int]] = defaultdict(list)
    for sid, (wid, mask) in enumerate(locs):
        by_window[wid].append(sid)
    numlog = np.zeros((n, R + 1))
    bad_moment = np.zeros(n, dtype=bool)
    for wid, sids in by_window.items():
        m = moments.window_moments(wid)
        if use_boot:
            m = np.column_stack([m, moments.window_replicates(wid, weights)])
        else:
            m = m[:, None]
        g = _subset_sum(_signed_logs(m))
        masks = np.array([locs[s][1] for s in sids], dtype=np.int64)
        w = np.array([len(idxs[s]) for s in sids], dtype=np.float64)
        numlog[sids] = g[masks] / (2.0 ** (w - 1.0))[:, None]
        bad_moment[sids] = np.isnan(g[masks, 0])

    # Strict superset relations: every subset of a signature lies in its home
    # window, so each home window gets a table of all support members inside it.
    inside: Dict[int, List[int]] = defaultdict(list)
    for s, idx in enumerate(idxs):
        ws = set(moments._member[idx[0]])
        for d in idx[1:]:
            ws.intersection_update(moments._member[d])
        for wid in ws:
            if wid in by_window:
                inside[wid].append(s)
    rows_all, cols_all = [], []
    for wid, sids in by_window.items():
        dets = moments.windows[wid].dets
        pos = {d: i for i, d in enumerate(dets)}
        table = np.full(1 << len(dets), -1, dtype=np.int64)
        for s in inside[wid]:
            mask = 0
            for d in idxs[s]:
                mask |= 1 << pos[d]
            table[mask] = s
        home = np.array([locs[s][1] for s in sids], dtype=np.int64)
        r, c = kernels.superset_pairs(home, np.array(sids, dtype=np.int64), table)
        rows_all.append(r)
        cols_all.append(c)
    rows = np.concatenate(rows_all) if rows_all else np.empty(0, np.int64)
    cols = np.concatenate(cols_all) if cols_all else np.empty(0, np.int64)
    sup = sparse.csr_matrix((np.ones(rows.shape[0]), (rows, cols)), shape=(n, n))

    # Triangular solve, level by level in weight.
    L = np.zeros((n, R + 1))
    weights_arr = np.array([len(i) for i in idxs])
    for w in sorted(set(weights_arr.tolist()), reverse=True):
        level = np.flatnonzero(weights_arr == w)
        D = sup[level] @ L
        L[level] = numlog[level] - D
    with np.errstate(invalid="ignore"):
        P = 0.5 * (1.0 - np.exp(L))
    bad_den = np.zeros(n, dtype=bool)
    nonpos = ~(1.0 - 2.0 * P[:, 0] > 0)
    if nonpos.any():
        hit = sup[:, np.flatnonzero(nonpos)].sum(axis=1).A1 > 0
        bad_den |= hit

    floor = None
    if use_boot:
        with np.errstate(invalid="ignore"):
            boot = np.nanstd(np.where(np.isfinite(P[:, 1:]), P[:, 1:], np.nan), axis=1, ddof=1)
            significant = np.where(P[:, 0] > 2.0 * boot, P[:, 0], 0.0)
        floor = _delta_stderr(moments, idxs, locs, inside, by_window, significant, L[:, 0])

    entries: Dict[Key, ModelEntry] = {}
    for sid, key in enumerate(keys):
        p = float(P[sid, 0])
        se = None
        if use_boot:
            reps = P[sid, 1:]
            reps = reps[np.isfinite(reps)]
            se = float(np.std(reps, ddof=1)) if reps.size > 1 else float("nan")
            if np.isfinite(floor[sid]) and not floor[sid] <= se:
                se = float(floor[sid])
        flags = []
        if bad_moment[sid]:
            flags.append("nonpositive_moment")
        if bad_den[sid]:
            flags.append("superset_probability_ge_half")
        if np.isfinite(p) and p < 0:
            flags.append("negative")
        entries[key] = ModelEntry(p, se, tuple(flags))
    meta = {"support_hash": support.digest(), "shots": moments.n_shots, "cycle_averaged": False,
            "bootstrap": R, "stderr": "max(block bootstrap, model delta)" if use_boot else "none"}
    return InferredModel(entries, meta)


def _walsh(x: np.ndarray) -> np.ndarray:
    """Unnormalised Walsh-Hadamard transform along the last axis."""
    y = x.copy()
    n = y.shape[-1]
    lead = y.shape[:-1]
    h = 1
    while h < n:
        v = y.reshape(lead + (-1, 2, h))
        a = v[..., 0, :].copy()
        v[..., 0, :] += v[..., 1, :]
        v[..., 1, :] = a - v[..., 1, :]
        h *= 2
    return y


def _delta_stderr(moments: MomentCache, idxs, locs, inside, by_window, p0: np.ndarray,
                  l0: np.ndarray) -> np.ndarray:
    """First-order error of each solution, moment covariances taken from the fitted channels.

    The linearisation runs through the superset subtraction, restricted to the
    support members inside the home window.
    """
    n_sig = len(idxs)
    n_det = len(moments.detector_list)
    lens = np.array([len(i) for i in idxs])
    inc = sparse.csr_matrix((np.ones(int(lens.sum())), np.concatenate(idxs).astype(np.int64),
                             np.concatenate([[0], np.cumsum(lens)])), shape=(n_sig, n_det)).tocsc()
    with np.errstate(invalid="ignore", divide="ignore"):
        lam_c = np.log(1.0 - 2.0 * np.clip(np.nan_to_num(p0, nan=0.0), 0.0, 0.49))
    out = np.full(n_sig, np.nan)
    n = float(moments.n_shots)
    for wid, home in by_window.items():
        dets = moments.windows[wid].dets
        k = len(dets)
        sub = inc[:, list(dets)].tocsr()
        rows = np.flatnonzero(np.diff(sub.indptr))
        bits = np.rint(sub[rows] @ (2.0 ** np.arange(k))).astype(np.int64)
        lam = np.zeros(1 << k)
        np.add.at(lam, bits, lam_c[rows])
        m = np.exp(0.5 * (lam.sum() - _walsh(lam)))
        M = _walsh(m)

        members = np.asarray(inside[wid], dtype=np.int64)
        pos = {d: i for i, d in enumerate(dets)}
        mmask = np.array([sum(1 << pos[d] for d in idxs[s]) for s in members], dtype=np.int64)
        local = {int(s): i for i, s in enumerate(members)}
        table = np.full(1 << k, -1, dtype=np.int64)
        table[mmask] = np.arange(members.size)
        r, c = kernels.superset_pairs(mmask, np.arange(members.size, dtype=np.int64), table)
        sup = sparse.csr_matrix((np.ones(r.size), (r, c)), shape=(members.size, members.size))

        all_masks = np.arange(1 << k, dtype=np.int64)
        pc = np.bitwise_count(all_masks)
        sign = np.where(pc % 2 == 1, 1.0, -1.0) / m
        sign[0] = 0.0
        G = np.zeros((members.size, 1 << k))
        wm = lens[members]
        for w in sorted(set(wm.tolist()), reverse=True):
            level = np.flatnonzero(wm == w)
            F = np.where((all_masks[None, :] & ~mmask[level, None]) == 0, sign[None, :], 0.0)
            F /= 2.0 ** (w - 1)
            G[level] = F - sup[level] @ G
        rows_h = np.array([local[int(s)] for s in home], dtype=np.int64)
        Gh = G[rows_h]
        second = (_walsh(Gh) ** 2 * M[None, :]).sum(axis=1) / float(1 << k)
        first = Gh @ m
        var_l = np.maximum(second - first * first, 0.0) / n
        out[np.asarray(home)] = 0.5 * np.exp(l0[np.asarray(home)]) * np.sqrt(var_l)
    return out


def infer_pairwise_spitz(moments: MomentCache, pair_support) -> InferredModel:
    """Closed form for supports of weight-1 and weight-2 signatures only."""
    if not isinstance(pair_support, ModelSupport):
        pair_support = ModelSupport(pair_support)
    keys = list(pair_support.signatures)
    if any(len(k) > 2 for k in keys):
        raise ValueError("pairwise formula needs signatures of weight <= 2")
    entries: Dict[Key, ModelEntry] = {}
    pair_p: Dict[Key, float] = {}
    for k in keys:
        if len(k) == 2:
            a, b = k
            ratio = moments.value((a,)) * moments.value((b,)) / moments.value(k)
            flags = ()
            if ratio < 0:
                p = float("nan")
                flags = ("nonpositive_moment",)
            else:
                p = 0.5 - 0.5 * math.sqrt(ratio)
            pair_p[k] = p
            entries[k] = ModelEntry(p, None, flags + (("negative",) if p < 0 else ()))
    for k in keys:
        if len(k) == 1:
            (a,) = k
            den = 1.0
            for pk, p in pair_p.items():
                if a in pk:
                    den *= 1.0 - 2.0 * p
            p = 0.5 - moments.value(k) / (2.0 * den)
            entries[k] = ModelEntry(p, None, ("negative",) if p < 0 else ())
    return InferredModel(entries, {"support_hash": pair_support.digest(), "shots": moments.n_shots,
                                   "cycle_averaged": False, "method": "pairwise"})


# ---------------------------------------------------------------------------
# Averaging over cycles


def cycle_average(model: InferredModel, schedule: CircuitSchedule, exclude_boundary: bool = True) -> InferredModel:
    """Average time-translated copies of each signature.

    Copies touching the first or last cycle are left out; signatures that only
    occur there keep the mean over all their copies.
    """
    groups: Dict[Key, List[Tuple[Key, ModelEntry]]] = defaultdict(list)
    for key, e in model.entries.items():
        groups[canonical_key(key)].append((key, e))
    out: Dict[Key, ModelEntry] = {}
    counts = {}
    for rel, items in groups.items():
        use = [(k, e) for k, e in items if schedule.is_bulk(k)] if exclude_boundary else items
        if not use:
            use = items
        ps = np.array([e.p for _, e in use], dtype=float)
        p = float(np.mean(ps))
        ses = [e.stderr for _, e in use]
        if all(s is not None for s in ses):
            se = float(math.sqrt(sum(s * s for s in ses)) / len(ses))
        else:
            se = None
        flags = tuple(sorted({f for _, e in use for f in e.flags if f != "negative"}))
        if p < 0:
            flags += ("negative",)
        out[rel] = ModelEntry(p, se, flags)
        counts[rel] = len(use)
    meta = dict(model.metadata)
    meta["cycle_averaged"] = True
    meta["instances"] = {",".join(f"{d.ancilla}:{d.tick}" for d in k): c for k, c in counts.items()}
    return InferredModel(out, meta)


# ---------------------------------------------------------------------------
# Covariances


def _rows(dataset: SyndromeDataset, dets) -> List[np.ndarray]:
    return [dataset.packed[dataset.detector_index[DetectorCoord(*d)]] for d in dets]


def covariance(dataset: SyndromeDataset, i: DetectorCoord, j: DetectorCoord) -> float:
    a, b = _rows(dataset, (i, j))
    n = dataset.n_shots
    ea = np.bitwise_count(a).sum() / n
    eb = np.bitwise_count(b).sum() / n
    eab = np.bitwise_count(a & b).sum() / n
    return float(eab - ea * eb)


def covariance_panel(dataset: SyndromeDataset, dm: int, schedule: Optional[CircuitSchedule] = None,
                     ancillas: Optional[Sequence[str]] = None) -> Tuple[List[str], np.ndarray]:
    """Cycle-averaged covariance between ancilla i at tick t and ancilla j at t + 2 dm (+1 across kinds).

    With ``schedule`` given, detectors of the first and last cycle are skipped.
    """
    dl = dataset.detector_list
    if ancillas is None:
        ancillas = sorted({d.ancilla for d in dl}, key=lambda a: (a[0], int(a[1:])))
    n = dataset.n_shots
    counts = np.bitwise_count(dataset.packed).sum(axis=1) / n
    idx = dataset.detector_index
    M = np.full((len(ancillas), len(ancillas)), np.nan)
    for ai, a in enumerate(ancillas):
        for bi, b in enumerate(ancillas):
            off = 2 * dm + (0 if a[0] == b[0] else 1)
            vals = []
            for d in dl:
                if d.ancilla != a:
                    continue
                e = DetectorCoord(b, d.tick + off)
                if e not in idx:
                    continue
                if schedule is not None and not schedule.is_bulk((d, e)):
                    continue
                i, j = idx[d], idx[e]
                eab = np.bitwise_count(dataset.packed[i] & dataset.packed[j]).sum() / n
                vals.append(eab - counts[i] * counts[j])
            if vals:
                M[ai, bi] = float(np.mean(vals))
    return list(ancillas), M
