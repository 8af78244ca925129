"""Edmonds' weighted matching (primal-dual blossom algorithm), O(n^3).

Vertices are ``0..n-1``; top-level blossoms reuse ids ``n..2n-1``. Edge
endpoints are numbered ``2k`` (tail of edge k) and ``2k+1`` (head). Integer
weights are handled in exact integer arithmetic.
"""

from __future__ import annotations

import math
from typing import Dict, Iterable, List, Sequence, Tuple

Edge = Tuple[int, int, float]


class MatchingError(ValueError):
    pass


def max_weight_matching(edges: Sequence[Edge], max_cardinality: bool = False) -> List[int]:
    """Return ``mate`` with ``mate[v]`` the partner of v or -1.

    With ``max_cardinality`` the heaviest matching among the largest ones is
    returned.
    """
    edges = list(edges)
    if not edges:
        return []
    n = 0
    for i, j, _ in edges:
        if i == j or i < 0 or j < 0:
            raise MatchingError("bad edge")
        n = max(n, i + 1, j + 1)
    return _Solver(n, edges, max_cardinality).run()


class _Solver:
    def __init__(self, n, edges, max_card):
        self.n = n
        self.edges = edges
        self.max_card = max_card
        self.integer = all(isinstance(w, int) for _, _, w in edges)
        top = max(0, max(w for _, _, w in edges))
        self.endpoint = [v for i, j, _ in edges for v in (i, j)]
        self.neighbend: List[List[int]] = [[] for _ in range(n)]
        for k, (i, j, _) in enumerate(edges):
            self.neighbend[i].append(2 * k + 1)
            self.neighbend[j].append(2 * k)
        self.mate = [-1] * n
        self.label = [0] * (2 * n)
        self.labelend = [-1] * (2 * n)
        self.inblossom = list(range(n))
        self.parent = [-1] * (2 * n)
        self.childs: List[List[int]] = [[] for _ in range(2 * n)]
        self.base = list(range(n)) + [-1] * n
        self.endps: List[List[int]] = [[] for _ in range(2 * n)]
        self.bestedge = [-1] * (2 * n)
        self.blossombestedges: List = [None] * (2 * n)
        self.unused = list(range(n, 2 * n))
        self.dual = [top] * n + [0] * n
        self.allowed = [False] * len(edges)
        self.queue: List[int] = []

    # -- helpers ----------------------------------------------------------
    def slack(self, k):
        i, j, w = self.edges[k]
        return self.dual[i] + self.dual[j] - 2 * w

    def leaves(self, b):
        if b < self.n:
            yield b
            return
        for c in self.childs[b]:
            if c < self.n:
                yield c
            else:
                yield from self.leaves(c)

    def assign_label(self, w, t, p):
        b = self.inblossom[w]
        self.label[w] = self.label[b] = t
        self.labelend[w] = self.labelend[b] = p
        self.bestedge[w] = self.bestedge[b] = -1
        if t == 1:
            self.queue.extend(self.leaves(b))
        else:
            base = self.base[b]
            self.assign_label(self.endpoint[self.mate[base]], 1, self.mate[base] ^ 1)

    def scan_blossom(self, v, w):
        """Trace back from v and w; return the base of a new blossom or -1 for an augmenting path."""
        path = []
        base = -1
        while v != -1 or w != -1:
            b = self.inblossom[v]
            if self.label[b] & 4:
                base = self.base[b]
                break
            path.append(b)
            self.label[b] = 5
            if self.labelend[b] == -1:
                v = -1
            else:
                v = self.endpoint[self.labelend[b]]
                b = self.inblossom[v]
                v = self.endpoint[self.labelend[b]]
            if w != -1:
                v, w = w, v
        for b in path:
            self.label[b] = 1
        return base

    def add_blossom(self, base, k):
        v, w, _ = self.edges[k]
        bb = self.inblossom[base]
        bv = self.inblossom[v]
        bw = self.inblossom[w]
        b = self.unused.pop()
        self.base[b] = base
        self.parent[b] = -1
        self.parent[bb] = b
        path = self.childs[b] = []
        endps = self.endps[b] = []
        while bv != bb:
            self.parent[bv] = b
            path.append(bv)
            endps.append(self.labelend[bv])
            v = self.endpoint[self.labelend[bv]]
            bv = self.inblossom[v]
        path.append(bb)
        path.reverse()
        endps.reverse()
        endps.append(2 * k)
        while bw != bb:
            self.parent[bw] = b
            path.append(bw)
            endps.append(self.labelend[bw] ^ 1)
            w = self.endpoint[self.labelend[bw]]
            bw = self.inblossom[w]
        self.label[b] = 1
        self.labelend[b] = self.labelend[bb]
        self.dual[b] = 0
        for u in self.leaves(b):
            if self.label[self.inblossom[u]] == 2:
                self.queue.append(u)
            self.inblossom[u] = b
        # Best edges from the new blossom to every other S-blossom.
        best_to = [-1] * (2 * self.n)
        for c in path:
            if self.blossombestedges[c] is None:
                lists = [[p // 2 for p in self.neighbend[u]] for u in self.leaves(c)]
            else:
                lists = [self.blossombestedges[c]]
            for lst in lists:
                for kk in lst:
                    i, j, _ = self.edges[kk]
                    if self.inblossom[j] == b:
                        i, j = j, i
                    bj = self.inblossom[j]
                    if (bj != b and self.label[bj] == 1 and
                            (best_to[bj] == -1 or self.slack(kk) < self.slack(best_to[bj]))):
                        best_to[bj] = kk
            self.blossombestedges[c] = None
            self.bestedge[c] = -1
        self.blossombestedges[b] = [kk for kk in best_to if kk != -1]
        self.bestedge[b] = -1
        for kk in self.blossombestedges[b]:
            if self.bestedge[b] == -1 or self.slack(kk) < self.slack(self.bestedge[b]):
                self.bestedge[b] = kk

    def expand_blossom(self, b, endstage):
        for s in self.childs[b]:
            self.parent[s] = -1
            if s < self.n:
                self.inblossom[s] = s
            elif endstage and self.dual[s] == 0:
                self.expand_blossom(s, endstage)
            else:
                for u in self.leaves(s):
                    self.inblossom[u] = s
        if not endstage and self.label[b] == 2:
            # Relabel the children on the even path from the entry child to the base.
            entry = self.inblossom[self.endpoint[self.labelend[b] ^ 1]]
            j = self.childs[b].index(entry)
            if j & 1:
                j -= len(self.childs[b])
                step, off = 1, 0
            else:
                step, off = -1, 1
            p = self.labelend[b]
            endps = self.endps[b]
            while j != 0:
                # Relabel the T child, then step over the S child that follows.
                self.label[self.endpoint[p ^ 1]] = 0
                self.label[self.endpoint[endps[j - off] ^ off ^ 1]] = 0
                self.assign_label(self.endpoint[p ^ 1], 2, p)
                self.allowed[endps[j - off] // 2] = True
                j += step
                p = endps[j - off] ^ off
                self.allowed[p // 2] = True
                j += step
            bv = self.childs[b][j]
            self.label[self.endpoint[p ^ 1]] = self.label[bv] = 2
            self.labelend[self.endpoint[p ^ 1]] = self.labelend[bv] = p
            self.bestedge[bv] = -1
            j += step
            while self.childs[b][j] != entry:
                bv = self.childs[b][j]
                if self.label[bv] == 1:
                    j += step
                    continue
                v = next((u for u in self.leaves(bv) if self.label[u] != 0), None)
                if v is not None:
                    self.label[v] = 0
                    self.label[self.endpoint[self.mate[self.base[bv]]]] = 0
                    self.assign_label(v, 2, self.labelend[v])
                j += step
        self.label[b] = self.labelend[b] = -1
        self.childs[b] = []
        self.endps[b] = []
        self.base[b] = -1
        self.blossombestedges[b] = None
        self.bestedge[b] = -1
        self.unused.append(b)

    def augment_blossom(self, b, v):
        """Rotate blossom ``b`` so that its base becomes vertex ``v``, flipping the path."""
        t = v
        while self.parent[t] != b:
            t = self.parent[t]
        if t >= self.n:
            self.augment_blossom(t, v)
        i = j = self.childs[b].index(t)
        if i & 1:
            j -= len(self.childs[b])
            step, off = 1, 0
        else:
            step, off = -1, 1
        while j != 0:
            j += step
            t = self.childs[b][j]
            p = self.endps[b][j - off] ^ off
            if t >= self.n:
                self.augment_blossom(t, self.endpoint[p])
            j += step
            t = self.childs[b][j]
            if t >= self.n:
                self.augment_blossom(t, self.endpoint[p ^ 1])
            self.mate[self.endpoint[p]] = p ^ 1
            self.mate[self.endpoint[p ^ 1]] = p
        self.childs[b] = self.childs[b][i:] + self.childs[b][:i]
        self.endps[b] = self.endps[b][i:] + self.endps[b][:i]
        self.base[b] = self.base[self.childs[b][0]]

    def augment_matching(self, k):
        v, w, _ = self.edges[k]
        for s, p in ((v, 2 * k + 1), (w, 2 * k)):
            while True:
                bs = self.inblossom[s]
                if bs >= self.n:
                    self.augment_blossom(bs, s)
                self.mate[s] = p
                if self.labelend[bs] == -1:
                    break
                t = self.endpoint[self.labelend[bs]]
                bt = self.inblossom[t]
                s = self.endpoint[self.labelend[bt]]
                j = self.endpoint[self.labelend[bt] ^ 1]
                if bt >= self.n:
                    self.augment_blossom(bt, j)
                self.mate[j] = self.labelend[bt]
                p = self.labelend[bt] ^ 1

    # -- main loop --------------------------------------------------------
    def run(self):
        n = self.n
        for _ in range(n):
            self.label = [0] * (2 * n)
            self.bestedge = [-1] * (2 * n)
            for b in range(n, 2 * n):
                self.blossombestedges[b] = None
            self.allowed = [False] * len(self.edges)
            self.queue = []
            for v in range(n):
                if self.mate[v] == -1 and self.label[self.inblossom[v]] == 0:
                    self.assign_label(v, 1, -1)
            augmented = False
            while True:
                while self.queue and not augmented:
                    v = self.queue.pop()
                    for p in self.neighbend[v]:
                        k = p // 2
                        w = self.endpoint[p]
                        if self.inblossom[v] == self.inblossom[w]:
                            continue
                        if not self.allowed[k]:
                            ks = self.slack(k)
                            if ks <= 0:
                                self.allowed[k] = True
                        if self.allowed[k]:
                            if self.label[self.inblossom[w]] == 0:
                                self.assign_label(w, 2, p ^ 1)
                            elif self.label[self.inblossom[w]] == 1:
                                base = self.scan_blossom(v, w)
                                if base >= 0:
                                    self.add_blossom(base, k)
                                else:
                                    self.augment_matching(k)
                                    augmented = True
                                    break
                            elif self.label[w] == 0:
                                self.label[w] = 2
                                self.labelend[w] = p ^ 1
                        elif self.label[self.inblossom[w]] == 1:
                            b = self.inblossom[v]
                            if self.bestedge[b] == -1 or ks < self.slack(self.bestedge[b]):
                                self.bestedge[b] = k
                        elif self.label[w] == 0:
                            if self.bestedge[w] == -1 or ks < self.slack(self.bestedge[w]):
                                self.bestedge[w] = k
                if augmented:
                    break
                dtype, delta, dedge, dblossom = self._delta()
                for v in range(n):
                    lab = self.label[self.inblossom[v]]
                    if lab == 1:
                        self.dual[v] -= delta
                    elif lab == 2:
                        self.dual[v] += delta
                for b in range(n, 2 * n):
                    if self.base[b] >= 0 and self.parent[b] == -1:
                        if self.label[b] == 1:
                            self.dual[b] += delta
                        elif self.label[b] == 2:
                            self.dual[b] -= delta
                if dtype == 1:
                    break
                if dtype == 2:
                    self.allowed[dedge] = True
                    i, j, _ = self.edges[dedge]
                    if self.label[self.inblossom[i]] == 0:
                        i, j = j, i
                    self.queue.append(i)
                elif dtype == 3:
                    self.allowed[dedge] = True
                    self.queue.append(self.edges[dedge][0])
                else:
                    self.expand_blossom(dblossom, False)
            if not augmented:
                break
            for b in range(n, 2 * n):
                if (self.parent[b] == -1 and self.base[b] >= 0 and self.label[b] == 1
                        and self.dual[b] == 0):
                    self.expand_blossom(b, True)
        return [self.endpoint[p] if p >= 0 else -1 for p in self.mate]

    def _delta(self):
        n = self.n
        dtype, delta, dedge, dblossom = -1, None, -1, -1
        if not self.max_card:
            dtype, delta = 1, min(self.dual[:n])
        for v in range(n):
            if self.label[self.inblossom[v]] == 0 and self.bestedge[v] != -1:
                d = self.slack(self.bestedge[v])
                if dtype == -1 or d < delta:
                    dtype, delta, dedge = 2, d, self.bestedge[v]
        for b in range(2 * n):
            if self.parent[b] == -1 and self.label[b] == 1 and self.bestedge[b] != -1:
                ks = self.slack(self.bestedge[b])
                d = ks // 2 if self.integer else ks / 2.0
                if dtype == -1 or d < delta:
                    dtype, delta, dedge = 3, d, self.bestedge[b]
        for b in range(n, 2 * n):
            if (self.base[b] >= 0 and self.parent[b] == -1 and self.label[b] == 2
                    and (dtype == -1 or self.dual[b] < delta)):
                dtype, delta, dblossom = 4, self.dual[b], b
        if dtype == -1:
            # No further improvement possible: finish with a final dual update.
            dtype, delta = 1, max(0, min(self.dual[:n]))
        return dtype, delta, dedge, dblossom


def min_weight_perfect_matching(n: int, weights: Dict[Tuple[int, int], float]) -> List[Tuple[int, int]]:
    """Minimum-weight perfect matching of an ``n``-vertex graph given as {(i, j): w}.

    Infinite weights mean "no edge". Raises ``MatchingError`` when no perfect
    matching exists.
    """
    if n == 0:
        return []
    if n % 2:
        raise MatchingError("odd number of vertices")
    finite = [(i, j, w) for (i, j), w in sorted(weights.items()) if math.isfinite(w)]
    if not finite:
        raise MatchingError("no perfect matching")
    integer = all(isinstance(w, int) for *_, w in finite)
    top = max(w for *_, w in finite)
    # Turning costs into rewards keeps the optimum among maximum-cardinality matchings.
    shift = top + 1 if integer else top + 1.0
    mate = max_weight_matching([(i, j, shift - w) for i, j, w in finite], max_cardinality=True)
    mate += [-1] * (n - len(mate))
    if any(m < 0 for m in mate):
        raise MatchingError("no perfect matching")
    return [(i, m) for i, m in enumerate(mate) if i < m]


def matching_weight(pairs: Iterable[Tuple[int, int]], weights: Dict[Tuple[int, int], float]) -> float:
    vals = []
    for i, j in pairs:
        vals.append(weights[(i, j)] if (i, j) in weights else weights[(j, i)])
    return math.fsum(vals)
