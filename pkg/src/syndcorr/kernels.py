"""Hot loops, each in a numba-compiled and a pure numpy flavour.

The public names (``frame_propagate``, ``subset_odd_counts``, ``match_batch``,
``parity_dijkstra``, ``superset_pairs``, ``redecode_batch``) dispatch to the compiled version unless numba is missing or
disabled through ``SYNDCORR_DISABLE_NUMBA``. Both flavours return identical
results; ``IMPLEMENTATIONS`` exposes them side by side for tests and benchmarks.
"""

from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit

OP_H = 0
OP_CZ = 1
OP_M = 2
OP_NOISE = 3
OP_RX = 4
OP_RZ = 5

INF = np.inf


# ---------------------------------------------------------------------------
# Pauli frame propagation over bit-packed lanes


def _frame_propagate_loops(op_code, op_q0, op_q1, op_arg, ev_start, ev_q, ev_w,
                           ev_x, ev_z, n_qubits, n_words, n_records):
    x = np.zeros((n_qubits, n_words), dtype=np.uint64)
    z = np.zeros((n_qubits, n_words), dtype=np.uint64)
    rec = np.zeros((n_records, n_words), dtype=np.uint64)
    zero = np.uint64(0)
    for i in range(op_code.shape[0]):
        c = op_code[i]
        a = op_q0[i]
        if c == 0:
            for w in range(n_words):
                t = x[a, w]
                x[a, w] = z[a, w]
                z[a, w] = t
        elif c == 1:
            b = op_q1[i]
            for w in range(n_words):
                z[a, w] ^= x[b, w]
                z[b, w] ^= x[a, w]
        elif c == 2:
            m = op_arg[i]
            for w in range(n_words):
                rec[m, w] = x[a, w]
                z[a, w] = zero
        elif c == 3:
            loc = op_arg[i]
            for e in range(ev_start[loc], ev_start[loc + 1]):
                q = ev_q[e]
                w = ev_w[e]
                x[q, w] ^= ev_x[e]
                z[q, w] ^= ev_z[e]
        elif c == 4:
            m = op_arg[i]
            for w in range(n_words):
                rec[m, w] = x[a, w]
        elif c == 5:
            m = op_arg[i]
            for w in range(n_words):
                rec[m, w] = z[a, w]
    return rec


def _frame_propagate_numpy(op_code, op_q0, op_q1, op_arg, ev_start, ev_q, ev_w,
                           ev_x, ev_z, n_qubits, n_words, n_records):
    x = np.zeros((n_qubits, n_words), dtype=np.uint64)
    z = np.zeros((n_qubits, n_words), dtype=np.uint64)
    rec = np.zeros((n_records, n_words), dtype=np.uint64)
    for c, a, b, arg in zip(op_code.tolist(), op_q0.tolist(), op_q1.tolist(), op_arg.tolist()):
        if c == OP_H:
            tmp = x[a].copy()
            x[a] = z[a]
            z[a] = tmp
        elif c == OP_CZ:
            xa = x[a].copy()
            z[a] ^= x[b]
            z[b] ^= xa
        elif c == OP_M:
            rec[arg] = x[a]
            z[a] = 0
        elif c == OP_NOISE:
            s, e = ev_start[arg], ev_start[arg + 1]
            if e > s:
                np.bitwise_xor.at(x, (ev_q[s:e], ev_w[s:e]), ev_x[s:e])
                np.bitwise_xor.at(z, (ev_q[s:e], ev_w[s:e]), ev_z[s:e])
        elif c == OP_RX:
            rec[arg] = x[a]
        elif c == OP_RZ:
            rec[arg] = z[a]
    return rec


# ---------------------------------------------------------------------------
# Parities of all subsets of a detector window (Gray-code walk)


def _popcount64(v):
    v = v - ((v >> np.uint64(1)) & np.uint64(0x5555555555555555))
    v = (v & np.uint64(0x3333333333333333)) + ((v >> np.uint64(2)) & np.uint64(0x3333333333333333))
    v = (v + (v >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (v * np.uint64(0x0101010101010101)) >> np.uint64(56)


_popcount64_jit = njit(_popcount64)


def _subset_odd_counts_loops(packed, dets, block_words):
    k = dets.shape[0]
    n_words = packed.shape[1]
    n_blocks = (n_words + block_words - 1) // block_words
    out = np.zeros((1 << k, n_blocks), dtype=np.int64)
    acc = np.zeros(n_words, dtype=np.uint64)
    for i in range(1, 1 << k):
        b = 0
        t = i
        while (t & 1) == 0:
            t >>= 1
            b += 1
        row = dets[b]
        g = i ^ (i >> 1)
        for blk in range(n_blocks):
            lo = blk * block_words
            hi = min(lo + block_words, n_words)
            s = 0
            for w in range(lo, hi):
                acc[w] ^= packed[row, w]
                s += _popcount64_jit(acc[w])
            out[g, blk] = s
    return out


def _subset_odd_counts_numpy(packed, dets, block_words):
    k = len(dets)
    n_words = packed.shape[1]
    starts = np.arange(0, n_words, block_words)
    out = np.zeros((1 << k, len(starts)), dtype=np.int64)
    acc = np.zeros(n_words, dtype=np.uint64)
    for i in range(1, 1 << k):
        b = (i & -i).bit_length() - 1
        acc ^= packed[dets[b]]
        g = i ^ (i >> 1)
        out[g] = np.add.reduceat(np.bitwise_count(acc).astype(np.int64), starts)
    return out


# ---------------------------------------------------------------------------
# Exact minimum-weight matching with boundary by subset dynamic programming


def _match_batch_loops(offsets, nodes, W, Wb, P, Pb, max_k):
    n_shots = offsets.shape[0] - 1
    flips = np.zeros(n_shots, dtype=np.uint8)
    weights = np.zeros(n_shots, dtype=np.float64)
    status = np.zeros(n_shots, dtype=np.uint8)
    mates = np.full(nodes.shape[0], -2, dtype=np.int64)
    size = 1 << max_k
    f = np.empty(size, dtype=np.float64)
    par = np.empty(size, dtype=np.uint8)
    pick = np.empty(size, dtype=np.int64)
    for s in range(n_shots):
        a = offsets[s]
        k = offsets[s + 1] - a
        if k == 0:
            continue
        w = np.empty((k, k))
        p = np.empty((k, k), dtype=np.uint8)
        wb = np.empty(k)
        pb = np.empty(k, dtype=np.uint8)
        for i in range(k):
            ni = nodes[a + i]
            wb[i] = Wb[ni]
            pb[i] = Pb[ni]
            for j in range(k):
                w[i, j] = W[ni, nodes[a + j]]
                p[i, j] = P[ni, nodes[a + j]]
        tot, fl, ok = _match_components(k, w, wb, p, pb, f, par, pick, mates[a:a + k], max_k)
        if not ok:
            status[s] = 1
            for i in range(k):
                mates[a + i] = -2
            continue
        flips[s] = fl
        weights[s] = tot
    return flips, weights, status, mates


def _match_batch_numpy(offsets, nodes, W, Wb, P, Pb, max_k):
    n_shots = len(offsets) - 1
    flips = np.zeros(n_shots, dtype=np.uint8)
    weights = np.zeros(n_shots, dtype=np.float64)
    status = np.zeros(n_shots, dtype=np.uint8)
    mates = np.full(len(nodes), -2, dtype=np.int64)
    f = np.empty(1 << max_k)
    par = np.empty(1 << max_k, dtype=np.uint8)
    pick = np.empty(1 << max_k, dtype=np.int64)
    for s in range(n_shots):
        a, b = int(offsets[s]), int(offsets[s + 1])
        if b == a:
            continue
        idx = nodes[a:b]
        tot, fl, ok = _match_components_py(b - a, W[np.ix_(idx, idx)], Wb[idx], P[np.ix_(idx, idx)],
                                           Pb[idx], f, par, pick, mates[a:b], max_k)
        if not ok:
            status[s] = 1
            mates[a:b] = -2
            continue
        flips[s] = fl
        weights[s] = tot
    return flips, weights, status, mates


# ---------------------------------------------------------------------------
# Shortest paths over (node, parity) states


def _parity_dijkstra_loops(W, P, sources, passable):
    V = W.shape[0]
    S = sources.shape[0]
    dist = np.full((S, V, 2), np.inf)
    for si in range(S):
        s = sources[si]
        done = np.zeros((V, 2), dtype=np.bool_)
        dist[si, s, 0] = 0.0
        for _ in range(2 * V):
            best = np.inf
            u = -1
            pa = 0
            for v in range(V):
                for b in range(2):
                    if not done[v, b] and dist[si, v, b] < best:
                        best = dist[si, v, b]
                        u = v
                        pa = b
            if u < 0:
                break
            done[u, pa] = True
            if u != s and not passable[u]:
                continue
            for v in range(V):
                w = W[u, v]
                if w < np.inf:
                    nd = best + w
                    nb = pa ^ P[u, v]
                    if nd < dist[si, v, nb]:
                        dist[si, v, nb] = nd
    return dist


def _parity_dijkstra_numpy(W, P, sources, passable):
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import dijkstra

    V = W.shape[0]
    rows, cols = np.nonzero(np.isfinite(W))
    keep = passable[rows]
    data = W[rows, cols]
    par = P[rows, cols].astype(np.int64)
    # Non-passable nodes keep their outgoing edges only when they are the
    # source; handled by a second pass below.
    src_rows, src_cols, src_data, src_par = rows, cols, data, par
    rows, cols, data, par = rows[keep], cols[keep], data[keep], par[keep]
    dist = np.full((len(sources), V, 2), np.inf)
    for si, s in enumerate(sources):
        extra = (src_rows == s) & ~passable[src_rows]
        r = np.concatenate([rows, src_rows[extra]])
        c = np.concatenate([cols, src_cols[extra]])
        d = np.concatenate([data, src_data[extra]])
        p = np.concatenate([par, src_par[extra]])
        # state (v, b) -> index 2 v + b
        rr = np.concatenate([2 * r, 2 * r + 1])
        cc = np.concatenate([2 * c + p, 2 * c + (1 - p)])
        dd = np.concatenate([d, d])
        # zero-weight edges vanish in sparse storage; nudge them to the
        # smallest positive float, which changes no sum at double precision
        dd = np.where(dd == 0.0, np.finfo(float).tiny, dd)
        g = csr_matrix((dd, (rr, cc)), shape=(2 * V, 2 * V))
        res = dijkstra(g, directed=True, indices=2 * int(s))
        res[res == np.finfo(float).tiny] = 0.0
        dist[si] = res.reshape(V, 2)
    return dist


# ---------------------------------------------------------------------------
# Strict-subset pairs inside detector windows


def _superset_pairs_loops(home_masks, home_ids, sid_table):
    total = 0
    for c in range(home_masks.shape[0]):
        m = home_masks[c]
        n = 0
        while m:
            m &= m - 1
            n += 1
        total += (1 << n) - 2
    rows = np.empty(max(total, 0), dtype=np.int64)
    cols = np.empty(max(total, 0), dtype=np.int64)
    k = 0
    for c in range(home_masks.shape[0]):
        m = home_masks[c]
        sub = (m - 1) & m
        while sub > 0:
            s = sid_table[sub]
            if s >= 0:
                rows[k] = s
                cols[k] = home_ids[c]
                k += 1
            sub = (sub - 1) & m
    return rows[:k], cols[:k]


def _superset_pairs_numpy(home_masks, home_ids, sid_table):
    subs = np.arange(1, sid_table.shape[0], dtype=np.int64)
    rows, cols = [], []
    for m, cid in zip(home_masks.tolist(), home_ids.tolist()):
        sel = subs[((subs & ~m) == 0) & (subs != m)]
        s = sid_table[sel]
        s = s[s >= 0]
        rows.append(s)
        cols.append(np.full(s.shape[0], cid, dtype=np.int64))
    if not rows:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(rows).astype(np.int64), np.concatenate(cols)


# ---------------------------------------------------------------------------
# Re-decoding with a few modified edges (correlated decoding)


def _heap_push(hk, hv, size, key, val):
    i = size
    hk[i] = key
    hv[i] = val
    while i > 0:
        up = (i - 1) >> 1
        if hk[up] < hk[i] or (hk[up] == hk[i] and hv[up] <= hv[i]):
            break
        hk[up], hk[i] = hk[i], hk[up]
        hv[up], hv[i] = hv[i], hv[up]
        i = up
    return size + 1


def _heap_pop(hk, hv, size):
    last = size - 1
    hk[0] = hk[last]
    hv[0] = hv[last]
    i = 0
    while True:
        a = 2 * i + 1
        if a >= last:
            break
        b = a + 1
        c = a
        if b < last and (hk[b] < hk[a] or (hk[b] == hk[a] and hv[b] < hv[a])):
            c = b
        if hk[i] < hk[c] or (hk[i] == hk[c] and hv[i] <= hv[c]):
            break
        hk[c], hk[i] = hk[i], hk[c]
        hv[c], hv[i] = hv[i], hv[c]
        i = c
    return last


def _sssp_parity(ptr, nbr, ew, epar, src, n_real, dist, hk, hv, target):
    """Heap Dijkstra over (node, parity) states; nodes >= n_real are sinks.

    Stops once both parities of ``target`` are final (pass -1 for a full run).
    """
    dist[:, :] = np.inf
    dist[src, 0] = 0.0
    size = _heap_push(hk, hv, 0, 0.0, 2 * src)
    while size > 0:
        d = hk[0]
        s = hv[0]
        if target >= 0 and d > min(dist[target, 0], dist[target, 1]):
            break
        size = _heap_pop(hk, hv, size)
        v = s >> 1
        b = s & 1
        if d > dist[v, b]:
            continue
        if v >= n_real and v != src:
            continue
        for e in range(ptr[v], ptr[v + 1]):
            u = nbr[e]
            nd = d + ew[e]
            nb = b ^ epar[e]
            if nd < dist[u, nb]:
                dist[u, nb] = nd
                size = _heap_push(hk, hv, size, nd, 2 * u + nb)


def _dp_match(k, w, wb, p, pb, f, par, pick, mates):
    """Minimum-weight matching of k defects with free boundary; fills ``mates``, returns (weight, parity)."""
    f[0] = 0.0
    par[0] = 0
    for mask in range(1, 1 << k):
        i = 0
        while ((mask >> i) & 1) == 0:
            i += 1
        rest = mask ^ (1 << i)
        best = f[rest] + wb[i]
        bp = par[rest] ^ pb[i]
        bj = -1
        for j in range(i + 1, k):
            if (rest >> j) & 1:
                v = f[rest ^ (1 << j)] + w[i, j]
                if v < best:
                    best = v
                    bp = par[rest ^ (1 << j)] ^ p[i, j]
                    bj = j
        f[mask] = best
        par[mask] = bp
        pick[mask] = bj
    full = (1 << k) - 1
    mask = full
    while mask:
        i = 0
        while ((mask >> i) & 1) == 0:
            i += 1
        j = pick[mask]
        if j < 0:
            mates[i] = -1
            mask ^= 1 << i
        else:
            mates[i] = j
            mates[j] = i
            mask ^= (1 << i) | (1 << j)
    return f[full], par[full]


def _make_match_components(dp):
    def _match_components(k, w, wb, p, pb, f, par, pick, mates, max_k):
        """Exact matching split into independent clusters.

        Two defects can only profit from being paired when ``w[i, j] < wb[i] +
        wb[j]``; components of that relation are matched separately. Returns
        (weight, parity, ok); ok is False when a component exceeds ``max_k``.
        """
        lab = np.arange(k)
        for i in range(k):
            for j in range(i + 1, k):
                if w[i, j] < wb[i] + wb[j]:
                    a = i
                    while lab[a] != a:
                        a = lab[a]
                    b = j
                    while lab[b] != b:
                        b = lab[b]
                    if a != b:
                        if a < b:
                            lab[b] = a
                        else:
                            lab[a] = b
        root = np.empty(k, dtype=np.int64)
        for i in range(k):
            a = i
            while lab[a] != a:
                a = lab[a]
            root[i] = a
        total = 0.0
        parity = 0
        members = np.empty(k, dtype=np.int64)
        for r in range(k):
            c = 0
            for i in range(k):
                if root[i] == r:
                    members[c] = i
                    c += 1
            if c == 0:
                continue
            if c > max_k:
                return total, parity, False
            sw = np.empty((c, c))
            sp = np.empty((c, c), dtype=np.uint8)
            swb = np.empty(c)
            spb = np.empty(c, dtype=np.uint8)
            for a in range(c):
                swb[a] = wb[members[a]]
                spb[a] = pb[members[a]]
                for b in range(c):
                    sw[a, b] = w[members[a], members[b]]
                    sp[a, b] = p[members[a], members[b]]
            sm = np.empty(c, dtype=np.int64)
            t, fl = dp(c, sw, swb, sp, spb, f, par, pick, sm)
            total += t
            parity ^= fl
            for a in range(c):
                mates[members[a]] = -1 if sm[a] < 0 else members[sm[a]]
        return total, parity, True
    return _match_components


_match_components_py = _make_match_components(_dp_match)


def _modified_weights(dnodes, upd_edge, upd_p, G, edge_i, edge_j, edge_p, n_real):
    """Matching weights among ``dnodes`` (and to the better boundary) after replacing a few edge probabilities."""
    k = dnodes.shape[0]
    nu = upd_edge.shape[0]
    r = 0
    for t in range(nu):
        r += 1 if edge_j[upd_edge[t]] >= n_real else 2
    ucol = np.empty(r, dtype=np.int64)
    vrow = np.empty(r, dtype=np.int64)
    dlt = np.empty(r)
    c = 0
    for t in range(nu):
        e = upd_edge[t]
        i = edge_i[e]
        j = edge_j[e]
        dd = upd_p[t] - edge_p[e]
        ucol[c] = i
        vrow[c] = j
        dlt[c] = dd
        c += 1
        if j < n_real:
            ucol[c] = j
            vrow[c] = i
            dlt[c] = dd
            c += 1
    # Woodbury: (1 - A - U V^T)^-1 = G + G U (1 - V^T G U)^-1 V^T G
    M = np.eye(r)
    for a in range(r):
        for b in range(r):
            M[a, b] -= G[vrow[a], ucol[b]] * dlt[b]
    nt = k + 2
    tgt = np.empty(nt, dtype=np.int64)
    for a in range(k):
        tgt[a] = dnodes[a]
    tgt[k] = n_real
    tgt[k + 1] = n_real + 1
    VG = np.empty((r, nt))
    for a in range(r):
        for b in range(nt):
            VG[a, b] = G[vrow[a], tgt[b]]
    X = np.linalg.solve(M, VG) if r > 0 else np.zeros((0, nt))
    w = np.full((k, k), np.inf)
    wb2 = np.full((k, 2), np.inf)
    for a in range(k):
        ga = dnodes[a]
        for b in range(nt):
            if b < k and b <= a:
                continue
            val = G[ga, tgt[b]]
            for s_ in range(r):
                val += G[ga, ucol[s_]] * dlt[s_] * X[s_, b]
            wv = -np.log(val) if val > 0 else np.inf
            if b < k:
                w[a, b] = wv
                w[b, a] = wv
            else:
                wb2[a, b - k] = wv
    wb = np.empty(k)
    bsel = np.empty(k, dtype=np.int64)
    for a in range(k):
        sel = 1 if wb2[a, 1] < wb2[a, 0] else 0
        wb[a] = wb2[a, sel]
        bsel[a] = sel
    return w, wb, bsel


def _redecode_batch_loops(offsets, nodes, upd_off, upd_edge, upd_p, G, ptr, nbr, ew, epar,
                          edge_i, edge_j, edge_p, pos_a, pos_b, n_real, max_k):
    n_shots = offsets.shape[0] - 1
    flips = np.zeros(n_shots, dtype=np.uint8)
    weights = np.zeros(n_shots)
    status = np.zeros(n_shots, dtype=np.uint8)
    mates = np.full(nodes.shape[0], -2, dtype=np.int64)
    pick = np.empty(1 << max_k, dtype=np.int64)
    V = ptr.shape[0] - 1
    dist = np.empty((V, 2))
    cap = 2 * nbr.shape[0] + 4
    hk = np.empty(cap)
    hv = np.empty(cap, dtype=np.int64)
    ew_local = np.empty(ew.shape[0])
    f = np.empty(1 << max_k)
    par = np.empty(1 << max_k, dtype=np.uint8)
    kmax = 0
    for s in range(n_shots):
        kmax = max(kmax, offsets[s + 1] - offsets[s])
    zp = np.zeros((kmax, kmax), dtype=np.uint8)
    zpb = np.zeros(kmax, dtype=np.uint8)
    for s in range(n_shots):
        a = offsets[s]
        k = offsets[s + 1] - a
        if k == 0:
            continue
        u0 = upd_off[s]
        u1 = upd_off[s + 1]
        dn = nodes[a:a + k]
        w, wb, bsel = _modified_weights(dn, upd_edge[u0:u1], upd_p[u0:u1], G, edge_i, edge_j, edge_p, n_real)
        # parities do not steer the matching, so they are only needed for matched pairs
        tot, fl, ok = _match_components(k, w, wb, zp, zpb, f, par, pick, mates[a:a + k], max_k)
        if not ok:
            status[s] = 1
            continue
        for e in range(ew.shape[0]):
            ew_local[e] = ew[e]
        for t in range(u0, u1):
            e = upd_edge[t]
            nw = -np.log(upd_p[t]) if upd_p[t] > 0 else np.inf
            ew_local[pos_a[e]] = nw
            if pos_b[e] >= 0:
                ew_local[pos_b[e]] = nw
        fl = 0
        for i in range(k):
            j = mates[a + i]
            if j >= 0 and j < i:
                continue
            tgt = dn[j] if j >= 0 else n_real + bsel[i]
            _sssp_parity(ptr, nbr, ew_local, epar, dn[i], n_real, dist, hk, hv, tgt)
            if dist[tgt, 1] < dist[tgt, 0]:
                fl ^= 1
        weights[s] = tot
        flips[s] = fl
    return flips, weights, status, mates


def modified_tables_numpy(dnodes, upd_edge, upd_p, G, ptr, nbr, ew, epar, edge_i, edge_j, edge_p,
                          pos_a, pos_b, n_real):
    """Reference version of the per-shot update: rebuild A, invert, Dijkstra with scipy."""
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import dijkstra

    m = G.shape[0]
    k = len(dnodes)
    A = np.eye(m) - np.linalg.inv(G)
    for e, pn in zip(upd_edge, upd_p):
        i, j = edge_i[e], edge_j[e]
        A[i, j] = pn
        if j < n_real:
            A[j, i] = pn
    S = np.linalg.inv(np.eye(m) - A) - np.eye(m)
    with np.errstate(divide="ignore"):
        Wfull = np.where(S > 0, -np.log(np.where(S > 0, S, 1.0)), np.inf)
    ewl = ew.copy()
    for e, pn in zip(upd_edge, upd_p):
        nw = -np.log(pn) if pn > 0 else np.inf
        ewl[pos_a[e]] = nw
        if pos_b[e] >= 0:
            ewl[pos_b[e]] = nw
    rows = np.repeat(np.arange(m), np.diff(ptr))
    keep = (rows < n_real) & np.isfinite(ewl)
    r, c, d, q = rows[keep], nbr[keep], ewl[keep], epar[keep].astype(np.int64)
    rr = np.concatenate([2 * r, 2 * r + 1])
    cc = np.concatenate([2 * c + q, 2 * c + 1 - q])
    dd = np.concatenate([d, d])
    dd = np.where(dd == 0.0, np.finfo(float).tiny, dd)
    g = csr_matrix((dd, (rr, cc)), shape=(2 * m, 2 * m))
    dist = dijkstra(g, directed=True, indices=2 * np.asarray(dnodes, dtype=np.int64)).reshape(k, m, 2)
    w = np.full((k, k), np.inf)
    p = np.zeros((k, k), dtype=np.uint8)
    wb = np.empty(k)
    pb = np.zeros(k, dtype=np.uint8)
    for a in range(k):
        for b in range(a + 1, k):
            w[a, b] = w[b, a] = Wfull[dnodes[a], dnodes[b]]
            p[a, b] = p[b, a] = 1 if dist[a, dnodes[b], 1] < dist[a, dnodes[b], 0] else 0
        wb2 = Wfull[dnodes[a], n_real:n_real + 2]
        sel = 1 if wb2[1] < wb2[0] else 0
        wb[a] = wb2[sel]
        pb[a] = 1 if dist[a, n_real + sel, 1] < dist[a, n_real + sel, 0] else 0
    return w, wb, p, pb


def _redecode_batch_numpy(offsets, nodes, upd_off, upd_edge, upd_p, G, ptr, nbr, ew, epar,
                          edge_i, edge_j, edge_p, pos_a, pos_b, n_real, max_k):
    n_shots = len(offsets) - 1
    flips = np.zeros(n_shots, dtype=np.uint8)
    weights = np.zeros(n_shots)
    status = np.zeros(n_shots, dtype=np.uint8)
    mates = np.full(len(nodes), -2, dtype=np.int64)
    pick = np.empty(1 << max_k, dtype=np.int64)
    f = np.empty(1 << max_k)
    par = np.empty(1 << max_k, dtype=np.uint8)
    for s in range(n_shots):
        a, b = int(offsets[s]), int(offsets[s + 1])
        k = b - a
        if k == 0:
            continue
        u0, u1 = int(upd_off[s]), int(upd_off[s + 1])
        w, wb, p, pb = modified_tables_numpy(nodes[a:b], upd_edge[u0:u1], upd_p[u0:u1], G, ptr, nbr,
                                             ew, epar, edge_i, edge_j, edge_p, pos_a, pos_b, n_real)
        tot, fl, ok = _match_components_py(k, w, wb, p, pb, f, par, pick, mates[a:b], max_k)
        if not ok:
            status[s] = 1
            continue
        weights[s], flips[s] = tot, fl
    return flips, weights, status, mates


if USE_NUMBA:
    _heap_push = njit(_heap_push)
    _heap_pop = njit(_heap_pop)
    _sssp_parity = njit(_sssp_parity)
    _dp_match = njit(_dp_match)
    _match_components = njit(_make_match_components(_dp_match))
    _modified_weights = njit(_modified_weights)
    redecode_batch = njit(_redecode_batch_loops)
    frame_propagate = njit(_frame_propagate_loops)
    subset_odd_counts = njit(_subset_odd_counts_loops)
    match_batch = njit(_match_batch_loops)
    parity_dijkstra = njit(_parity_dijkstra_loops)
    superset_pairs = njit(_superset_pairs_loops)
    BACKEND = "numba"
else:
    frame_propagate = _frame_propagate_numpy
    subset_odd_counts = _subset_odd_counts_numpy
    match_batch = _match_batch_numpy
    parity_dijkstra = _parity_dijkstra_numpy
    superset_pairs = _superset_pairs_numpy
    redecode_batch = _redecode_batch_numpy
    _match_components = _match_components_py
    BACKEND = "numpy"

IMPLEMENTATIONS = {
    "frame_propagate": {"numpy": _frame_propagate_numpy},
    "subset_odd_counts": {"numpy": _subset_odd_counts_numpy},
    "match_batch": {"numpy": _match_batch_numpy},
    "parity_dijkstra": {"numpy": _parity_dijkstra_numpy},
    "superset_pairs": {"numpy": _superset_pairs_numpy},
    "redecode_batch": {"numpy": _redecode_batch_numpy},
}
if USE_NUMBA:
    IMPLEMENTATIONS["frame_propagate"]["numba"] = frame_propagate
    IMPLEMENTATIONS["subset_odd_counts"]["numba"] = subset_odd_counts
    IMPLEMENTATIONS["match_batch"]["numba"] = match_batch
    IMPLEMENTATIONS["parity_dijkstra"]["numba"] = parity_dijkstra
    IMPLEMENTATIONS["superset_pairs"]["numba"] = superset_pairs
    IMPLEMENTATIONS["redecode_batch"]["numba"] = redecode_batch
