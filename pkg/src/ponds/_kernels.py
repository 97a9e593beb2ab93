"""Numba kernels shared by the lattice, weights, invasion and percolation modules.

Everything here works on flat numpy arrays and packed integer codes so the hot
loops (frontier heaps, union-find sweeps, flood fills) run at native speed.
The pure-Python modules wrap these kernels with friendlier types; explicit
weight tables take slower pure-Python paths instead.

Conventions used throughout:
  - an edge is (x, y, o) with o=0 for <(x,y),(x+1,y)> and o=1 for <(x,y),(x,y+1)>,
    i.e. the lexicographically smaller endpoint plus an orientation bit;
  - the canonical edge id packs zigzag(x) and zigzag(y) with the orientation bit,
    so ids are independent of any simulation box;
  - inside a box of half-width M, vertices are indexed (x+M)*(2M+1)+(y+M).
"""

import numpy as np
from numba import njit

# splitmix64 constants
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_WHITEN = np.uint64(0x6A09E667F3BCC909)
_R30 = np.uint64(30)
_R27 = np.uint64(27)
_R31 = np.uint64(31)
_R11 = np.uint64(11)
_ONE = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53

MAX_RUNGS = 24
_NO_VERTEX = np.int32(2147483647)  # record marker for loop-closing edges

COORD_LIMIT = 1 << 30  # |x|,|y| below this keep packed ids inside int64


# ----------------------------------------------------------------------
# counter-based weight PRF
# ----------------------------------------------------------------------

@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> _R30)) * _MIX1
    z = (z ^ (z >> _R27)) * _MIX2
    return z ^ (z >> _R31)


@njit(cache=True)
def key_from_seed(seed):
    """Whitened uint64 field key for a 64-bit seed."""
    return _mix64(np.uint64(seed) ^ _WHITEN)


@njit(cache=True)
def child_seed(seed, index):
    """Derived 63-bit seed for stream `index`; pure function of (seed, index)."""
    k = _mix64(key_from_seed(seed) + (np.uint64(index) + _ONE) * _GOLDEN)
    return np.int64(k >> _ONE)


@njit(cache=True, inline="always")
def edge_weight(key, eid):
    """Uniform[0,1) weight of the edge with canonical id `eid`, 53-bit resolution."""
    z = _mix64(key + (np.uint64(eid) + _ONE) * _GOLDEN)
    return np.float64(z >> _R11) * _INV53


@njit(cache=True)
def edge_weight_from_seed(seed, eid):
    """Weight lookup with the seed-to-key derivation done inside the kernel."""
    return edge_weight(key_from_seed(seed), eid)


@njit(cache=True)
def edge_weights_from_seed_bulk(seed, eids):
    key = key_from_seed(seed)
    out = np.empty(eids.size, np.float64)
    for i in range(eids.size):
        out[i] = edge_weight(key, eids[i])
    return out


# ----------------------------------------------------------------------
# canonical edge ids
# ----------------------------------------------------------------------

@njit(cache=True, inline="always")
def _zigzag(v):
    if v >= 0:
        return np.uint64(2 * v)
    return np.uint64(-2 * v - 1)


@njit(cache=True, inline="always")
def pack_eid(x, y, o):
    return np.int64((_zigzag(x) << np.uint64(32)) | (_zigzag(y) << _ONE) | np.uint64(o))


@njit(cache=True, inline="always")
def _unzig(z):
    if z & _ONE:
        return -np.int64((z + _ONE) >> _ONE)
    return np.int64(z >> _ONE)


@njit(cache=True, inline="always")
def unpack_eid(eid):
    u = np.uint64(eid)
    x = _unzig(u >> np.uint64(32))
    y = _unzig((u >> _ONE) & np.uint64(0x7FFFFFFF))
    o = np.int64(u & _ONE)
    return x, y, o


@njit(cache=True)
def pack_eids_bulk(xs, ys, os):
    out = np.empty(xs.size, np.int64)
    for i in range(xs.size):
        out[i] = pack_eid(xs[i], ys[i], os[i])
    return out


@njit(cache=True, inline="always")
def weight_xyo(key, x, y, o):
    return edge_weight(key, pack_eid(x, y, o))


# ----------------------------------------------------------------------
# invasion engine
# ----------------------------------------------------------------------
# Binary min-heap keyed by (weight, eid); lazy nothing: every edge enters the
# heap exactly once, when its first endpoint is invaded, so a popped edge is
# always the frontier minimum. Popping an edge whose both endpoints are already
# invaded closes a loop and adds no vertex.

@njit(cache=True)
def _invade_rung(key, sx, sy, M):
    """Run one invasion from (sx,sy) inside B(M) until it first touches dB(M).

    Returns (eids, ws, vxs, vys, nsteps, touched). Record i describes the
    (i+1)-th invaded edge; vxs/vys give the newly added vertex or _NO_VERTEX
    for a loop-closing edge.
    """
    W = 2 * M + 1
    visited = np.zeros(W * W, np.uint8)

    hcap = 1024
    hw = np.empty(hcap, np.float64)
    heid = np.empty(hcap, np.int64)
    hn = 0

    rcap = 1024
    rec_eid = np.empty(rcap, np.int64)
    rec_w = np.empty(rcap, np.float64)
    rec_vx = np.empty(rcap, np.int32)
    rec_vy = np.empty(rcap, np.int32)
    rn = 0

    visited[(sx + M) * W + (sy + M)] = 1

    # seed the frontier with the start vertex, then loop: pop min, invade,
    # push the new vertex's edges
    cx, cy = sx, sy
    need_push = True
    while True:
        if need_push:
            # push the edges of (cx, cy) whose far endpoint is inside B(M)
            # and not yet invaded; edges to invaded vertices are already queued
            need_push = False
            for d in range(4):
                if d == 0:
                    ex, ey, eo, ox, oy = cx, cy, 0, cx + 1, cy
                elif d == 1:
                    ex, ey, eo, ox, oy = cx, cy, 1, cx, cy + 1
                elif d == 2:
                    ex, ey, eo, ox, oy = cx - 1, cy, 0, cx - 1, cy
                else:
                    ex, ey, eo, ox, oy = cx, cy - 1, 1, cx, cy - 1
                if ox < -M or ox > M or oy < -M or oy > M:
                    continue
                if visited[(ox + M) * W + (oy + M)]:
                    continue
                if hn == hcap:
                    hcap *= 2
                    nhw = np.empty(hcap, np.float64); nhw[:hn] = hw[:hn]; hw = nhw
                    nhe = np.empty(hcap, np.int64); nhe[:hn] = heid[:hn]; heid = nhe
                eid = pack_eid(ex, ey, eo)
                w = edge_weight(key, eid)
                i = hn
                hn += 1
                while i > 0:
                    p = (i - 1) >> 1
                    if hw[p] < w or (hw[p] == w and heid[p] < eid):
                        break
                    hw[i] = hw[p]; heid[i] = heid[p]
                    i = p
                hw[i] = w; heid[i] = eid

        if hn == 0:
            # whole clipped box invaded without touching the boundary; only
            # possible for degenerate boxes, callers treat it as exhaustion
            return rec_eid[:rn], rec_w[:rn], rec_vx[:rn], rec_vy[:rn], rn, False

        # pop the frontier minimum
        w = hw[0]; eid = heid[0]
        hn -= 1
        if hn > 0:
            lw = hw[hn]; le = heid[hn]
            i = 0
            while True:
                c = 2 * i + 1
                if c >= hn:
                    break
                r = c + 1
                if r < hn and (hw[r] < hw[c] or (hw[r] == hw[c] and heid[r] < heid[c])):
                    c = r
                if hw[c] < lw or (hw[c] == lw and heid[c] < le):
                    hw[i] = hw[c]; heid[i] = heid[c]
                    i = c
                else:
                    break
            hw[i] = lw; heid[i] = le

        ex, ey, eo = unpack_eid(eid)
        ux, uy = ex, ey
        if eo == 0:
            vx, vy = ex + 1, ey
        else:
            vx, vy = ex, ey + 1

        if rn == rcap:
            rcap *= 2
            nre = np.empty(rcap, np.int64); nre[:rn] = rec_eid[:rn]; rec_eid = nre
            nrw = np.empty(rcap, np.float64); nrw[:rn] = rec_w[:rn]; rec_w = nrw
            nrx = np.empty(rcap, np.int32); nrx[:rn] = rec_vx[:rn]; rec_vx = nrx
            nry = np.empty(rcap, np.int32); nry[:rn] = rec_vy[:rn]; rec_vy = nry

        uvis = visited[(ux + M) * W + (uy + M)]
        vvis = visited[(vx + M) * W + (vy + M)]
        if uvis and vvis:
            # loop-closing edge: invaded, no new vertex, frontier unchanged
            rec_eid[rn] = eid; rec_w[rn] = w
            rec_vx[rn] = _NO_VERTEX; rec_vy[rn] = _NO_VERTEX
            rn += 1
            continue
        if uvis:
            nx, ny = vx, vy
        else:
            nx, ny = ux, uy
        visited[(nx + M) * W + (ny + M)] = 1
        rec_eid[rn] = eid; rec_w[rn] = w
        rec_vx[rn] = np.int32(nx); rec_vy[rn] = np.int32(ny)
        rn += 1
        ax = nx if nx >= 0 else -nx
        ay = ny if ny >= 0 else -ny
        if ax == M or ay == M:
            return rec_eid[:rn], rec_w[:rn], rec_vx[:rn], rec_vy[:rn], rn, True
        cx, cy = nx, ny
        need_push = True


@njit(cache=True)
def _candidate_stats(rec_w, rec_vx, rec_vy, rn, sx, sy):
    """Argmax record index plus L-inf/L1 radii and volume of the pre-argmax region."""
    a = 0
    for i in range(1, rn):
        if rec_w[i] > rec_w[a]:
            a = i
    asx = sx if sx >= 0 else -sx
    asy = sy if sy >= 0 else -sy
    maxlinf = asx if asx > asy else asy
    maxl1 = asx + asy
    vol = 1
    for i in range(a):
        if rec_vx[i] == _NO_VERTEX:
            continue
        ax = rec_vx[i] if rec_vx[i] >= 0 else -rec_vx[i]
        ay = rec_vy[i] if rec_vy[i] >= 0 else -rec_vy[i]
        linf = ax if ax > ay else ay
        if linf > maxlinf:
            maxlinf = linf
        l1 = ax + ay
        if l1 > maxl1:
            maxl1 = l1
        vol += 1
    return a, maxlinf, maxl1, vol


@njit(cache=True)
def _has_duplicate_weights(rec_w, rn):
    if rn < 2:
        return False
    ws = np.sort(rec_w[:rn].copy())
    for i in range(1, rn):
        if ws[i] == ws[i - 1]:
            return True
    return False


@njit(cache=True, nogil=True)
def pond_scalars(seed, sx, sy, m0, mmax, margin, require_sup):
    """Adaptive first-pond extraction, scalar results only.

    Doubles the box until the candidate pond fits in B(M//margin - 1) (and,
    when require_sup is set, its level exceeds 1/2). Returns
    (tau, outlet_eid, radius_l1, radius_linf, volume, censored, m_used,
     rung_levels, n_rungs, dup_weights).
    """
    key = key_from_seed(seed)
    levels = np.full(MAX_RUNGS, np.nan)
    M = m0
    r = 0
    while True:
        rec_eid, rec_w, rec_vx, rec_vy, rn, touched = _invade_rung(key, sx, sy, M)
        if not touched:
            return np.nan, np.int64(-1), -1, -1, -1, np.uint8(1), M, levels, r + 1, False
        a, maxlinf, maxl1, vol = _candidate_stats(rec_w, rec_vx, rec_vy, rn, sx, sy)
        tau = rec_w[a]
        levels[r] = tau
        fits = maxlinf <= M // margin - 1
        sup = (not require_sup) or (tau > 0.5)
        accept = fits and sup
        if accept or M >= mmax or r + 1 >= MAX_RUNGS:
            dup = _has_duplicate_weights(rec_w, rn)
            censored = np.uint8(0) if accept else np.uint8(1)
            return tau, rec_eid[a], maxl1, maxlinf, vol, censored, M, levels, r + 1, dup
        M *= 2
        r += 1


@njit(cache=True, nogil=True)
def pond_trace(seed, sx, sy, m0, mmax, margin, require_sup):
    """Like pond_scalars but also returns the final rung's full record arrays."""
    key = key_from_seed(seed)
    levels = np.full(MAX_RUNGS, np.nan)
    M = m0
    r = 0
    while True:
        rec_eid, rec_w, rec_vx, rec_vy, rn, touched = _invade_rung(key, sx, sy, M)
        if not touched:
            raise ValueError("invasion exhausted the box without touching the boundary")
        a, maxlinf, maxl1, vol = _candidate_stats(rec_w, rec_vx, rec_vy, rn, sx, sy)
        tau = rec_w[a]
        levels[r] = tau
        fits = maxlinf <= M // margin - 1
        sup = (not require_sup) or (tau > 0.5)
        accept = fits and sup
        if accept or M >= mmax or r + 1 >= MAX_RUNGS:
            dup = _has_duplicate_weights(rec_w, rn)
            censored = np.uint8(0) if accept else np.uint8(1)
            return (rec_eid[:rn].copy(), rec_w[:rn].copy(), rec_vx[:rn].copy(),
                    rec_vy[:rn].copy(), a, tau, maxl1, maxlinf, vol, censored,
                    M, levels, r + 1, dup)
        M *= 2
        r += 1


@njit(cache=True, nogil=True)
def sample_ponds_batch(master_seed, first_index, trials, sx, sy, m0, mmax, margin,
                       require_sup):
    """Extract `trials` independent first ponds with per-sample derived seeds."""
    taus = np.empty(trials, np.float64)
    outlets = np.empty(trials, np.int64)
    rad_l1 = np.empty(trials, np.int64)
    rad_linf = np.empty(trials, np.int64)
    vols = np.empty(trials, np.int64)
    cens = np.empty(trials, np.uint8)
    mused = np.empty(trials, np.int64)
    nrungs = np.empty(trials, np.int64)
    levels = np.full((trials, MAX_RUNGS), np.nan)
    dups = 0
    for t in range(trials):
        tau, out, r1, rinf, vol, c, M, lv, nr, dup = pond_scalars(
            child_seed(master_seed, first_index + t), sx, sy, m0, mmax, margin,
            require_sup)
        taus[t] = tau
        outlets[t] = out
        rad_l1[t] = r1
        rad_linf[t] = rinf
        vols[t] = vol
        cens[t] = c
        mused[t] = M
        nrungs[t] = nr
        levels[t] = lv
        if dup:
            dups += 1
    return taus, outlets, rad_l1, rad_linf, vols, cens, mused, nrungs, levels, dups


# ----------------------------------------------------------------------
# union-find minimax sweep
# ----------------------------------------------------------------------

@njit(cache=True, inline="always")
def _uf_find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True)
def _box_edges(M):
    """All edges of the clipped box B(M): arrays (ex, ey, eo, eids, ws placeholder)."""
    W = 2 * M + 1
    ne = 4 * M * W
    ex = np.empty(ne, np.int32)
    ey = np.empty(ne, np.int32)
    eo = np.empty(ne, np.int8)
    k = 0
    for x in range(-M, M):
        for y in range(-M, M + 1):
            ex[k] = x; ey[k] = y; eo[k] = 0
            k += 1
    for x in range(-M, M + 1):
        for y in range(-M, M):
            ex[k] = x; ey[k] = y; eo[k] = 1
            k += 1
    return ex, ey, eo


@njit(cache=True, nogil=True)
def minimax_sweep(seed, sx, sy, M):
    """Insert box edges in weight order into union-find until the start vertex
    joins the boundary super-node. Returns (tau, bottleneck_eid, dup_weights)."""
    key = key_from_seed(seed)
    W = 2 * M + 1
    NV = W * W
    BND = NV
    ex, ey, eo = _box_edges(M)
    ne = ex.size
    eids = np.empty(ne, np.int64)
    ws = np.empty(ne, np.float64)
    for i in range(ne):
        eids[i] = pack_eid(ex[i], ey[i], eo[i])
        ws[i] = edge_weight(key, eids[i])
    order = np.argsort(ws)
    # stabilise ties by canonical id (a.s. absent for PRF fields)
    dup = False
    i = 0
    while i + 1 < ne:
        if ws[order[i]] == ws[order[i + 1]]:
            dup = True
            j = i + 1
            while j < ne and ws[order[j]] == ws[order[i]]:
                j += 1
            sub = order[i:j]
            ids = np.empty(j - i, np.int64)
            for q in range(j - i):
                ids[q] = eids[sub[q]]
            sub2 = sub[np.argsort(ids)]
            order[i:j] = sub2
            i = j
        else:
            i += 1

    parent = np.empty(NV + 1, np.int32)
    size = np.ones(NV + 1, np.int32)
    for v in range(NV + 1):
        parent[v] = v
    # merge the boundary ring into the virtual node
    for x in range(-M, M + 1):
        for y in range(-M, M + 1):
            ax = x if x >= 0 else -x
            ay = y if y >= 0 else -y
            if ax == M or ay == M:
                v = (x + M) * W + (y + M)
                rv = _uf_find(parent, v)
                rb = _uf_find(parent, BND)
                if rv != rb:
                    if size[rv] > size[rb]:
                        rv, rb = rb, rv
                    parent[rv] = rb
                    size[rb] += size[rv]
    start = (sx + M) * W + (sy + M)
    for q in range(ne):
        i = order[q]
        x = ex[i]; y = ey[i]
        u = (x + M) * W + (y + M)
        if eo[i] == 0:
            v = (x + 1 + M) * W + (y + M)
        else:
            v = (x + M) * W + (y + 1 + M)
        ru = _uf_find(parent, u)
        rv = _uf_find(parent, v)
        if ru != rv:
            if size[ru] > size[rv]:
                ru, rv = rv, ru
            parent[ru] = rv
            size[rv] += size[ru]
            if _uf_find(parent, start) == _uf_find(parent, BND):
                return ws[i], eids[i], dup
    return np.nan, np.int64(-1), dup


@njit(cache=True, nogil=True)
def flood_below(seed, sx, sy, M, cutoff):
    """Strict flood fill from (sx,sy) through edges with weight < cutoff in B(M).

    Returns (xs, ys, count, max_l1, max_linf, touched_boundary).
    """
    key = key_from_seed(seed)
    W = 2 * M + 1
    NV = W * W
    visited = np.zeros(NV, np.uint8)
    qx = np.empty(NV, np.int32)
    qy = np.empty(NV, np.int32)
    qx[0] = sx; qy[0] = sy
    visited[(sx + M) * W + (sy + M)] = 1
    head = 0
    tail = 1
    asx = sx if sx >= 0 else -sx
    asy = sy if sy >= 0 else -sy
    maxlinf = asx if asx > asy else asy
    maxl1 = asx + asy
    touched = maxlinf == M
    while head < tail:
        cx = qx[head]; cy = qy[head]
        head += 1
        for d in range(4):
            if d == 0:
                ex, ey, eo, ox, oy = cx, cy, 0, cx + 1, cy
            elif d == 1:
                ex, ey, eo, ox, oy = cx, cy, 1, cx, cy + 1
            elif d == 2:
                ex, ey, eo, ox, oy = cx - 1, cy, 0, cx - 1, cy
            else:
                ex, ey, eo, ox, oy = cx, cy - 1, 1, cx, cy - 1
            if ox < -M or ox > M or oy < -M or oy > M:
                continue
            oc = (ox + M) * W + (oy + M)
            if visited[oc]:
                continue
            if weight_xyo(key, ex, ey, eo) < cutoff:
                visited[oc] = 1
                qx[tail] = ox; qy[tail] = oy
                tail += 1
                ax = ox if ox >= 0 else -ox
                ay = oy if oy >= 0 else -oy
                linf = ax if ax > ay else ay
                if linf > maxlinf:
                    maxlinf = linf
                if ax + ay > maxl1:
                    maxl1 = ax + ay
                if linf == M:
                    touched = True
    return qx[:tail].copy(), qy[:tail].copy(), tail, maxl1, maxlinf, touched


# ----------------------------------------------------------------------
# Monte Carlo batch kernels
# ----------------------------------------------------------------------

@njit(cache=True, nogil=True)
def reach_boundary_batch(master_seed, first_index, trials, sx, sy, p, M):
    """Count trials whose (sx,sy) p-open cluster reaches dB(M); early exit on touch."""
    W = 2 * M + 1
    NV = W * W
    visited = np.zeros(NV, np.int64)
    qx = np.empty(NV, np.int32)
    qy = np.empty(NV, np.int32)
    hits = 0
    for t in range(trials):
        key = key_from_seed(child_seed(master_seed, first_index + t))
        stamp = np.int64(t + 1)
        qx[0] = sx; qy[0] = sy
        visited[(sx + M) * W + (sy + M)] = stamp
        head = 0
        tail = 1
        touched = False
        while head < tail and not touched:
            cx = qx[head]; cy = qy[head]
            head += 1
            for d in range(4):
                if d == 0:
                    ex, ey, eo, ox, oy = cx, cy, 0, cx + 1, cy
                elif d == 1:
                    ex, ey, eo, ox, oy = cx, cy, 1, cx, cy + 1
                elif d == 2:
                    ex, ey, eo, ox, oy = cx - 1, cy, 0, cx - 1, cy
                else:
                    ex, ey, eo, ox, oy = cx, cy - 1, 1, cx, cy - 1
                if ox < -M or ox > M or oy < -M or oy > M:
                    continue
                oc = (ox + M) * W + (oy + M)
                if visited[oc] == stamp:
                    continue
                if weight_xyo(key, ex, ey, eo) < p:
                    visited[oc] = stamp
                    ax = ox if ox >= 0 else -ox
                    ay = oy if oy >= 0 else -oy
                    if ax == M or ay == M:
                        touched = True
                        break
                    qx[tail] = ox; qy[tail] = oy
                    tail += 1
        if touched:
            hits += 1
    return hits


@njit(cache=True, nogil=True)
def cluster_volume_batch(master_seed, first_index, trials, sx, sy, p, M):
    """Volumes of (sx,sy) p-open clusters in B(M) plus boundary-touch flags."""
    W = 2 * M + 1
    NV = W * W
    visited = np.zeros(NV, np.int64)
    qx = np.empty(NV, np.int32)
    qy = np.empty(NV, np.int32)
    vols = np.empty(trials, np.int64)
    touch = np.zeros(trials, np.uint8)
    for t in range(trials):
        key = key_from_seed(child_seed(master_seed, first_index + t))
        stamp = np.int64(t + 1)
        qx[0] = sx; qy[0] = sy
        visited[(sx + M) * W + (sy + M)] = stamp
        head = 0
        tail = 1
        touched = False
        while head < tail:
            cx = qx[head]; cy = qy[head]
            head += 1
            for d in range(4):
                if d == 0:
                    ex, ey, eo, ox, oy = cx, cy, 0, cx + 1, cy
                elif d == 1:
                    ex, ey, eo, ox, oy = cx, cy, 1, cx, cy + 1
                elif d == 2:
                    ex, ey, eo, ox, oy = cx - 1, cy, 0, cx - 1, cy
                else:
                    ex, ey, eo, ox, oy = cx, cy - 1, 1, cx, cy - 1
                if ox < -M or ox > M or oy < -M or oy > M:
                    continue
                oc = (ox + M) * W + (oy + M)
                if visited[oc] == stamp:
                    continue
                if weight_xyo(key, ex, ey, eo) < p:
                    visited[oc] = stamp
                    qx[tail] = ox; qy[tail] = oy
                    tail += 1
                    ax = ox if ox >= 0 else -ox
                    ay = oy if oy >= 0 else -oy
                    if ax == M or ay == M:
                        touched = True
        vols[t] = tail
        touch[t] = 1 if touched else 0
    return vols, touch


@njit(cache=True, nogil=True)
def crossing_batch(master_seed, first_index, trials, n, m, p, exclude_side_bonds):
    """Count p-open left-right crossings of [0,n]x[0,m].

    A crossing runs from a vertex with x=0 to a vertex with x=n using edges with
    both endpoints in the rectangle; with exclude_side_bonds the horizontal
    edges on y=0 and y=m are removed (paths through those vertices stay legal).
    """
    W = m + 1
    NV = (n + 1) * W
    visited = np.zeros(NV, np.int64)
    qx = np.empty(NV, np.int32)
    qy = np.empty(NV, np.int32)
    hits = 0
    for t in range(trials):
        key = key_from_seed(child_seed(master_seed, first_index + t))
        stamp = np.int64(t + 1)
        tail = 0
        for y in range(m + 1):
            qx[tail] = 0; qy[tail] = y
            visited[y] = stamp
            tail += 1
        head = 0
        crossed = False
        while head < tail and not crossed:
            cx = qx[head]; cy = qy[head]
            head += 1
            for d in range(4):
                if d == 0:
                    ex, ey, eo, ox, oy = cx, cy, 0, cx + 1, cy
                elif d == 1:
                    ex, ey, eo, ox, oy = cx, cy, 1, cx, cy + 1
                elif d == 2:
                    ex, ey, eo, ox, oy = cx - 1, cy, 0, cx - 1, cy
                else:
                    ex, ey, eo, ox, oy = cx, cy - 1, 1, cx, cy - 1
                if ox < 0 or ox > n or oy < 0 or oy > m:
                    continue
                if exclude_side_bonds and eo == 0 and (ey == 0 or ey == m):
                    continue
                oc = ox * W + oy
                if visited[oc] == stamp:
                    continue
                if weight_xyo(key, ex, ey, eo) < p:
                    visited[oc] = stamp
                    if ox == n:
                        crossed = True
                        break
                    qx[tail] = ox; qy[tail] = oy
                    tail += 1
        if crossed:
            hits += 1
    return hits


# ----------------------------------------------------------------------
# nested closed dual circuits around the start vertex
# ----------------------------------------------------------------------

@njit(cache=True, nogil=True)
def anp_scan(seed, p, M):
    """Trace the nested family of p-closed dual circuits around the origin.

    Repeatedly grows the p-open territory of the current enclosed region, stops
    as soon as a territory touches dB(M), and records each traced circuit's
    exact L1 and L-inf diameters (from the dual endpoints of the crossing
    edges, in doubled coordinates). Returns
    (n_circuits, max_diam_l1, max_diam_linf).
    """
    key = key_from_seed(seed)
    W = 2 * M + 1
    NV = W * W
    in_t = np.zeros(NV, np.uint8)   # current territory
    outside = np.zeros(NV, np.uint8)
    seed = np.zeros(NV, np.uint8)   # seeds for the next territory
    qx = np.empty(NV, np.int32)
    qy = np.empty(NV, np.int32)
    seed[M * W + M] = 1
    n_circ = 0
    max_l1 = 0
    max_linf = 0
    for _ in range(4 * M + 4):
        # territory = seeds plus everything p-open-reachable from them
        in_t[:] = 0
        tail = 0
        for x in range(-M, M + 1):
            base = (x + M) * W
            for y in range(-M, M + 1):
                if seed[base + (y + M)]:
                    in_t[base + (y + M)] = 1
                    qx[tail] = x; qy[tail] = y
                    tail += 1
        head = 0
        touched = False
        while head < tail:
            cx = qx[head]; cy = qy[head]
            head += 1
            ax = cx if cx >= 0 else -cx
            ay = cy if cy >= 0 else -cy
            if ax == M or ay == M:
                touched = True
            for d in range(4):
                if d == 0:
                    ex, ey, eo, ox, oy = cx, cy, 0, cx + 1, cy
                elif d == 1:
                    ex, ey, eo, ox, oy = cx, cy, 1, cx, cy + 1
                elif d == 2:
                    ex, ey, eo, ox, oy = cx - 1, cy, 0, cx - 1, cy
                else:
                    ex, ey, eo, ox, oy = cx, cy - 1, 1, cx, cy - 1
                if ox < -M or ox > M or oy < -M or oy > M:
                    continue
                oc = (ox + M) * W + (oy + M)
                if in_t[oc]:
                    continue
                if weight_xyo(key, ex, ey, eo) < p:
                    in_t[oc] = 1
                    qx[tail] = ox; qy[tail] = oy
                    tail += 1
        if touched:
            break

        # outside = component of the boundary ring in the complement of the territory
        outside[:] = 0
        tail = 0
        for x in range(-M, M + 1):
            for y in range(-M, M + 1):
                ax = x if x >= 0 else -x
                ay = y if y >= 0 else -y
                if (ax == M or ay == M) and not in_t[(x + M) * W + (y + M)]:
                    outside[(x + M) * W + (y + M)] = 1
                    qx[tail] = x; qy[tail] = y
                    tail += 1
        head = 0
        while head < tail:
            cx = qx[head]; cy = qy[head]
            head += 1
            for d in range(4):
                if d == 0:
                    ox, oy = cx + 1, cy
                elif d == 1:
                    ox, oy = cx, cy + 1
                elif d == 2:
                    ox, oy = cx - 1, cy
                else:
                    ox, oy = cx, cy - 1
                if ox < -M or ox > M or oy < -M or oy > M:
                    continue
                oc = (ox + M) * W + (oy + M)
                if outside[oc] or in_t[oc]:
                    continue
                outside[oc] = 1
                qx[tail] = ox; qy[tail] = oy
                tail += 1

        # circuit = dual edges crossing territory->outside; track diameter in
        # doubled dual coordinates and seed the next round across the circuit
        smin = np.int64(1 << 40); smax = np.int64(-(1 << 40))
        dmin = np.int64(1 << 40); dmax = np.int64(-(1 << 40))
        xmin = np.int64(1 << 40); xmax = np.int64(-(1 << 40))
        ymin = np.int64(1 << 40); ymax = np.int64(-(1 << 40))
        n_cross = 0
        for x in range(-M, M + 1):
            for y in range(-M, M + 1):
                if not in_t[(x + M) * W + (y + M)]:
                    continue
                for d in range(4):
                    if d == 0:
                        eo, ox, oy = 0, x + 1, y
                    elif d == 1:
                        eo, ox, oy = 1, x, y + 1
                    elif d == 2:
                        eo, ox, oy = 0, x - 1, y
                    else:
                        eo, ox, oy = 1, x, y - 1
                    if ox < -M or ox > M or oy < -M or oy > M:
                        continue
                    if not outside[(ox + M) * W + (oy + M)]:
                        continue
                    n_cross += 1
                    seed[(ox + M) * W + (oy + M)] = 1
                    # dual endpoints of the crossing edge, doubled coordinates
                    mx = x + ox  # = 2x+1 or 2x-1 for horizontal, 2x for vertical
                    my = y + oy
                    if eo == 0:
                        dx1, dy1, dx2, dy2 = mx, my - 1, mx, my + 1
                    else:
                        dx1, dy1, dx2, dy2 = mx - 1, my, mx + 1, my
                    for (px, py) in ((dx1, dy1), (dx2, dy2)):
                        s = np.int64(px + py)
                        dd = np.int64(px - py)
                        if s < smin: smin = s
                        if s > smax: smax = s
                        if dd < dmin: dmin = dd
                        if dd > dmax: dmax = dd
                        if px < xmin: xmin = np.int64(px)
                        if px > xmax: xmax = np.int64(px)
                        if py < ymin: ymin = np.int64(py)
                        if py > ymax: ymax = np.int64(py)
        if n_cross == 0:
            break
        n_circ += 1
        l1 = max(smax - smin, dmax - dmin) // 2
        linf = max(xmax - xmin, ymax - ymin) // 2
        if l1 > max_l1:
            max_l1 = int(l1)
        if linf > max_linf:
            max_linf = int(linf)
        # next seeds also include everything not outside (territory plus holes)
        for v in range(NV):
            if not outside[v]:
                seed[v] = 1
    return n_circ, max_l1, max_linf


# ----------------------------------------------------------------------
# final-level partition of a box
# ----------------------------------------------------------------------

@njit(cache=True, nogil=True)
def partition_levels(seed, M):
    """Final water level for every interior vertex of B(M).

    Processes edges in increasing weight through union-find with a boundary
    super-node; a component's vertices receive the uniting edge's weight as
    their level at the moment the component attaches to the boundary.
    """
    key = key_from_seed(seed)
    W = 2 * M + 1
    NV = W * W
    BND = NV
    ex, ey, eo = _box_edges(M)
    ne = ex.size
    eids = np.empty(ne, np.int64)
    ws = np.empty(ne, np.float64)
    for i in range(ne):
        eids[i] = pack_eid(ex[i], ey[i], eo[i])
        ws[i] = edge_weight(key, eids[i])
    order = np.argsort(ws)
    i = 0
    while i + 1 < ne:
        if ws[order[i]] == ws[order[i + 1]]:
            j = i + 1
            while j < ne and ws[order[j]] == ws[order[i]]:
                j += 1
            sub = order[i:j]
            ids = np.empty(j - i, np.int64)
            for q in range(j - i):
                ids[q] = eids[sub[q]]
            order[i:j] = sub[np.argsort(ids)]
            i = j
        else:
            i += 1

    parent = np.empty(NV + 1, np.int32)
    for v in range(NV + 1):
        parent[v] = v
    size = np.ones(NV + 1, np.int32)
    # per-root member linked lists (boundary root keeps none)
    nxt = np.full(NV, -1, np.int32)
    head = np.empty(NV + 1, np.int32)
    tail_ = np.empty(NV + 1, np.int32)
    for v in range(NV):
        head[v] = v
        tail_[v] = v
    head[BND] = -1
    tail_[BND] = -1
    levels = np.full(NV, np.nan)
    for x in range(-M, M + 1):
        for y in range(-M, M + 1):
            ax = x if x >= 0 else -x
            ay = y if y >= 0 else -y
            if ax == M or ay == M:
                v = (x + M) * W + (y + M)
                parent[v] = BND
                size[BND] += 1
    for q in range(ne):
        i = order[q]
        x = ex[i]; y = ey[i]
        u = (x + M) * W + (y + M)
        if eo[i] == 0:
            v = (x + 1 + M) * W + (y + M)
        else:
            v = (x + M) * W + (y + 1 + M)
        ru = _uf_find(parent, u)
        rv = _uf_find(parent, v)
        if ru == rv:
            continue
        rb = _uf_find(parent, BND)
        if ru == rb or rv == rb:
            other = rv if ru == rb else ru
            node = head[other]
            while node != -1:
                levels[node] = ws[i]
                node = nxt[node]
            parent[other] = rb
            size[rb] += size[other]
            head[other] = -1
        else:
            if size[ru] > size[rv]:
                ru, rv = rv, ru
            parent[ru] = rv
            size[rv] += size[ru]
            if head[rv] == -1:
                head[rv] = head[ru]
                tail_[rv] = tail_[ru]
            elif head[ru] != -1:
                nxt[tail_[rv]] = head[ru]
                tail_[rv] = tail_[ru]
            head[ru] = -1
    return levels


@njit(cache=True, nogil=True)
def label_equal_levels(levels, M):
    """Group adjacent interior vertices with identical final levels.

    Returns an int64 grid of labels (root vertex index of each class), -1 for
    boundary vertices.
    """
    W = 2 * M + 1
    NV = W * W
    parent = np.empty(NV, np.int32)
    size = np.ones(NV, np.int32)
    for v in range(NV):
        parent[v] = v
    for x in range(-M + 1, M):
        for y in range(-M + 1, M):
            v = (x + M) * W + (y + M)
            for (ox, oy) in ((x + 1, y), (x, y + 1)):
                if ox <= -M or ox >= M or oy <= -M or oy >= M:
                    continue
                u = (ox + M) * W + (oy + M)
                if levels[v] == levels[u]:
                    rv = _uf_find(parent, v)
                    ru = _uf_find(parent, u)
                    if rv != ru:
                        if size[rv] > size[ru]:
                            rv, ru = ru, rv
                        parent[rv] = ru
                        size[ru] += size[rv]
    labels = np.full(NV, -1, np.int64)
    for x in range(-M + 1, M):
        for y in range(-M + 1, M):
            v = (x + M) * W + (y + M)
            labels[v] = _uf_find(parent, v)
    return labels
