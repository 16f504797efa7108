"""Pure-Python engine core.

Fallback backend mirroring _flowcore operation-for-operation (same draw
protocol, same arithmetic expression order) so that a given (seed, stream_id,
sampler) produces bit-identical output on either backend.  Used when the
compiled extension is unavailable or DUSTFLOW_FORCE_PYTHON is set.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"


def draw_r(nd, sp):
    """One r draw from the truncated jump-size law; nd() yields uniforms."""
    u = nd()
    if sp.p_disc > 0.0:
        if u < sp.p_disc:
            v = u / sp.p_disc
            cum = sp.disc_cum
            lo, hi = 0, len(cum) - 1
            while lo < hi:
                mid = (lo + hi) >> 1
                if v < cum[mid]:
                    hi = mid
                else:
                    lo = mid + 1
            return float(sp.disc_r[lo])
        v = (u - sp.p_disc) / (1.0 - sp.p_disc)
    else:
        v = u
    x, c = sp.inv_x, sp.inv_c
    mm = len(x) - 1
    lo, hi = 0, mm + 1
    while lo < hi:
        mid = (lo + hi) >> 1
        if x[mid] <= v:
            lo = mid + 1
        else:
            hi = mid
    i = lo - 1
    if i < 0:
        i = 0
    elif i > mm - 1:
        i = mm - 1
    dx = v - x[i]
    r = ((c[0, i] * dx + c[1, i]) * dx + c[2, i]) * dx + c[3, i]
    if r <= sp.delta:
        r = math.nextafter(sp.delta, 1.0)
    if r >= 1.0:
        r = math.nextafter(1.0, 0.0)
    return float(r)


def _rank_less(w, b, v, i, j):
    # ordering key: mass desc, then birth asc, then position asc
    if w[i] != w[j]:
        return w[i] > w[j]
    if b[i] != b[j]:
        return b[i] < b[j]
    return v[i] < v[j]


def _snapshot(Wv, Mv, dustv, s2v, posv, g, v, w, b, na, dust, pos, kmax):
    s2 = 0.0
    for i in range(na):
        s2 += w[i] * w[i]
    s2v[g] = s2
    dustv[g] = dust
    used = [False] * na
    acc = 0.0
    kk = kmax if kmax < na else na
    for slot in range(kk):
        best = -1
        for i in range(na):
            if used[i]:
                continue
            if best < 0 or _rank_less(w, b, v, i, best):
                best = i
        used[best] = True
        Wv[g, slot] = w[best]
        acc += w[best]
        Mv[g, slot] = acc
    for slot in range(kk, kmax):
        Mv[g, slot] = acc
    if pos is not None:
        for i in range(len(pos)):
            posv[g, i] = pos[i]


def _apply_jump(v, w, b, na, dust, r, uu, tn):
    """In-place merge step; returns (new na, absorbed-mass accumulator)."""
    lo = uu * (1.0 - r)
    hi = lo + r
    one_m = 1.0 - r
    acc = dust * r
    write = 0
    for i in range(na):
        vi = v[i]
        if lo <= vi <= hi:
            acc += w[i]
        else:
            v[write] = vi / one_m if vi < lo else (vi - r) / one_m
            w[write] = w[i]
            b[write] = b[i]
            write += 1
    na = write
    if acc > 0.0:
        if na < len(v):
            v[na], w[na], b[na] = uu, acc, tn
        else:
            v.append(uu)
            w.append(acc)
            b.append(tn)
        na += 1
    return na, acc


def _move_positions(pos, r, uu):
    lo = uu * (1.0 - r)
    hi = lo + r
    one_m = 1.0 - r
    for i in range(len(pos)):
        pi = pos[i]
        if lo <= pi <= hi:
            pos[i] = uu
        else:
            pos[i] = pi / one_m if pi < lo else (pi - r) / one_m


def run_topk(bitgen, sp, grid, kmax, max_jumps, seeds):
    """One replicate from the empty state; snapshots of ranked masses, dust,
    sum of squared masses (and seed positions) at each grid time."""
    nd = np.random.Generator(bitgen).random
    grid = np.asarray(grid, dtype=float)
    G = len(grid)
    n = len(seeds)
    W = np.zeros((G, kmax))
    M = np.zeros((G, kmax))
    dustv = np.empty(G)
    s2v = np.zeros(G)
    posv = np.empty((G, n)) if n else None
    pos = [float(x) for x in seeds] if n else None
    v, w, b = [], [], []
    na = 0
    t = 0.0
    dust = 1.0
    rate = sp.rate
    nj = 0
    g = 0
    while True:
        tn = t - math.log1p(-nd()) / rate
        while g < G and grid[g] < tn:
            _snapshot(W, M, dustv, s2v, posv, g, v, w, b, na, dust, pos, kmax)
            g += 1
        if g == G:
            break
        r = draw_r(nd, sp)
        uu = nd()
        na, _ = _apply_jump(v, w, b, na, dust, r, uu, tn)
        if pos is not None:
            _move_positions(pos, r, uu)
        dust *= 1.0 - r
        t = tn
        nj += 1
        if nj >= max_jumps:
            raise RuntimeError("max_jumps exceeded")
    return W, M, dustv, s2v, posv, nj


def run_paintbox(bitgen, sp, grid, seeds, max_jumps):
    """Seed positions through the flow only (no atom bookkeeping)."""
    nd = np.random.Generator(bitgen).random
    grid = np.asarray(grid, dtype=float)
    G = len(grid)
    pos = [float(x) for x in seeds]
    posv = np.empty((G, len(pos)))
    t = 0.0
    rate = sp.rate
    nj = 0
    g = 0
    while True:
        tn = t - math.log1p(-nd()) / rate
        while g < G and grid[g] < tn:
            for i in range(len(pos)):
                posv[g, i] = pos[i]
            g += 1
        if g == G:
            break
        r = draw_r(nd, sp)
        uu = nd()
        _move_positions(pos, r, uu)
        t = tn
        nj += 1
        if nj >= max_jumps:
            raise RuntimeError("max_jumps exceeded")
    return posv, nj


def run_state(bitgen, sp, t_end, max_jumps):
    """Full atom state (insertion order) at t_end."""
    nd = np.random.Generator(bitgen).random
    v, w, b = [], [], []
    na = 0
    t = 0.0
    dust = 1.0
    S = 0.0
    rate = sp.rate
    nj = 0
    while True:
        tn = t - math.log1p(-nd()) / rate
        if t_end < tn:
            break
        r = draw_r(nd, sp)
        uu = nd()
        na, _ = _apply_jump(v, w, b, na, dust, r, uu, tn)
        dust *= 1.0 - r
        S += -math.log1p(-r)
        t = tn
        nj += 1
        if nj >= max_jumps:
            raise RuntimeError("max_jumps exceeded")
    return (
        np.array(v[:na], dtype=float),
        np.array(w[:na], dtype=float),
        np.array(b[:na], dtype=float),
        dust,
        S,
        nj,
    )


def run_replay(bitgen, sp, n_jumps, kview, max_jumps):
    """Run exactly n_jumps jumps recording, per jump, the compact pre-jump
    view consumed by kernels.rank_increment_topview, plus the worst
    mass-conservation drift and the final ranked masses."""
    nd = np.random.Generator(bitgen).random
    if n_jumps > max_jumps:
        raise RuntimeError("max_jumps exceeded")
    preW = np.zeros((n_jumps, kview))
    preZ = np.zeros((n_jumps, kview), dtype=np.int8)
    preN = np.zeros((n_jumps, kview - 1))
    preP = np.zeros(n_jumps)
    predr = np.zeros(n_jumps)
    v, w, b = [], [], []
    na = 0
    t = 0.0
    dust = 1.0
    rate = sp.rate
    maxdev = 0.0
    for jn in range(n_jumps):
        tn = t - math.log1p(-nd()) / rate
        r = draw_r(nd, sp)
        uu = nd()
        lo = uu * (1.0 - r)
        hi = lo + r
        order = sorted(range(na), key=lambda i: (-w[i], b[i], v[i]))
        ii = 0
        P = 0.0
        for pos_rank, i in enumerate(order):
            zi = lo <= v[i] <= hi
            if zi:
                P += w[i]
            elif ii < kview - 1:
                preN[jn, ii] = w[i]
                ii += 1
            if pos_rank < kview:
                preW[jn, pos_rank] = w[i]
                preZ[jn, pos_rank] = 1 if zi else 0
        preP[jn] = P
        predr[jn] = dust * r
        na, _ = _apply_jump(v, w, b, na, dust, r, uu, tn)
        dust *= 1.0 - r
        t = tn
        tot = dust
        for i in range(na):
            tot += w[i]
        dev = abs(tot - 1.0)
        if dev > maxdev:
            maxdev = dev
    order = sorted(range(na), key=lambda i: (-w[i], b[i], v[i]))
    finalW = np.zeros(kview)
    for pos_rank, i in enumerate(order[:kview]):
        finalW[pos_rank] = w[i]
    return preW, preZ, preN, preP, predr, finalW, maxdev, t


def sample_r(bitgen, sp, n):
    """n independent draws from the truncated jump-size law."""
    nd = np.random.Generator(bitgen).random
    out = np.empty(n)
    for i in range(n):
        out[i] = draw_r(nd, sp)
    return out
