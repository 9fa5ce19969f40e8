"""Compiled inner loops for seeding and banded alignment."""

import numpy as np
from numba import njit

OP_MATCH, OP_SUB, OP_INS, OP_DEL = 0, 1, 2, 3
_INF = 1 << 30


SUB_COST, GAP_OPEN, GAP_EXT = 2, 2, 1


@njit(cache=True)
def banded_align(read, win, lo, w):
    """Semi-global affine-gap alignment of all of ``read`` against ``win``.

    Row ``i`` covers window columns ``lo[i] .. lo[i] + 2w``. Leading and
    trailing window bases are free. A substitution costs 2 and a gap of
    length L costs 2 + L, so indels come out as single blocks. Returns
    (ops, start column, cost) with ops in read order.
    """
    n = read.shape[0]
    m = win.shape[0]
    width = 2 * w + 1
    # state 0: diagonal, 1: insertion (read only), 2: deletion (window only)
    dist = np.full((3, n + 1, width), _INF, np.int32)
    back = np.zeros((3, n + 1, width), np.uint8)
    for b in range(width):
        j = lo[0] + b
        if 0 <= j <= m:
            dist[0, 0, b] = 0
    oe = GAP_OPEN + GAP_EXT
    for i in range(n + 1):
        base = read[i - 1] if i > 0 else 0
        off = lo[i]
        prev = lo[i - 1] if i > 0 else 0
        for b in range(width):
            j = off + b
            if j < 0 or j > m:
                continue
            if i > 0:
                if j >= 1:
                    bp = j - 1 - prev
                    if 0 <= bp < width:
                        s = 0 if base == win[j - 1] else SUB_COST
                        best = dist[0, i - 1, bp]
                        t = 0
                        if dist[2, i - 1, bp] < best:
                            best = dist[2, i - 1, bp]
                            t = 2
                        if dist[1, i - 1, bp] < best:
                            best = dist[1, i - 1, bp]
                            t = 1
                        if best < _INF:
                            dist[0, i, b] = best + s
                            back[0, i, b] = t
                bu = j - prev
                if 0 <= bu < width:
                    best = dist[0, i - 1, bu] + oe
                    t = 0
                    if dist[1, i - 1, bu] + GAP_EXT < best:
                        best = dist[1, i - 1, bu] + GAP_EXT
                        t = 1
                    if dist[2, i - 1, bu] + oe < best:
                        best = dist[2, i - 1, bu] + oe
                        t = 2
                    if best < _INF:
                        dist[1, i, b] = best
                        back[1, i, b] = t
            if b >= 1 and i > 0:
                best = dist[0, i, b - 1] + oe
                t = 0
                if dist[2, i, b - 1] + GAP_EXT < best:
                    best = dist[2, i, b - 1] + GAP_EXT
                    t = 2
                if dist[1, i, b - 1] + oe < best:
                    best = dist[1, i, b - 1] + oe
                    t = 1
                if best < _INF:
                    dist[2, i, b] = best
                    back[2, i, b] = t
    best = _INF
    bb = -1
    st = 0
    for b in range(width):
        for q in range(2):
            if dist[q, n, b] < best:
                best = dist[q, n, b]
                bb = b
                st = q
    if bb < 0:
        return np.empty(0, np.uint8), -1, _INF
    ops = np.empty(n + m + 1, np.uint8)
    no = 0
    i = n
    j = lo[n] + bb
    while i > 0:
        b = j - lo[i]
        t = back[st, i, b]
        if st == 0:
            ops[no] = OP_MATCH if read[i - 1] == win[j - 1] else OP_SUB
            i -= 1
            j -= 1
        elif st == 1:
            ops[no] = OP_INS
            i -= 1
        else:
            ops[no] = OP_DEL
            j -= 1
        st = t
        no += 1
    return ops[:no][::-1].copy(), j, best


@njit(cache=True)
def hamming_events(read, win, start):
    """Positions where ``read`` differs from ``win[start:start+len(read)]``."""
    n = read.shape[0]
    out = np.empty(n, np.int64)
    c = 0
    for i in range(n):
        if read[i] != win[start + i]:
            out[c] = i
            c += 1
    return out[:c]


@njit(cache=True)
def anchor_chain(offs, poss):
    """Indices of a longest chain strictly increasing in both ``offs`` and
    ``poss``; hits must be sorted by offset, then position descending."""
    n = offs.shape[0]
    tails = np.empty(n, np.int64)
    tail_idx = np.empty(n, np.int64)
    prev = np.full(n, -1, np.int64)
    size = 0
    for i in range(n):
        p = poss[i]
        lo, hi = 0, size
        while lo < hi:
            mid = (lo + hi) >> 1
            if tails[mid] < p:
                lo = mid + 1
            else:
                hi = mid
        if lo:
            prev[i] = tail_idx[lo - 1]
        tails[lo] = p
        tail_idx[lo] = i
        if lo == size:
            size += 1
    out = np.empty(size, np.int64)
    i = tail_idx[size - 1]
    for q in range(size - 1, -1, -1):
        out[q] = i
        i = prev[i]
    return out


@njit(cache=True)
def _lower(keys, c):
    lo, hi = 0, keys.shape[0]
    while lo < hi:
        mid = (lo + hi) >> 1
        if keys[mid] < c:
            lo = mid + 1
        else:
            hi = mid
    return lo


@njit(cache=True)
def _hits_one(read, k, keys, positions, max_occ, offs, poss, count):
    n = read.shape[0]
    if n < k:
        return count
    mask = (np.uint64(1) << np.uint64(2 * k)) - np.uint64(1)
    code = np.uint64(0)
    run = 0
    for i in range(n):
        b = read[i]
        if b > 3:
            run = 0
            code = np.uint64(0)
            continue
        run += 1
        code = ((code << np.uint64(2)) | np.uint64(b)) & mask
        if run >= k:
            lo = _lower(keys, code)
            hi = lo
            while hi < keys.shape[0] and keys[hi] == code and hi - lo <= max_occ:
                hi += 1
            if hi - lo <= max_occ:
                for q in range(lo, hi):
                    if count == offs.shape[0]:
                        return -1
                    offs[count] = i - k + 1
                    poss[count] = positions[q]
                    count += 1
    return count


@njit(cache=True)
def candidate_clusters(fwd, rev, k, keys, positions, max_occ, gap):
    """Seed hits on both strands grouped into diagonal clusters.

    Returns (offs, poss, table) where hits are grouped per cluster and each
    table row is (strand, lo, hi, votes, median diagonal, min off, max off).
    """
    n = fwd.shape[0]
    cap = 4 * n + 16
    while True:
        offs = np.empty(cap, np.int64)
        poss = np.empty(cap, np.int64)
        c1 = _hits_one(fwd, k, keys, positions, max_occ, offs, poss, 0)
        c2 = _hits_one(rev, k, keys, positions, max_occ, offs, poss, c1) if c1 >= 0 else -1
        if c2 >= 0:
            break
        cap = 2 * n * (max_occ + 1) + 1
    strand = np.zeros(c2, np.int64)
    strand[c1:c2] = 1
    offs, poss = offs[:c2], poss[:c2]
    diag = poss - offs
    # strand-major, then diagonal
    order = np.argsort(strand * (np.int64(1) << 40) + diag, kind="mergesort")
    offs, poss, strand, diag = offs[order], poss[order], strand[order], diag[order]
    table = np.empty((c2, 7), np.int64)
    nc = 0
    seen = np.full(n + 1, -1, np.int64)
    lo = 0
    while lo < c2:
        hi = lo + 1
        while hi < c2 and strand[hi] == strand[lo] and diag[hi] - diag[hi - 1] <= gap:
            hi += 1
        votes = 0
        omin = offs[lo]
        omax = offs[lo]
        for q in range(lo, hi):
            o = offs[q]
            if seen[o] != nc:
                seen[o] = nc
                votes += 1
            omin = min(omin, o)
            omax = max(omax, o)
        table[nc, 0] = strand[lo]
        table[nc, 1] = lo
        table[nc, 2] = hi
        table[nc, 3] = votes
        table[nc, 4] = diag[lo + (hi - lo - 1) // 2]
        table[nc, 5] = omin
        table[nc, 6] = omax
        nc += 1
        lo = hi
    return offs, poss, table[:nc]


@njit(cache=True)
def _seed_diag(seq, o, k, keys, positions):
    """Diagonal of the k-mer at offset ``o`` if it occurs exactly once in
    the consensus, or -1."""
    mask = (np.uint64(1) << np.uint64(2 * k)) - np.uint64(1)
    code = np.uint64(0)
    for i in range(o, o + k):
        code = ((code << np.uint64(2)) | np.uint64(seq[i])) & mask
    lo = _lower(keys, code)
    if lo >= keys.shape[0] or keys[lo] != code:
        return -1
    if lo + 1 < keys.shape[0] and keys[lo + 1] == code:
        return -1
    return positions[lo] - o


@njit(cache=True)
def hamming_fast(codes, starts, lens, k, keys, positions, cons, max_mm, min_len):
    """Batch fast path. For each read returns strand, position and up to
    ``max_mm`` substitution offsets when a unique seed at the start, middle
    or end gives a diagonal with Hamming distance at most ``max_mm``;
    strand -1 means the read needs the full aligner."""
    nr = starts.shape[0]
    strand = np.full(nr, -1, np.int64)
    pos = np.zeros(nr, np.int64)
    nmm = np.zeros(nr, np.int64)
    mms = np.zeros((nr, max_mm), np.int64)
    m = cons.shape[0]
    for r in range(nr):
        n = lens[r]
        if n < min_len or n < 2 * k:
            continue
        fwd = codes[starts[r]:starts[r] + n]
        bad = False
        for i in range(n):
            if fwd[i] > 3:
                bad = True
                break
        if bad:
            continue
        for s in range(2):
            if s == 0:
                seq = fwd
            else:
                seq = np.empty(n, np.uint8)
                for i in range(n):
                    seq[i] = 3 - fwd[n - 1 - i]
            for t in range(3):
                o = 0 if t == 0 else ((n - k) // 2 if t == 1 else n - k)
                d = _seed_diag(seq, o, k, keys, positions)
                if d < 0 or d + n > m:
                    continue
                c = 0
                for i in range(n):
                    if seq[i] != cons[d + i]:
                        if c == max_mm:
                            c = max_mm + 1
                            break
                        mms[r, c] = i
                        c += 1
                if c <= max_mm:
                    strand[r] = s
                    pos[r] = d
                    nmm[r] = c
                    break
            if strand[r] >= 0:
                break
    return strand, pos, nmm, mms
