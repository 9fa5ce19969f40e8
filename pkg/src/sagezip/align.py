"""Compression-time read matching against a user-supplied consensus.

Reads are placed by k-mer seed voting on both strands and extended with a
banded unit-cost alignment. The result is an :class:`Alignment`: one or more
segments, each a consensus position plus a canonical mismatch list, and
optional head/tail clips. ``reconstruct`` is the reference inverse used as the
oracle for the streaming decoder.

Mismatch offsets are consensus-side coordinates relative to the segment start.
A SUB at ``o`` replaces consensus base ``o``; an INS at ``o`` inserts its bases
before consensus base ``o``; a DEL at ``o`` removes ``block_len`` bases starting
at ``o``. Reverse-strand segments describe the reverse complement of their read
piece, so the piece is ``revcomp(apply(consensus slice, mismatches))``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np

from . import _kernels
from .errors import AlignError
from .seqio import ReadRecord, base_codes, revcomp

# clip heuristic, in approximate encoded bits
_EVENT_BITS = 6
_CLIP_BASE_BITS = 2
_CLIP_OVERHEAD = 24
MAX_CLIP = 0xFFFF


class Kind(enum.IntEnum):
    SUB = 0
    INS = 1
    DEL = 2


class Mismatch(NamedTuple):
    offset: int
    kind: Kind
    block_len: int
    payload: str


class Segment(NamedTuple):
    cons_pos: int
    rev: bool
    read_span: tuple[int, int]
    mismatches: tuple[Mismatch, ...]
    cons_len: int

    @property
    def edit_cost(self) -> int:
        return sum(m.block_len for m in self.mismatches)


class Status(enum.Enum):
    MAPPED = "mapped"
    LITERAL = "literal"


@dataclass(frozen=True)
class Alignment:
    segments: tuple[Segment, ...] = ()
    clip_head: str = ""
    clip_tail: str = ""
    status: Status = Status.MAPPED
    # reads with N keep a matching position but are stored whole
    n_literal: str | None = None

    @classmethod
    def literal(cls, bases: str) -> "Alignment":
        return cls((), bases, "", Status.LITERAL)

    @property
    def mapped(self) -> bool:
        return self.status is Status.MAPPED

    @property
    def cons_pos(self) -> int:
        return self.segments[0].cons_pos

    @property
    def mismatch_count(self) -> int:
        return sum(len(s.mismatches) for s in self.segments)

    @property
    def edit_cost(self) -> int:
        return sum(s.edit_cost for s in self.segments)

    @property
    def read_length(self) -> int:
        cached = self.__dict__.get("_read_length")
        if cached is not None:
            return cached
        n = self._count_length()
        self.__dict__["_read_length"] = n      # frozen, so safe to memoize
        return n

    def _count_length(self) -> int:
        if not self.mapped:
            return len(self.clip_head)
        if self.n_literal is not None:
            return len(self.n_literal)
        span = sum(s.read_span[1] - s.read_span[0] for s in self.segments)
        return span + len(self.clip_head) + len(self.clip_tail)


@dataclass(frozen=True)
class AlignParams:
    k: int = 15
    band: int = 16
    max_edit_rate: float = 0.10
    max_segments: int = 2
    min_seed_hits: int = 1
    clip: bool = True
    max_occ: int = 32
    chimeric_min: int = 8
    chimeric_frac: float = 0.05
    cost: Callable[[Alignment], int] | None = field(default=None, compare=False)

    @classmethod
    def short_reads(cls, **kw) -> "AlignParams":
        return cls(**kw)

    @classmethod
    def long_reads(cls, **kw) -> "AlignParams":
        kw = {"k": 17, "band": 24, "max_edit_rate": 0.25, **kw}
        return cls(**kw)


class ConsensusIndex:
    """Sorted k-mer table over the consensus. K-mers containing N are skipped."""

    def __init__(self, bases: str, k: int, keys: np.ndarray, positions: np.ndarray):
        self.bases = bases
        self.k = k
        self.codes = base_codes(bases)
        self.keys = keys
        self.positions = positions

    def positions_of(self, kmer: str) -> list[int]:
        if len(kmer) != self.k or "N" in kmer:
            return []
        code = 0
        for b in base_codes(kmer):
            code = (code << 2) | int(b)
        key = np.uint64(code)
        lo = np.searchsorted(self.keys, key, side="left")
        hi = np.searchsorted(self.keys, key, side="right")
        return self.positions[lo:hi].tolist()

    @property
    def seed_table(self) -> dict[str, list[int]]:
        """The whole table as a dict. Only sensible for small consensus sequences."""
        table: dict[str, list[int]] = {}
        for p in self.positions.tolist():
            table.setdefault(self.bases[p:p + self.k], []).append(p)
        return {key: sorted(v) for key, v in table.items()}


def build_index(consensus: str, k: int) -> ConsensusIndex:
    if k < 1 or k > 31:
        raise AlignError("seed length must lie in 1..31")
    if len(consensus) < k:
        raise AlignError(f"consensus ({len(consensus)} bases) is shorter than k={k}")
    codes = base_codes(consensus)
    n = len(codes)
    m = n - k + 1
    isn = np.concatenate([[0], np.cumsum(codes > 3)])
    valid = (isn[k:] - isn[:-k]) == 0
    val = np.zeros(m, dtype=np.uint64)
    for j in range(k):
        val = (val << np.uint64(2)) | (codes[j:j + m] & 3).astype(np.uint64)
    keys = val[valid]
    pos = np.flatnonzero(valid).astype(np.int64)
    order = np.argsort(keys, kind="stable")
    return ConsensusIndex(consensus, k, keys[order], pos[order])


# -- reconstruction ---------------------------------------------------------

def apply_mismatches(consensus: str, seg: Segment) -> str:
    start = seg.cons_pos
    end = start + seg.cons_len
    if start < 0 or end > len(consensus):
        raise AlignError(f"segment [{start}, {end}) lies outside the consensus")
    out = []
    cur = 0
    for mm in seg.mismatches:
        if mm.offset < cur:
            raise AlignError("mismatch offsets overlap")
        out.append(consensus[start + cur:start + mm.offset])
        cur = mm.offset
        if mm.kind is Kind.SUB:
            out.append(mm.payload)
            cur += 1
        elif mm.kind is Kind.INS:
            out.append(mm.payload)
        else:
            cur += mm.block_len
    if cur > seg.cons_len:
        raise AlignError("mismatches run past the segment end")
    out.append(consensus[start + cur:end])
    return "".join(out)


def reconstruct(alignment: Alignment, consensus: str) -> str:
    if not alignment.mapped:
        return alignment.clip_head
    if alignment.n_literal is not None:
        return alignment.n_literal
    parts = [alignment.clip_head]
    for seg in alignment.segments:
        piece = apply_mismatches(consensus, seg)
        parts.append(revcomp(piece) if seg.rev else piece)
    parts.append(alignment.clip_tail)
    return "".join(parts)


def encodable(alignment: Alignment, consensus: str) -> bool:
    """Indel sentinels need a real (non-N) consensus base at the indel offset,
    and clips must fit their 16-bit length fields."""
    if not alignment.mapped or alignment.n_literal is not None:
        return True
    if len(alignment.clip_head) > MAX_CLIP or len(alignment.clip_tail) > MAX_CLIP:
        return False
    if "N" in alignment.clip_head or "N" in alignment.clip_tail:
        return False
    n = len(consensus)
    for seg in alignment.segments:
        for mm in seg.mismatches:
            if mm.kind is not Kind.SUB:
                p = seg.cons_pos + mm.offset
                if p >= n or consensus[p] == "N":
                    return False
    return True


# -- seeding ----------------------------------------------------------------

class _Candidate(NamedTuple):
    votes: int
    pos: int          # approximate consensus start of the read
    rev: bool
    offs: np.ndarray  # oriented read offsets of seed hits
    poss: np.ndarray  # consensus positions of seed hits
    span: tuple[int, int]  # read-coordinate interval covered by hits


def _candidates(seq: str, index: ConsensusIndex, params: AlignParams) -> list[_Candidate]:
    n = len(seq)
    k = index.k
    fwd = base_codes(seq)
    rev = np.where(fwd < 4, 3 - fwd, fwd)[::-1].copy()
    offs, poss, table = _kernels.candidate_clusters(
        fwd, rev, k, index.keys, index.positions, params.max_occ, max(params.band, 8))
    out = []
    for strand, lo, hi, votes, start, a, b in table.tolist():
        if votes < params.min_seed_hits:
            continue
        b += k
        span = (n - b, n - a) if strand else (a, b)
        out.append(_Candidate(votes, start, bool(strand), offs[lo:hi], poss[lo:hi], span))
    out.sort(key=lambda c: (-c.votes, c.pos, c.rev))
    return out


def _anchor_chain(offs: np.ndarray, poss: np.ndarray):
    """Longest chain of hits increasing in both read offset and position."""
    order = np.lexsort((-poss, offs))
    offs, poss = offs[order], poss[order]
    chain = _kernels.anchor_chain(offs, poss)
    return offs[chain], poss[chain]


# -- single-orientation extension --------------------------------------------

class _Piece(NamedTuple):
    cons_pos: int
    mismatches: tuple[Mismatch, ...]
    cons_len: int
    clip_lo: int      # oriented bases clipped at the start
    clip_hi: int      # oriented bases clipped at the end
    edit_cost: int


def _canonical(ops, piece: str, window: str, cstart: int):
    """Turn alignment ops into (mismatches, consensus length).

    Within every maximal run of non-match columns, read and consensus bases are
    paired first (SUBs where they differ) and the length difference becomes one
    trailing INS or DEL block, which keeps offsets strictly increasing.
    """
    read_adv = (ops != _kernels.OP_DEL)
    cons_adv = (ops != _kernels.OP_INS)
    rpos = np.concatenate([[0], np.cumsum(read_adv)])
    cpos = np.concatenate([[0], np.cumsum(cons_adv)])
    cons_len = int(cpos[-1])
    nm = np.flatnonzero(ops != _kernels.OP_MATCH)
    events: list[Mismatch] = []
    if nm.size:
        breaks = np.flatnonzero(np.diff(nm) > 1) + 1
        starts = nm[np.concatenate([[0], breaks])]
        ends = nm[np.concatenate([breaks - 1, [nm.size - 1]])] + 1
        for s, e in zip(starts.tolist(), ends.tolist()):
            r0, c0 = int(rpos[s]), int(cpos[s])
            r, c = int(rpos[e]) - r0, int(cpos[e]) - c0
            rb = piece[r0:r0 + r]
            cb = window[cstart + c0:cstart + c0 + c]
            for q in range(min(r, c)):
                if rb[q] != cb[q]:
                    events.append(Mismatch(c0 + q, Kind.SUB, 1, rb[q]))
            if r > c:
                events.append(Mismatch(c0 + c, Kind.INS, r - c, rb[c:]))
            elif c > r:
                events.append(Mismatch(c0 + r, Kind.DEL, c - r, ""))
    events = _left_shift(events, window, cstart)
    # leading / trailing deletions only move the segment bounds
    shift = 0
    if events and events[0].kind is Kind.DEL and events[0].offset == 0:
        shift = events[0].block_len
        events = [m._replace(offset=m.offset - shift) for m in events[1:]]
        cons_len -= shift
    if events and events[-1].kind is Kind.DEL and events[-1].offset + events[-1].block_len == cons_len:
        cons_len -= events[-1].block_len
        events.pop()
    return tuple(events), cons_len, shift


def _left_shift(events: list[Mismatch], window: str, cstart: int) -> list[Mismatch]:
    """Move each indel to its leftmost equivalent position."""
    out: list[Mismatch] = []
    for mm in events:
        if mm.kind is not Kind.SUB:
            if out:
                prev = out[-1]
                floor_off = prev.offset
                if prev.kind is Kind.SUB:
                    floor_end = prev.offset + 1
                elif prev.kind is Kind.DEL:
                    floor_end = prev.offset + prev.block_len
                else:
                    floor_end = prev.offset
            else:
                floor_off, floor_end = -1, 0
            o = mm.offset
            if mm.kind is Kind.DEL:
                L = mm.block_len
                while (o - 1 > floor_off and o - 1 >= floor_end
                       and window[cstart + o - 1] == window[cstart + o + L - 1]):
                    o -= 1
                mm = mm._replace(offset=o)
            else:
                ins = mm.payload
                while (o - 1 > floor_off and o - 1 >= floor_end
                       and ins[-1] == window[cstart + o - 1]):
                    ins = window[cstart + o - 1] + ins[:-1]
                    o -= 1
                mm = mm._replace(offset=o, payload=ins)
        out.append(mm)
    return out


def _clip_point(ops) -> tuple[int, int]:
    """Best prefix to clip: returns (op count, read bases) or (0, 0)."""
    gain = np.where(ops != _kernels.OP_MATCH, _EVENT_BITS, 0) \
        - np.where(ops != _kernels.OP_DEL, _CLIP_BASE_BITS, 0)
    score = np.cumsum(gain)
    # cut just before a match op so the kept part starts on a match
    cut_ok = np.zeros(ops.size, dtype=bool)
    cut_ok[:-1] = ops[1:] == _kernels.OP_MATCH
    score = np.where(cut_ok, score, -1)
    if score.size == 0:
        return 0, 0
    p = int(np.argmax(score))
    if score[p] <= _CLIP_OVERHEAD:
        return 0, 0
    nops = p + 1
    rb = int(np.count_nonzero(ops[:nops] != _kernels.OP_DEL))
    if rb > MAX_CLIP:
        return 0, 0
    return nops, rb


def _extend(piece: str, index: ConsensusIndex, offs, poss, params: AlignParams,
            clip_lo: bool, clip_hi: bool) -> _Piece | None:
    """Align an oriented read piece near the given seed hits. ``offs`` are
    offsets into ``piece``."""
    cons = index.bases
    n = len(piece)
    codes = base_codes(piece)
    w = params.band
    diag = poss - offs
    if np.all(diag == diag[0]):
        a_offs, a_poss = offs[:1], poss[:1]
        diag = diag[:1]
    else:
        a_offs, a_poss = _anchor_chain(offs, poss)
        diag = a_poss - a_offs
    if np.all(diag == diag[0]):
        start = int(diag[0])
        if 0 <= start and start + n <= len(cons):
            hits = _kernels.hamming_events(codes, index.codes, start)
            if hits.size <= 2:
                mms = tuple(Mismatch(int(i), Kind.SUB, 1, piece[i]) for i in hits.tolist())
                return _Piece(start, mms, n, 0, 0, len(mms))
    rows = np.arange(n + 1)
    if a_offs.size > 1:
        centre = np.interp(rows, a_offs, diag).round().astype(np.int64) + rows
    else:
        centre = rows + int(diag[0])
    ws = max(0, int(centre.min()) - w)
    we = min(len(cons), int(centre.max()) + w + 1)
    if we - ws < 1:
        return None
    m = we - ws
    lo = np.clip(centre - ws, 0, m) - w
    ops, col, cost = _kernels.banded_align(codes, index.codes[ws:we], lo, w)
    if col < 0:
        return None
    head_ops = head_read = tail_ops = tail_read = 0
    if params.clip and clip_lo:
        head_ops, head_read = _clip_point(ops)
    if params.clip and clip_hi:
        tail_ops, tail_read = _clip_point(ops[head_ops:][::-1])
    if head_read + tail_read >= n:
        head_ops = head_read = tail_ops = tail_read = 0
    if head_ops:
        col += int(np.count_nonzero(ops[:head_ops] != _kernels.OP_INS))
    kept = ops[head_ops:ops.size - tail_ops]
    window = cons[ws:we]
    mms, cons_len, shift = _canonical(kept, piece[head_read:n - tail_read], window, col)
    cost = sum(mm.block_len for mm in mms)
    return _Piece(ws + col + shift, mms, cons_len, head_read, tail_read, cost)


def _piece_alignment(seq: str, lo: int, hi: int, cand: _Candidate, index: ConsensusIndex,
                     params: AlignParams, clip_head: bool, clip_tail: bool):
    """Align read interval [lo, hi) using one candidate. Returns
    (Segment, head clip length, tail clip length) or None."""
    n = len(seq)
    if cand.rev:
        olo, ohi = n - hi, n - lo
        piece = revcomp(seq[lo:hi])
        clip_lo, clip_hi = clip_tail, clip_head
    else:
        olo, ohi = lo, hi
        piece = seq[lo:hi]
        clip_lo, clip_hi = clip_head, clip_tail
    keep = (cand.offs >= olo) & (cand.offs + index.k <= ohi)
    if not keep.any():
        return None
    res = _extend(piece, index, cand.offs[keep] - olo, cand.poss[keep], params,
                  clip_lo, clip_hi)
    if res is None:
        return None
    head, tail = (res.clip_hi, res.clip_lo) if cand.rev else (res.clip_lo, res.clip_hi)
    seg = Segment(res.cons_pos, cand.rev, (lo + head, hi - tail), res.mismatches, res.cons_len)
    return seg, head, tail


def _within_rate(aln: Alignment, params: AlignParams) -> bool:
    for seg in aln.segments:
        span = seg.read_span[1] - seg.read_span[0]
        if span <= 0 or seg.edit_cost > params.max_edit_rate * span:
            return False
    return True


def _single(seq, cands, index, params):
    for cand in cands[:3]:
        got = _piece_alignment(seq, 0, len(seq), cand, index, params, True, True)
        if got is None:
            continue
        seg, head, tail = got
        aln = Alignment((seg,), seq[:head], seq[len(seq) - tail:] if tail else "")
        if _within_rate(aln, params):
            return aln
    return None


def _chimeric(seq, cands, index, params):
    n = len(seq)
    k = index.k
    min_gain = max(2 * k, n // 20)
    explained = np.zeros(n, dtype=bool)
    chosen: list[_Candidate] = []
    pool = list(cands)
    while len(chosen) < min(params.max_segments, 7) and pool:
        gains = [int(np.count_nonzero(~explained[c.span[0]:c.span[1]])) for c in pool]
        best = int(np.argmax(gains))
        if gains[best] < min_gain:
            break
        cand = pool.pop(best)
        chosen.append(cand)
        explained[cand.span[0]:cand.span[1]] = True
    if len(chosen) < 2:
        return None
    chosen.sort(key=lambda c: c.span)
    cuts = [0]
    for a, b in zip(chosen, chosen[1:]):
        if a.span[1] <= b.span[0]:
            cut = (a.span[1] + b.span[0]) // 2
        else:
            cut = (max(a.span[0], b.span[0]) + min(a.span[1], b.span[1])) // 2
        if cut - cuts[-1] < k:
            return None
        cuts.append(cut)
    cuts.append(n)
    if cuts[-1] - cuts[-2] < k:
        return None
    segs = []
    head = tail = 0
    last = len(chosen) - 1
    for i, cand in enumerate(chosen):
        got = _piece_alignment(seq, cuts[i], cuts[i + 1], cand, index, params,
                               i == 0, i == last)
        if got is None:
            return None
        seg, h, t = got
        if i == 0:
            head = h
        if i == last:
            tail = t
        segs.append(seg)
    aln = Alignment(tuple(segs), seq[:head], seq[n - tail:] if tail else "")
    return aln if _within_rate(aln, params) else None


def _default_cost(aln: Alignment) -> int:
    from .encode import default_cost
    return default_cost(aln)


_FAST_MM = 4
_FAST_MIN_LEN = 48


def align_read(read, index: ConsensusIndex, params: AlignParams | None = None) -> Alignment:
    return align_read_variants(read, index, params)[0]


def _check_params(params, index):
    params = params or AlignParams(k=index.k)
    if params.k != index.k:
        params = replace(params, k=index.k)
    if params.max_segments < 1:
        raise AlignError("max_segments must be at least 1")
    if params.k < 8:
        raise AlignError("seed length below 8 is too ambiguous for alignment")
    return params


def align_batch(reads, index: ConsensusIndex, params: AlignParams | None = None):
    """(best, single) pairs for many reads. Reads that are unique and within
    two substitutions of the consensus are placed by a compiled fast path;
    the rest go through :func:`align_read_variants`. Results equal calling
    :func:`align_read_variants` on each read."""
    params = _check_params(params, index)
    seqs = [r.bases if isinstance(r, ReadRecord) else r for r in reads]
    if not seqs:
        return []
    lens = np.array([len(s) for s in seqs], dtype=np.int64)
    starts = np.concatenate([[0], np.cumsum(lens)[:-1]]).astype(np.int64)
    codes = base_codes("".join(seqs))
    strand, pos, nmm, mms = _kernels.hamming_fast(
        codes, starts, lens, index.k, index.keys, index.positions, index.codes, _FAST_MM,
        _FAST_MIN_LEN)
    out = []
    for i, seq in enumerate(seqs):
        if strand[i] < 0:
            out.append(_variants(seq, index, params))
            continue
        rev = bool(strand[i])
        oriented = revcomp(seq) if rev else seq
        subs = tuple(Mismatch(o, Kind.SUB, 1, oriented[o]) for o in mms[i, :nmm[i]].tolist())
        aln = Alignment((Segment(int(pos[i]), rev, (0, len(seq)), subs, len(seq)),))
        out.append((aln, aln))
    return out


def align_read_variants(read, index: ConsensusIndex, params: AlignParams | None = None):
    """Return (best alignment, best alignment with a single segment). The two
    are the same object unless a chimeric alignment won."""
    return align_batch([read], index, params)[0]


def _variants(seq: str, index: ConsensusIndex, params: AlignParams):
    cost = params.cost or _default_cost
    cands = _candidates(seq, index, params)
    if not cands:
        lit = Alignment.literal(seq)
        return lit, lit
    if "N" in seq:
        top = cands[0]
        pos = min(max(top.pos, 0), len(index.bases) - 1)
        seg = Segment(pos, top.rev, (0, len(seq)), (), 0)
        aln = Alignment((seg,), n_literal=seq)
        return aln, aln
    literal = Alignment.literal(seq)
    literal_cost = cost(literal)
    single = _single(seq, cands, index, params)
    if single is not None and encodable(single, index.bases):
        single_cost = cost(single)
        if single_cost >= literal_cost:
            single, single_cost = literal, literal_cost
    else:
        single, single_cost = literal, literal_cost
    best = single
    threshold = max(params.chimeric_min, params.chimeric_frac * len(seq))
    clipped = len(single.clip_head) + len(single.clip_tail) if single.mapped else len(seq)
    if params.max_segments >= 2 and (not single.mapped or single.mismatch_count > threshold
                                     or clipped >= 2 * index.k):
        chim = _chimeric(seq, cands, index, params)
        if chim is not None and encodable(chim, index.bases) and cost(chim) < single_cost:
            best = chim
    return best, single
