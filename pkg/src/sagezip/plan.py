"""Per-dataset choice of format features and class schemes.

Features are switched on level by level (NO, O1..O4). At each level the
candidates are the previous choice and the previous choice plus that level's
features; the candidate with the smallest exact container size wins, so the
size never grows from one level to the next.

Sizes are exact without re-encoding. Each read is run once per indel split
through :func:`~sagezip.encode.emit_read` with a coder that records value
bit lengths instead of bits, plus counters for the bits that the remaining
switches (merged types, offset-0 corner marker) add or remove. These records
are cached on the alignment and summed per partition.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .align import Alignment, Kind
from .container import PartitionSlice, container_overhead, partition_reads
from .encode import (C_CORNER, C_ORDER, C_COUNTS, C_MATCHING, C_SEGMENTS, C_TYPES, CATEGORIES, MAPA, MAPGA,
                     MBTA, MPA, MPGA, N_STREAMS, ORDER, RFLAGS, Layout, Schemes,
                     corner_kind, emit_read, sort_order, split_events)
from .seqio import PackedSeq
from .tune import MAX_BITS, BitLenHistogram, ClassScheme, cost_of, optimize_classes

LEVELS = ("NO", "O1", "O2", "O3", "O4")
_SCHEME_NAMES = ("matching", "mismatch", "count", "side")
_FIXED_WIDTHS = (32, 32, 16, 32)
_GUIDE = (MAPGA, MPGA, MPGA, MPGA)
_PAYLOAD = (MAPA, MPA, MPA, MPA)


@dataclass(frozen=True)
class Features:
    tune_matching: bool = False
    tune_mismatch: bool = False
    indel_lengths: bool = False
    chimeric: bool = False
    merged_types: bool = False
    corner_offset0: bool = False

    @property
    def tuned(self) -> tuple[bool, bool, bool, bool]:
        return (self.tune_matching, self.tune_mismatch, self.tune_mismatch, self.chimeric)


@dataclass
class _PartStats:
    """Everything needed to size one partition under any feature choice."""

    hists: dict = field(default_factory=dict)       # (scheme, category) -> counts
    streams: list = field(default_factory=lambda: [0] * N_STREAMS)
    categories: list = field(default_factory=lambda: [0] * len(CATEGORIES))
    n_mapped: int = 0
    n_corner: int = 0
    n_offset0: int = 0
    n_sub: int = 0
    n_indel: int = 0
    corner_counts: list = field(default_factory=list)

    def hist(self, sid: int, cat: int) -> list:
        h = self.hists.get((sid, cat))
        if h is None:
            h = self.hists[(sid, cat)] = [0] * (MAX_BITS + 1)
        return h


class _Recorder:
    """``put`` sink and class-coder hook that log one read's contributions."""

    __slots__ = ("puts", "codes", "skip")

    def __init__(self):
        self.puts = []
        self.codes = []
        self.skip = True

    def __call__(self, stream, value, nbits, cat):
        self.puts.append((stream, cat, nbits))

    def code(self, put, sid, value, guide, payload, cat):
        if self.skip and cat == C_MATCHING:
            self.skip = False          # primary delta depends on the previous read
            return
        self.codes.append((sid, cat, value.bit_length() or 1))


def _read_record(aln: Alignment, layout: Layout):
    """Order-independent contributions of one read under ``layout`` (which
    has the chimeric field on): puts, coded values and corner counters."""
    rec = _Recorder()
    emit_read(rec, aln, layout, Schemes(0, 1, 2, 3), 0, None, 0, rec.code)
    puts: dict = {}
    for key in rec.puts:
        puts[key[:2]] = puts.get(key[:2], 0) + key[2]
    counters = None
    if aln.mapped:
        corner = corner_kind(aln) is not None
        if aln.n_literal is not None:
            counters = (1, 0, 0, 0, 0)
        else:
            n_sub = n_indel = 0
            n_off0 = 0
            first_count = 0
            for j, seg in enumerate(aln.segments):
                events = split_events(seg.mismatches, layout.indel_lengths)
                subs = sum(1 for e in events if e.kind is Kind.SUB)
                n_sub += subs
                n_indel += len(events) - subs
                if j == 0:
                    first_count = len(events)
                    if not corner and events and events[0].offset == 0:
                        n_off0 = 1
            counters = (int(corner), n_off0, n_sub, n_indel,
                        first_count if corner and aln.n_literal is None else 0)
    return tuple((s, c, b) for (s, c), b in puts.items()), tuple(rec.codes), counters


def _collect(alignments: Sequence[Alignment], slices: Sequence[PartitionSlice],
             layout: Layout, memo: dict) -> list[_PartStats]:
    """Stats under ``layout`` with merged types on and the offset-0 corner
    marker off; the other variants are derived from the counters. ``memo``
    caches per-read records across calls that share alignment objects.
    Records are interned, so each slice sums unique records by multiplicity."""
    rec_layout = replace(layout, chimeric=True, order_bits=0)
    rec_key = ("_plan_record", layout.indel_lengths, bool(layout.fixed_read_len))
    interned = memo.setdefault("interned", {})
    records = memo.setdefault("records", [])
    out = []
    for sl in slices:
        st = _PartStats()
        streams, cats, hists = st.streams, st.categories, st.hists
        rids = []
        positions = [sl.start]
        for idx in sl.order:
            aln = alignments[idx]
            key = (id(aln), layout.indel_lengths)
            rid = memo.get(key)
            if rid is None:
                # records depend on the alignment only, so keep them on it
                rec = aln.__dict__.get(rec_key)
                if rec is None:
                    rec = aln.__dict__[rec_key] = _read_record(aln, rec_layout)
                rid = interned.get(rec)
                if rid is None:
                    rid = interned[rec] = len(records)
                    records.append(rec)
                memo[key] = rid
            rids.append(rid)
            if aln.mapped:
                positions.append(aln.segments[0].cons_pos)
        for rid, mult in Counter(rids).items():
            puts, codes, counters = records[rid]
            for stream, cat, nbits in puts:
                streams[stream] += nbits * mult
                cats[cat] += nbits * mult
            for sid, cat, b in codes:
                h = hists.get((sid, cat))
                if h is None:
                    h = hists[(sid, cat)] = [0] * (MAX_BITS + 1)
                h[b] += mult
            if counters is None:
                continue
            corner, n_off0, n_sub, n_indel, corner_count = counters
            st.n_mapped += mult
            st.n_sub += n_sub * mult
            st.n_indel += n_indel * mult
            st.n_offset0 += n_off0 * mult
            if corner:
                st.n_corner += mult
                st.corner_counts.extend([corner_count] * mult)
        streams[ORDER] += layout.order_bits * len(rids)
        cats[C_ORDER] += layout.order_bits * len(rids)
        if not layout.chimeric:
            streams[RFLAGS] -= st.n_mapped
            cats[C_SEGMENTS] -= st.n_mapped
        if len(positions) > 1:
            h = st.hist(0, C_MATCHING)
            for d in np.diff(np.asarray(positions, dtype=np.int64)).tolist():
                h[d.bit_length() or 1] += 1
        out.append(st)
    return out


@dataclass
class Evaluation:
    features: Features
    schemes: Schemes
    total_bytes: int
    stream_bits: list[list[int]]
    categories: list[int]

    def category_dict(self) -> dict[str, int]:
        return dict(zip(CATEGORIES, self.categories))


def _adjusted(st: _PartStats, f: Features) -> dict:
    """Histograms with the offset-0 corner marker applied if enabled."""
    hists = {key: list(h) for key, h in st.hists.items()}
    if f.corner_offset0 and st.n_corner:
        h = hists.setdefault((2, C_COUNTS), [0] * (MAX_BITS + 1))
        for c in st.corner_counts:
            h[c.bit_length() or 1] -= 1
            h[(c + 1).bit_length()] += 1
        hists.setdefault((1, C_CORNER), [0] * (MAX_BITS + 1))[1] += st.n_corner
    return hists


def _pick_scheme(h: list, tuned: bool, fixed_width: int, max_k: int) -> ClassScheme:
    hist = BitLenHistogram(tuple(h))
    fixed = ClassScheme.fixed_width(max(fixed_width, hist.max_bitlen))
    if not tuned or hist.total == 0:
        return fixed
    opt = optimize_classes(hist, max_k)
    if cost_of(hist, opt) + 8 * len(opt.to_bytes()) < cost_of(hist, fixed) + 8 * len(fixed.to_bytes()):
        return opt
    return fixed


def _evaluate(stats: list[_PartStats], f: Features, max_k: int, overhead_fn) -> Evaluation:
    per_part = [_adjusted(st, f) for st in stats]
    glob = [[0] * (MAX_BITS + 1) for _ in range(4)]
    for hists in per_part:
        for (sid, _), h in hists.items():
            g = glob[sid]
            for b, c in enumerate(h):
                g[b] += c
    schemes = Schemes(*(_pick_scheme(glob[s], f.tuned[s], _FIXED_WIDTHS[s], max_k)
                        for s in range(4)))
    stream_bits = []
    categories = [0] * len(CATEGORIES)
    payload_bytes = 0
    for st, hists in zip(stats, per_part):
        bits = list(st.streams)
        cats = list(st.categories)
        for (sid, cat), h in hists.items():
            table = schemes[sid].table
            g = p = 0
            for b, c in enumerate(h):
                if c:
                    _, code_bits, width = table[b]
                    g += c * code_bits
                    p += c * width
            bits[_GUIDE[sid]] += g
            bits[_PAYLOAD[sid]] += p
            cats[cat] += g + p
        if not f.merged_types:
            extra = 2 * st.n_sub - st.n_indel
            bits[MBTA] += extra
            cats[C_TYPES] += extra
        if f.corner_offset0:
            bits[RFLAGS] -= st.n_mapped
            bits[MBTA] += st.n_corner + st.n_offset0
            cats[C_CORNER] += st.n_corner + st.n_offset0 - st.n_mapped
        stream_bits.append(bits)
        payload_bytes += sum((b + 7) // 8 for b in bits)
        for i, c in enumerate(cats):
            categories[i] += c
    total = payload_bytes + overhead_fn(schemes)
    return Evaluation(f, schemes, total, stream_bits, categories)


@dataclass
class Plan:
    features: Features
    layout: Layout
    schemes: Schemes
    alignments: list[Alignment]
    slices: list[PartitionSlice]
    evaluation: Evaluation
    levels: dict[str, Evaluation]

    @property
    def total_bytes(self) -> int:
        return self.evaluation.total_bytes


def order_bits_for(n: int) -> int:
    return math.ceil(math.log2(n)) if n > 1 else 0


def make_plan(best: Sequence[Alignment], single: Sequence[Alignment] | None, partitions: int,
              consensus_len: int, *, long_read: bool = False, level: str = "O4",
              max_k: int = 6, preserve_order: bool = False,
              embedded: PackedSeq | None = None, sidecar_len: int = 0) -> Plan:
    """Pick features level by level up to ``level``. ``best`` may contain
    chimeric alignments; ``single`` holds the single-segment alternatives
    (None when chimeric alignment was not attempted)."""
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}")
    n = len(best)
    lengths = {a.read_length for a in best}
    fixed_len = lengths.pop() if len(lengths) == 1 else 0
    if fixed_len >= 1 << 32:
        fixed_len = 0
    obits = order_bits_for(n) if preserve_order else 0
    if single is None:
        single = best
    has_chim = any(len(a.segments) > 1 for a in best)
    sets = {False: list(single), True: list(best)}
    slices = {}
    for chim, alns in sets.items():
        if chim and not has_chim:
            continue
        slices[chim] = partition_reads(alns, sort_order(alns), partitions, consensus_len)
    cache: dict = {}
    memo: dict = {}

    def stats_for(chim: bool, split: bool):
        key = (chim, split)
        if key not in cache:
            lay = Layout(indel_lengths=split, merged_types=True, corner_offset0=False,
                         chimeric=chim, fixed_read_len=fixed_len, order_bits=obits)
            cache[key] = _collect(sets[chim], slices[chim], lay, memo)
        return cache[key]

    def overhead(schemes):
        return container_overhead(partitions, schemes, embedded) + sidecar_len

    def evaluate(f: Features) -> Evaluation:
        return _evaluate(stats_for(f.chimeric, f.indel_lengths), f, max_k, overhead)

    cur = Features()
    results = {"NO": evaluate(cur)}
    steps = {
        "O1": [dict(tune_matching=True)],
        "O2": [dict(tune_mismatch=True)] + ([dict(tune_mismatch=True, indel_lengths=True)]
                                             if long_read else []),
        "O3": [dict(merged_types=True)] + ([dict(chimeric=True), dict(chimeric=True,
                                                                      merged_types=True)]
                                            if has_chim else []),
        "O4": [dict(corner_offset0=True)],
    }
    best_eval = results["NO"]
    for name in LEVELS[1:LEVELS.index(level) + 1]:
        for change in steps[name]:
            cand = evaluate(replace(cur, **change))
            if cand.total_bytes < best_eval.total_bytes:
                best_eval = cand
        cur = best_eval.features
        results[name] = best_eval
    f = best_eval.features
    layout = Layout(indel_lengths=f.indel_lengths, merged_types=f.merged_types,
                    corner_offset0=f.corner_offset0, chimeric=f.chimeric,
                    fixed_read_len=fixed_len, order_bits=obits)
    return Plan(f, layout, best_eval.schemes, sets[f.chimeric], slices[f.chimeric],
                best_eval, results)
