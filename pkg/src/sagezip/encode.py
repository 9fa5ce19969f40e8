"""Array-stream encoder.

Each read is emitted by one routine, :func:`emit_read`, into a ``put`` sink
``put(stream, value, nbits, category)``. Real encoding passes a sink backed by
:class:`~sagezip.bitio.BitWriter` objects; size estimation passes a counter.
Both run the same code, so estimates are exact.

Per mapped read, in emission order::

    RFLAGS  escape=0, rev, [chimeric, [segment count:3, rev per extra segment]],
            [corner flag when the offset-0 corner scheme is off]
    ORDER   original index (fixed width, optional)
    MaPGA/MaPA  primary position delta, then zig-zag deltas of extra segments
    MPGA/MPA    [read length], [piece lengths of all but the last segment]
    per segment:
        MPGA/MPA  mismatch count
        per mismatch:
            MPGA/MPA  offset delta
            MBTA      [corner bit if this is the first mismatch, at offset 0]
                      merged: base, and after a sentinel base a type bit
                      plain:  2-bit type, then base for SUB
            MPGA/MPA  [indel flag, and 8-bit block length when flag is 0]
            MBTA      inserted bases

An escaped read is RFLAGS escape=1, ORDER, and one literal entry
(mode bit, 32-bit length, 2- or 3-bit packed bases) in LITERALS.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

from .align import Alignment, Kind, Mismatch, Segment
from .bitio import BitWriter
from .errors import CoverageError, SageError
from .seqio import PackMode, pack_bases
from .tune import ClassScheme

MAPGA, MAPA, MPGA, MPA, MBTA, RFLAGS, ORDER, LITERALS = range(8)
STREAM_NAMES = ("mapga", "mapa", "mpga", "mpa", "mbta", "rflags", "order_idx", "literals")
N_STREAMS = len(STREAM_NAMES)

CATEGORIES = ("matching_positions", "mismatch_counts", "mismatch_positions", "bases",
              "types", "rev", "corner_cases", "segments", "lengths", "flags", "order",
              "literals")
(C_MATCHING, C_COUNTS, C_POSITIONS, C_BASES, C_TYPES, C_REV, C_CORNER, C_SEGMENTS,
 C_LENGTHS, C_FLAGS, C_ORDER, C_LITERALS) = range(len(CATEGORIES))

MAX_BLOCK = 255
CLIP_LEN_BITS = 16
LITERAL_LEN_BITS = 32
SEGMENT_COUNT_BITS = 3
MAX_SEGMENTS = 7

_B2 = {"A": 0, "C": 1, "G": 2, "T": 3}
_TYPE_CODE = {Kind.SUB: 0, Kind.INS: 1, Kind.DEL: 2}


class Corner(enum.IntEnum):
    N_LITERAL = 0
    HEAD = 1
    TAIL = 2
    BOTH = 3


class Schemes(NamedTuple):
    matching: ClassScheme
    mismatch: ClassScheme
    count: ClassScheme
    side: ClassScheme


@dataclass(frozen=True)
class Layout:
    """Stream-format switches recorded in the container header."""

    indel_lengths: bool = True
    merged_types: bool = True
    corner_offset0: bool = True
    chimeric: bool = True
    fixed_read_len: int = 0
    order_bits: int = 0


def zigzag(d: int) -> int:
    return d << 1 if d >= 0 else (-d << 1) - 1


def unzigzag(z: int) -> int:
    return z >> 1 if not z & 1 else -((z + 1) >> 1)


def fixed_schemes() -> Schemes:
    return Schemes(ClassScheme.fixed_width(32), ClassScheme.fixed_width(32),
                   ClassScheme.fixed_width(16), ClassScheme.fixed_width(32))


def corner_kind(aln: Alignment) -> Corner | None:
    if aln.n_literal is not None:
        return Corner.N_LITERAL
    code = (1 if aln.clip_head else 0) | (2 if aln.clip_tail else 0)
    return Corner(code) if code else None


def split_events(mismatches: Sequence[Mismatch], indel_lengths: bool) -> list[Mismatch]:
    """Events as written: with the indel-length path, blocks longer than 255
    are cut into several; without it every indel base is its own event."""
    out = []
    for mm in mismatches:
        if mm.kind is Kind.SUB or (indel_lengths and mm.block_len <= MAX_BLOCK):
            out.append(mm)
            continue
        step = MAX_BLOCK if indel_lengths else 1
        for i in range(0, mm.block_len, step):
            n = min(step, mm.block_len - i)
            if mm.kind is Kind.DEL:
                out.append(Mismatch(mm.offset + i, Kind.DEL, n, ""))
            else:
                out.append(Mismatch(mm.offset, Kind.INS, n, mm.payload[i:i + n]))
    return out


def _put_coded(put, scheme: ClassScheme, value: int, guide: int, payload: int, cat: int):
    b = value.bit_length() or 1
    entry = scheme.table[b] if b < len(scheme.table) else None
    if entry is None:
        raise CoverageError(f"value {value} exceeds widest class {scheme.max_width}")
    rank, code_bits, width = entry
    if code_bits:
        put(guide, (1 << rank) - 1, code_bits, cat)
    put(payload, value, width, cat)


def _put_bases(put, stream: int, bases: str, mode: PackMode, cat: int):
    if not bases:
        return
    if len(bases) <= 8 and mode is PackMode.TWO_BIT:
        v = 0
        for i, ch in enumerate(bases):
            v |= _B2[ch] << (2 * i)
        put(stream, v, 2 * len(bases), cat)
        return
    packed = pack_bases(bases, mode)
    put(stream, int.from_bytes(packed.data, "little"), packed.nbits, cat)


def _put_literal(put, bases: str, mode: PackMode | None = None):
    if mode is None:
        mode = PackMode.THREE_BIT if "N" in bases else PackMode.TWO_BIT
    put(LITERALS, int(mode is PackMode.THREE_BIT), 1, C_LITERALS)
    put(LITERALS, len(bases), LITERAL_LEN_BITS, C_LITERALS)
    _put_bases(put, LITERALS, bases, mode, C_LITERALS)


def _put_corner_payload(put, aln: Alignment, corner: Corner):
    put(MBTA, int(corner), 2, C_CORNER)
    if corner is Corner.N_LITERAL:
        _put_literal(put, aln.n_literal, PackMode.THREE_BIT)
        return
    for clip in (aln.clip_head, aln.clip_tail):
        if clip:
            put(MBTA, len(clip), CLIP_LEN_BITS, C_CORNER)
            _put_bases(put, MBTA, clip, PackMode.TWO_BIT, C_CORNER)


def emit_read(put, aln: Alignment, layout: Layout, schemes: Schemes, prev_pos: int,
              consensus: str | None = None, order_idx: int = 0, code=None) -> None:
    """Emit one read. ``prev_pos`` is the previous read's primary position (or
    the partition start); ``consensus`` supplies sentinel bases and may be
    None when only sizes matter. ``code`` replaces the class coder; the
    planner uses it to collect value histograms instead of bits."""
    code = code or _put_coded
    if not aln.mapped:
        put(RFLAGS, 1, 1, C_FLAGS)
        if layout.order_bits:
            put(ORDER, order_idx, layout.order_bits, C_ORDER)
        _put_literal(put, aln.clip_head)
        return
    segs = aln.segments
    put(RFLAGS, 0, 1, C_FLAGS)
    put(RFLAGS, int(segs[0].rev), 1, C_REV)
    if layout.chimeric:
        chim = len(segs) > 1
        put(RFLAGS, int(chim), 1, C_SEGMENTS)
        if chim:
            put(RFLAGS, len(segs), SEGMENT_COUNT_BITS, C_SEGMENTS)
            for seg in segs[1:]:
                put(RFLAGS, int(seg.rev), 1, C_REV)
    elif len(segs) > 1:
        raise SageError("chimeric alignment under a layout without segments")
    corner = corner_kind(aln)
    if not layout.corner_offset0:
        put(RFLAGS, int(corner is not None), 1, C_CORNER)
    if layout.order_bits:
        put(ORDER, order_idx, layout.order_bits, C_ORDER)

    code(put, schemes.matching, segs[0].cons_pos - prev_pos, MAPGA, MAPA, C_MATCHING)
    for a, b in zip(segs, segs[1:]):
        code(put, schemes.matching, zigzag(b.cons_pos - a.cons_pos), MAPGA, MAPA,
                   C_MATCHING)
    if not layout.fixed_read_len:
        code(put, schemes.count, aln.read_length, MPGA, MPA, C_LENGTHS)
    for seg in segs[:-1]:
        code(put, schemes.side, seg.read_span[1] - seg.read_span[0], MPGA, MPA,
                   C_SEGMENTS)
    if corner is not None and not layout.corner_offset0:
        _put_corner_payload(put, aln, corner)

    for j, seg in enumerate(segs):
        events = split_events(seg.mismatches, layout.indel_lengths) \
            if aln.n_literal is None else []
        artificial = j == 0 and corner is not None and layout.corner_offset0
        code(put, schemes.count, len(events) + artificial, MPGA, MPA, C_COUNTS)
        prev = 0
        first = j == 0 and layout.corner_offset0
        if artificial:
            code(put, schemes.mismatch, 0, MPGA, MPA, C_CORNER)
            put(MBTA, 1, 1, C_CORNER)
            _put_corner_payload(put, aln, corner)
            first = False
        for ev in events:
            if ev.offset < prev:
                raise SageError("mismatch offsets must not decrease")
            code(put, schemes.mismatch, ev.offset - prev, MPGA, MPA, C_POSITIONS)
            prev = ev.offset
            if first and ev.offset == 0:
                put(MBTA, 0, 1, C_CORNER)
            first = False
            _emit_event(put, ev, seg, layout, consensus)


def _emit_event(put, ev: Mismatch, seg: Segment, layout: Layout, consensus):
    kind = ev.kind
    if layout.merged_types:
        if kind is Kind.SUB:
            if consensus is not None and consensus[seg.cons_pos + ev.offset] == ev.payload:
                raise SageError("substitution equals the consensus base")
            put(MBTA, _B2[ev.payload], 2, C_BASES)
            return
        sentinel = 0
        if consensus is not None:
            base = consensus[seg.cons_pos + ev.offset]
            if base not in _B2:
                raise SageError(f"indel sentinel at consensus base {base!r}")
            sentinel = _B2[base]
        put(MBTA, sentinel, 2, C_TYPES)
        put(MBTA, int(kind is Kind.DEL), 1, C_TYPES)
    else:
        put(MBTA, _TYPE_CODE[kind], 2, C_TYPES)
        if kind is Kind.SUB:
            put(MBTA, _B2[ev.payload], 2, C_BASES)
            return
    if layout.indel_lengths:
        put(MPGA, int(ev.block_len == 1), 1, C_POSITIONS)
        if ev.block_len > 1:
            put(MPA, ev.block_len, 8, C_POSITIONS)
    elif ev.block_len != 1:
        raise SageError("multi-base indel without the indel-length path")
    if kind is Kind.INS:
        _put_bases(put, MBTA, ev.payload, PackMode.TWO_BIT, C_BASES)


# -- sinks -----------------------------------------------------------------

class SizeCounter:
    """``put`` sink that only counts bits per stream and per category."""

    __slots__ = ("streams", "categories")

    def __init__(self):
        self.streams = [0] * N_STREAMS
        self.categories = [0] * len(CATEGORIES)

    def __call__(self, stream, value, nbits, cat):
        self.streams[stream] += nbits
        self.categories[cat] += nbits

    @property
    def total(self) -> int:
        return sum(self.streams)


class StreamWriter(SizeCounter):
    __slots__ = ("writers",)

    def __init__(self):
        super().__init__()
        self.writers = [BitWriter() for _ in range(N_STREAMS)]

    def __call__(self, stream, value, nbits, cat):
        w = self.writers[stream]
        if value >> nbits:
            raise ValueError(f"value {value} does not fit in {nbits} bits")
        # inlined BitWriter.write
        w._acc |= value << w._nacc
        w._nacc += nbits
        if w._nacc >= 64:
            n = w._nacc >> 3
            w._out += (w._acc & ((1 << (n << 3)) - 1)).to_bytes(n, "little")
            w._acc >>= n << 3
            w._nacc &= 7
        self.streams[stream] += nbits
        self.categories[cat] += nbits

    def blobs(self) -> list[bytes]:
        return [w.getvalue() for w in self.writers]


# -- public encoder operations ---------------------------------------------

def estimate_bits(aln: Alignment, schemes: Schemes, layout: Layout | None = None,
                  prev_pos: int | None = None) -> int:
    """Exact number of bits :func:`emit_read` writes for this read. With
    ``prev_pos`` None the matching-position delta is charged as zero."""
    layout = layout or Layout()
    counter = SizeCounter()
    if prev_pos is None:
        prev_pos = aln.segments[0].cons_pos if aln.mapped else 0
    emit_read(counter, aln, layout, schemes, prev_pos)
    return counter.total


_DEFAULT = None


def default_schemes() -> Schemes:
    """Generic schemes used before a dataset has been tuned."""
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = Schemes(
            ClassScheme((4, 8, 16, 40), (0, 1, 2, 3)),
            ClassScheme((4, 8, 16, 40), (0, 1, 2, 3)),
            ClassScheme((2, 4, 8, 40), (0, 1, 2, 3)),
            ClassScheme((8, 16, 40), (0, 1, 2)),
        )
    return _DEFAULT


def literal_bits(bases: str) -> int:
    """Size of an escaped read: escape bit plus its literal entry."""
    return 2 + LITERAL_LEN_BITS + len(bases) * (3 if "N" in bases else 2)


def default_cost(aln: Alignment) -> int:
    if not aln.mapped:
        return literal_bits(aln.clip_head)
    return estimate_bits(aln, default_schemes(), Layout(fixed_read_len=0))


def sort_order(alignments: Sequence[Alignment]) -> list[int]:
    """Indices by primary position (stable); literal reads last in input order."""
    mapped = [i for i, a in enumerate(alignments) if a.mapped]
    mapped.sort(key=lambda i: alignments[i].segments[0].cons_pos)
    return mapped + [i for i, a in enumerate(alignments) if not a.mapped]


def sort_and_delta(alignments: Sequence[Alignment], base: int = 0):
    """Return (ordered alignments, matching-position deltas of the mapped ones)."""
    ordered = [alignments[i] for i in sort_order(alignments)]
    deltas = []
    prev = base
    for a in ordered:
        if a.mapped:
            deltas.append(a.segments[0].cons_pos - prev)
            prev = a.segments[0].cons_pos
    return ordered, deltas


def encode_matching_positions(deltas: Sequence[int], scheme: ClassScheme):
    """Guide codes and payloads for a run of matching-position deltas."""
    mapga, mapa = BitWriter(), BitWriter()
    writers = {MAPGA: mapga, MAPA: mapa}

    def put(stream, value, nbits, cat):
        writers[stream].write(value, nbits)

    for d in deltas:
        if d < 0:
            raise ValueError("matching-position deltas must be nonnegative")
        _put_coded(put, scheme, d, MAPGA, MAPA, C_MATCHING)
    return mapga, mapa


def _single_read_streams(aln, schemes, layout, consensus):
    w = StreamWriter()
    emit_read(w, aln, layout, schemes, aln.segments[0].cons_pos if aln.mapped else 0,
              consensus)
    return w


def encode_mismatch_positions(aln: Alignment, count_scheme: ClassScheme,
                              pos_scheme: ClassScheme, long_read: bool):
    """MPGA and MPA bits of one read (fixed-length layout, so no read length)."""
    for seg in aln.segments:
        offs = [m.offset for m in seg.mismatches]
        if any(b <= a for a, b in zip(offs, offs[1:])):
            raise SageError("mismatch offsets must increase strictly")
    schemes = Schemes(ClassScheme.fixed_width(40), pos_scheme, count_scheme,
                      ClassScheme.fixed_width(32))
    layout = Layout(indel_lengths=long_read, fixed_read_len=max(aln.read_length, 1))
    w = _single_read_streams(aln, schemes, layout, None)
    return w.writers[MPGA], w.writers[MPA]


def encode_bases_types(aln: Alignment, consensus: str, layout: Layout | None = None):
    """MBTA bits of one read."""
    layout = layout or Layout(fixed_read_len=max(aln.read_length, 1))
    w = _single_read_streams(aln, fixed_schemes()._replace(
        matching=ClassScheme.fixed_width(40)), layout, consensus)
    return w.writers[MBTA]


def bit_string(writer: BitWriter) -> str:
    """Stream-order bits of a writer as a '0'/'1' string."""
    n = writer.bit_length
    data = int.from_bytes(writer.getvalue(), "little")
    return "".join("1" if data >> i & 1 else "0" for i in range(n))


class EncodedPartition(NamedTuple):
    blobs: list[bytes]
    stream_bits: list[int]
    categories: list[int]
    read_count: int


def encode_partition(alignments: Sequence[Alignment], order: Sequence[int], start: int,
                     layout: Layout, schemes: Schemes, consensus: str,
                     put_factory: Callable[[], StreamWriter] = StreamWriter) -> EncodedPartition:
    """Encode the reads ``order`` (already sorted, literal reads last)."""
    w = put_factory()
    prev = start
    for idx in order:
        aln = alignments[idx]
        emit_read(w, aln, layout, schemes, prev, consensus, idx)
        if aln.mapped:
            prev = aln.segments[0].cons_pos
    return EncodedPartition(w.blobs(), list(w.streams), list(w.categories), len(order))
