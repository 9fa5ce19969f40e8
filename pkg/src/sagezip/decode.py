"""Single-pass streaming decoder.

The work is split like the hardware it models. :class:`ScanState` owns the
guide/payload cursors (matching positions, counts, mismatch offsets, indel
lengths) and :class:`ReconstructState` owns the consensus walk, the MBTA
cursor and the per-read flag streams. :func:`decode_next_read` runs the
handshake for one read: the scan side supplies the next mismatch offset, the
reconstruct side copies consensus up to it and inspects MBTA, and when it
sees an indel sentinel it asks the scan side for the block length.

Every stream is read strictly forward through a 64-bit register.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

from .bitio import BitReader
from .encode import (CLIP_LEN_BITS, LITERAL_LEN_BITS, LITERALS, MAPA, MAPGA, MBTA, MPA,
                     MPGA, ORDER, RFLAGS, SEGMENT_COUNT_BITS, Corner, Layout, Schemes,
                     unzigzag)
from .errors import CorruptionError
from .seqio import revcomp
from .tune import MAX_BITS

CHUNK = 150

_DNA = "ACGT"
# 8 bases of 2 bits -> string
_TWO = [None] * (1 << 16)
for _v in range(1 << 16):
    _TWO[_v] = "".join(_DNA[(_v >> (2 * i)) & 3] for i in range(8))
_THREE = {}
for _v in range(1 << 12):
    codes = [(_v >> (3 * i)) & 7 for i in range(4)]
    if max(codes) <= 4:
        _THREE[_v] = "".join("ACGTN"[c] for c in codes)
_CODE = {"A": 0, "C": 1, "G": 2, "T": 3}


def read_bases(reader: BitReader, n: int, width: int) -> str:
    out = []
    if width == 2:
        while n >= 8:
            out.append(_TWO[reader.read(16)])
            n -= 8
        if n:
            out.append(_TWO[reader.read(2 * n)][:n])
    else:
        while n > 0:
            m = min(4, n)
            v = reader.read(3 * m)
            s = _THREE.get(v)
            if s is None:
                raise CorruptionError("invalid 3-bit base code", stream=reader.name,
                                      offset=reader.pos)
            out.append(s[:m])
            n -= m
    return "".join(out)


@dataclass
class DecodeStats:
    """Value histograms gathered while decoding (for ``inspect --stats``)."""

    matching: list[int] = field(default_factory=lambda: [0] * (MAX_BITS + 1))
    mismatch: list[int] = field(default_factory=lambda: [0] * (MAX_BITS + 1))
    counts: dict[int, int] = field(default_factory=dict)
    indel_lengths: dict[int, int] = field(default_factory=dict)
    reads: int = 0
    literal_reads: int = 0
    corner_reads: int = 0
    chimeric_reads: int = 0
    rev_segments: int = 0


class ScanState:
    """Guide/payload cursors for positions, counts and lengths."""

    def __init__(self, readers: Sequence[BitReader], schemes: Schemes, start: int,
                 stats: DecodeStats | None = None):
        self.mapga, self.mapa = readers[MAPGA], readers[MAPA]
        self.mpga, self.mpa = readers[MPGA], readers[MPA]
        self.schemes = schemes
        self.position = start
        self.stats = stats

    @staticmethod
    def _coded(scheme, guide: BitReader, payload: BitReader) -> int:
        if scheme.fixed:
            return payload.read(scheme.widths[0])
        return payload.read(scheme.width_by_rank[guide.read_unary(scheme.k)])

    def next_position(self) -> int:
        d = self._coded(self.schemes.matching, self.mapga, self.mapa)
        if self.stats is not None:
            self.stats.matching[d.bit_length() or 1] += 1
        self.position += d
        return self.position

    def segment_delta(self) -> int:
        return unzigzag(self._coded(self.schemes.matching, self.mapga, self.mapa))

    def read_length(self) -> int:
        return self._coded(self.schemes.count, self.mpga, self.mpa)

    def piece_length(self) -> int:
        return self._coded(self.schemes.side, self.mpga, self.mpa)

    def count(self) -> int:
        c = self._coded(self.schemes.count, self.mpga, self.mpa)
        if self.stats is not None:
            self.stats.counts[c] = self.stats.counts.get(c, 0) + 1
        return c

    def mismatch_delta(self) -> int:
        d = self._coded(self.schemes.mismatch, self.mpga, self.mpa)
        if self.stats is not None:
            self.stats.mismatch[d.bit_length() or 1] += 1
        return d

    def indel_length(self) -> int:
        """Answer the reconstruct side's request after an indel sentinel."""
        if self.mpga.read(1):
            n = 1
        else:
            n = self.mpa.read(8)
            if n < 2:
                raise CorruptionError(f"indel block length {n} below 2", stream="mpa",
                                      offset=self.mpa.pos - 8)
        if self.stats is not None:
            self.stats.indel_lengths[n] = self.stats.indel_lengths.get(n, 0) + 1
        return n


class ReconstructState:
    """Consensus walk, MBTA cursor and flag/literal streams."""

    def __init__(self, readers: Sequence[BitReader], consensus: str):
        self.mbta = readers[MBTA]
        self.rflags = readers[RFLAGS]
        self.order = readers[ORDER]
        self.literals = readers[LITERALS]
        self.consensus = consensus
        self.cursor = 0
        self.window_start = 0
        self.window = ""

    def _base(self, p: int) -> str:
        if not self.window_start <= p < self.window_start + len(self.window):
            if not 0 <= p < len(self.consensus):
                raise CorruptionError(f"consensus position {p} out of range", stream="mbta",
                                      offset=self.mbta.pos)
            self.window_start = p
            self.window = self.consensus[p:p + CHUNK]
        return self.window[p - self.window_start]

    def copy(self, end: int, out: list) -> None:
        """Emit consensus bases from the cursor to ``end`` in 150-base chunks."""
        if end > len(self.consensus) or end < self.cursor:
            raise CorruptionError(f"consensus walk to {end} leaves the consensus",
                                  stream="mbta", offset=self.mbta.pos)
        while self.cursor < end:
            stop = min(end, self.cursor + CHUNK)
            out.append(self.consensus[self.cursor:stop])
            self.cursor = stop

    def literal(self) -> str:
        r = self.literals
        three = r.read(1)
        n = r.read(LITERAL_LEN_BITS)
        if n == 0:
            raise CorruptionError("empty literal", stream=r.name, offset=r.pos)
        return read_bases(r, n, 3 if three else 2)

    def corner_payload(self):
        """Returns (n_literal, head clip, tail clip)."""
        sub = Corner(self.mbta.read(2))
        if sub is Corner.N_LITERAL:
            return self.literal(), "", ""
        clips = []
        for bit in (1, 2):
            if sub & bit:
                n = self.mbta.read(CLIP_LEN_BITS)
                if n == 0:
                    raise CorruptionError("empty clip", stream="mbta", offset=self.mbta.pos)
                clips.append(read_bases(self.mbta, n, 2))
            else:
                clips.append("")
        return None, clips[0], clips[1]


class DecodedRead(NamedTuple):
    order_idx: int | None
    bases: str


def decode_next_read(scan: ScanState, recon: ReconstructState, layout: Layout) -> DecodedRead:
    stats = scan.stats
    rflags = recon.rflags
    if rflags.read(1):
        idx = recon.order.read(layout.order_bits) if layout.order_bits else None
        if stats is not None:
            stats.reads += 1
            stats.literal_reads += 1
        return DecodedRead(idx, recon.literal())
    revs = [rflags.read(1)]
    if layout.chimeric and rflags.read(1):
        m = rflags.read(SEGMENT_COUNT_BITS)
        if m < 2:
            raise CorruptionError(f"chimeric read with {m} segments", stream="rflags",
                                  offset=rflags.pos)
        revs += [rflags.read(1) for _ in range(m - 1)]
    m = len(revs)
    flagged = None if layout.corner_offset0 else rflags.read(1)
    idx = recon.order.read(layout.order_bits) if layout.order_bits else None

    positions = [scan.next_position()]
    for _ in range(m - 1):
        positions.append(positions[-1] + scan.segment_delta())
    length = layout.fixed_read_len or scan.read_length()
    spans = [scan.piece_length() for _ in range(m - 1)]
    n_lit, head, tail = None, "", ""
    corner = False
    if flagged:
        n_lit, head, tail = recon.corner_payload()
        corner = True

    pieces = []
    for j in range(m):
        count = scan.count()
        pos = positions[j]
        recon.cursor = pos
        out: list[str] = []
        produced = 0
        cur = 0        # consensus offset consumed within this segment
        prev = 0
        first = j == 0 and layout.corner_offset0
        if j == m - 1:
            target = None   # known once clips are read
        else:
            target = spans[j]
        for _ in range(count):
            off = prev + scan.mismatch_delta()
            prev = off
            if first and off == 0 and recon.mbta.read(1):
                if corner:
                    raise CorruptionError("second corner marker", stream="mbta",
                                          offset=recon.mbta.pos)
                n_lit, head, tail = recon.corner_payload()
                corner = True
                first = False
                continue
            first = False
            if off < cur:
                raise CorruptionError(f"mismatch offset {off} behind cursor {cur}",
                                      stream="mpa", offset=scan.mpa.pos)
            recon.copy(pos + off, out)
            produced += off - cur
            cur = off
            produced, cur = _apply_event(scan, recon, layout, pos, cur, out, produced)
        if n_lit is not None:
            if count != int(layout.corner_offset0) or m != 1:
                raise CorruptionError("N read with mismatches", stream="mpga",
                                      offset=scan.mpga.pos)
            break
        if target is None:
            target = length - len(head) - len(tail) - sum(spans)
            if target < 1:
                raise CorruptionError("read length smaller than its clips and pieces",
                                      stream="mpa", offset=scan.mpa.pos)
        need = target - produced
        if need < 0:
            raise CorruptionError("segment longer than its read span", stream="mbta",
                                  offset=recon.mbta.pos)
        recon.copy(recon.cursor + need, out)
        piece = "".join(out)
        pieces.append(revcomp(piece) if revs[j] else piece)

    if stats is not None:
        stats.reads += 1
        stats.corner_reads += corner
        stats.chimeric_reads += m > 1
        stats.rev_segments += sum(revs)
    if n_lit is not None:
        if len(n_lit) != length:
            raise CorruptionError("N read length disagrees with its literal",
                                  stream="literals", offset=recon.literals.pos)
        return DecodedRead(idx, n_lit)
    return DecodedRead(idx, head + "".join(pieces) + tail)


def _apply_event(scan, recon, layout, pos, cur, out, produced):
    mbta = recon.mbta
    cbase = recon._base(pos + cur) if pos + cur < len(recon.consensus) else None
    if layout.merged_types:
        code = mbta.read(2)
        if cbase is not None and _CODE.get(cbase) == code:
            kind = 2 if mbta.read(1) else 1
        else:
            kind = 0
    else:
        kind = mbta.read(2)
        if kind == 3:
            raise CorruptionError("unknown mismatch type", stream="mbta", offset=mbta.pos)
        if kind == 0:
            code = mbta.read(2)
            if cbase is not None and _CODE.get(cbase) == code:
                raise CorruptionError("substitution equals the consensus base",
                                      stream="mbta", offset=mbta.pos)
    if kind == 0:
        if cbase is None:
            raise CorruptionError("substitution past the consensus end", stream="mbta",
                                  offset=mbta.pos)
        out.append(_DNA[code])
        recon.cursor += 1
        return produced + 1, cur + 1
    n = scan.indel_length() if layout.indel_lengths else 1
    if kind == 1:
        out.append(read_bases(mbta, n, 2))
        return produced + n, cur
    if pos + cur + n > len(recon.consensus):
        raise CorruptionError("deletion past the consensus end", stream="mbta",
                              offset=mbta.pos)
    recon.cursor += n
    return produced, cur + n


# -- partition / container level -------------------------------------------

def decode_partition(readers: Sequence[BitReader], header, entry, consensus: str,
                     stats: DecodeStats | None = None, partition: int | None = None
                     ) -> Iterator[DecodedRead]:
    """Yield the reads of one partition, then check every stream ends exactly."""
    layout = header.layout
    scan = ScanState(readers, header.schemes, entry.start, stats)
    recon = ReconstructState(readers, consensus)
    try:
        for _ in range(entry.read_count):
            yield decode_next_read(scan, recon, layout)
        for r in readers:
            r.check_end()
    except CorruptionError as exc:
        if partition is not None and exc.partition is None:
            exc.partition = partition
            exc.args = (f"{exc.args[0]} (partition {partition})",)
        raise


@dataclass
class StreamAccess:
    name: str
    bits_read: int
    max_lookahead: int
    backward_seeks: int


@dataclass
class AccessReport:
    streams: list[StreamAccess]

    @property
    def ok(self) -> bool:
        return all(s.backward_seeks == 0 and s.max_lookahead <= 64 for s in self.streams)

    @property
    def max_lookahead(self) -> int:
        return max((s.max_lookahead for s in self.streams), default=0)

    def problems(self) -> list[str]:
        out = []
        for s in self.streams:
            if s.backward_seeks:
                out.append(f"{s.name}: {s.backward_seeks} backward seeks")
            if s.max_lookahead > 64:
                out.append(f"{s.name}: lookahead {s.max_lookahead} bits")
        return out


def audit_streaming(readers: Sequence[BitReader]) -> AccessReport:
    """Summarise the access pattern of instrumented readers after a decode."""
    return AccessReport([StreamAccess(r.name, r.pos, getattr(r, "max_lookahead", 0),
                                      getattr(r, "backward_seeks", 0)) for r in readers])


def _close(readers):
    for r in readers:
        f = getattr(r, "_file", None)
        if f is not None:
            f.close()


def decode_container_partition(container, i: int, consensus: str, audit: bool = False,
                               stats: DecodeStats | None = None):
    """Generator over one partition of an open :class:`Container`. When
    ``audit`` is set the readers are instrumented and the final
    :class:`AccessReport` is the generator's return value."""
    readers = container.open_streams(i, tracing=audit)
    try:
        yield from decode_partition(readers, container.header, container.entries[i],
                                    consensus, stats, i)
    finally:
        _close(readers)
    return audit_streaming(readers) if audit else None


def decode_read_set(container, consensus: str, preserve_order: bool = False,
                    partitions: Sequence[int] | None = None,
                    stats: DecodeStats | None = None) -> Iterator[str]:
    """Yield read sequences. In preserve-order mode the reads are buffered
    and emitted by original index."""
    parts = range(len(container.entries)) if partitions is None else partitions
    if preserve_order:
        if not container.header.preserve_order:
            raise CorruptionError("container has no order index")
        buf: list = [None] * container.header.read_count
        for i in parts:
            for rec in decode_container_partition(container, i, consensus, stats=stats):
                if rec.order_idx >= len(buf) or buf[rec.order_idx] is not None:
                    raise CorruptionError(f"bad order index {rec.order_idx}",
                                          stream="order_idx", partition=i)
                buf[rec.order_idx] = rec.bases
        yield from (b for b in buf if b is not None)
        return
    for i in parts:
        for rec in decode_container_partition(container, i, consensus, stats=stats):
            yield rec.bases
