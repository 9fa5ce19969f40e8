"""On-disk container.

All integers are little-endian. Layout::

    header      magic "SAGE" | version u8 | flags u16 | consensus_len u64 |
                sha256(consensus) 32s | k u16 | read_count u64 |
                fixed_read_len u32 | partitions u16 | max_segments u8 |
                order_bits u8 | sidecar_len u64 | 4 x scheme |
                [embedded consensus packed record] | crc32 u32
    table       per partition: start u64 | end u64 | read_count u64 |
                8 x (offset u64, length u64) | crc32 u32
                then crc32 u32 over the whole table
    blobs       per partition, the eight streams in order, byte-aligned
    sidecar     sidecar_len bytes at the end of the file

A scheme is ``K u8 | fixed u8 | K widths u8 | K ranks u8``. Stream offsets
are absolute file offsets.
"""

from __future__ import annotations

import hashlib
import io
import os
import struct
import zlib
from dataclasses import dataclass, field
from typing import BinaryIO, Sequence

from .bitio import BitReader, TracingBitReader
from .encode import N_STREAMS, STREAM_NAMES, Layout, Schemes
from .errors import ChecksumError, ConsensusMismatchError, CorruptionError, FormatError, VersionError
from .seqio import PackedSeq, PackMode, pack_bases, packed_record, unpack_bases
from .tune import ClassScheme

MAGIC = b"SAGE"
VERSION = 1

F_LONG_READ = 1 << 0       # indel block lengths in MPGA/MPA
F_PRESERVE_ORDER = 1 << 1
F_HAS_LITERALS = 1 << 2
F_SIDECAR = 1 << 3
F_MERGED_TYPES = 1 << 4
F_CORNER_OFFSET0 = 1 << 5
F_EMBEDDED = 1 << 6
_KNOWN_FLAGS = (1 << 7) - 1

_FIXED = struct.Struct("<4sBHQ32sHQIHBBQ")
_ENTRY = struct.Struct("<QQQ" + "QQ" * N_STREAMS + "I")
_U32 = struct.Struct("<I")


def consensus_digest(consensus: str) -> bytes:
    return hashlib.sha256(consensus.encode("ascii")).digest()


@dataclass(frozen=True)
class Header:
    flags: int
    consensus_len: int
    consensus_hash: bytes
    k: int
    read_count: int
    fixed_read_len: int
    partition_count: int
    max_segments: int
    order_bits: int
    schemes: Schemes
    sidecar_len: int = 0
    embedded: PackedSeq | None = None
    version: int = VERSION

    @property
    def layout(self) -> Layout:
        return Layout(
            indel_lengths=bool(self.flags & F_LONG_READ),
            merged_types=bool(self.flags & F_MERGED_TYPES),
            corner_offset0=bool(self.flags & F_CORNER_OFFSET0),
            chimeric=self.max_segments >= 2,
            fixed_read_len=self.fixed_read_len,
            order_bits=self.order_bits,
        )

    @property
    def preserve_order(self) -> bool:
        return bool(self.flags & F_PRESERVE_ORDER)

    def to_bytes(self) -> bytes:
        if self.partition_count < 1:
            raise FormatError("a container has at least one partition")
        out = bytearray(_FIXED.pack(
            MAGIC, self.version, self.flags, self.consensus_len, self.consensus_hash,
            self.k, self.read_count, self.fixed_read_len, self.partition_count,
            self.max_segments, self.order_bits, self.sidecar_len))
        for scheme in self.schemes:
            out += scheme.to_bytes()
        if self.flags & F_EMBEDDED:
            out += packed_record(self.embedded)
        out += _U32.pack(zlib.crc32(out))
        return bytes(out)


def layout_flags(layout: Layout) -> int:
    return ((F_LONG_READ if layout.indel_lengths else 0)
            | (F_MERGED_TYPES if layout.merged_types else 0)
            | (F_CORNER_OFFSET0 if layout.corner_offset0 else 0))


@dataclass(frozen=True)
class PartitionEntry:
    start: int
    end: int
    read_count: int
    offsets: tuple[int, ...]
    lengths: tuple[int, ...]
    crc: int

    def to_bytes(self) -> bytes:
        pairs = [v for pair in zip(self.offsets, self.lengths) for v in pair]
        return _ENTRY.pack(self.start, self.end, self.read_count, *pairs, self.crc)


@dataclass
class PartitionSlice:
    """Reads assigned to one consensus range, in encoding order."""

    start: int
    end: int
    order: list[int] = field(default_factory=list)


def partition_reads(alignments, order: Sequence[int], partitions: int,
                    consensus_len: int) -> list[PartitionSlice]:
    """Split the consensus into ``partitions`` ranges holding about the same
    number of mapped reads. ``order`` lists mapped reads by position, then
    literal reads; literal reads are dealt round-robin."""
    if partitions < 1:
        raise ValueError("need at least one partition")
    mapped = [i for i in order if alignments[i].mapped]
    literal = [i for i in order if not alignments[i].mapped]
    pos = [alignments[i].segments[0].cons_pos for i in mapped]
    n = len(mapped)
    bounds = [0]
    for q in range(1, partitions):
        if n:
            idx = min(n, round(q * n / partitions))
            while 0 < idx < n and pos[idx] == pos[idx - 1]:
                idx += 1
            b = pos[idx] if idx < n else consensus_len
        else:
            b = q * consensus_len // partitions
        bounds.append(min(max(b, bounds[-1]), consensus_len))
    bounds.append(max(consensus_len, bounds[-1]))
    slices = [PartitionSlice(bounds[q], bounds[q + 1]) for q in range(partitions)]
    q = 0
    for i, p in zip(mapped, pos):
        while p >= slices[q].end and q + 1 < partitions:
            q += 1
        slices[q].order.append(i)
    for j, i in enumerate(literal):
        slices[j % partitions].order.append(i)
    return slices


def write_container(path, header: Header, slices: Sequence[PartitionSlice],
                    blobs: Sequence[Sequence[bytes]], sidecar: bytes | None = None) -> int:
    """Write the file and return its size in bytes."""
    if len(slices) != header.partition_count or len(blobs) != len(slices):
        raise FormatError("partition count does not match the header")
    if (sidecar or b"") and not header.flags & F_SIDECAR:
        raise FormatError("sidecar present but not flagged")
    head = header.to_bytes()
    table_size = _ENTRY.size * len(slices) + _U32.size
    cursor = len(head) + table_size
    entries = []
    for sl, parts in zip(slices, blobs):
        offsets, lengths = [], []
        crc = 0
        for blob in parts:
            offsets.append(cursor)
            lengths.append(len(blob))
            cursor += len(blob)
            crc = zlib.crc32(blob, crc)
        entries.append(PartitionEntry(sl.start, sl.end, len(sl.order), tuple(offsets),
                                      tuple(lengths), crc))
    table = b"".join(e.to_bytes() for e in entries)
    tmp = f"{path}.tmp{os.getpid()}"
    try:
        with open(tmp, "wb") as f:
            f.write(head)
            f.write(table)
            f.write(_U32.pack(zlib.crc32(table)))
            for parts in blobs:
                for blob in parts:
                    f.write(blob)
            if sidecar:
                f.write(sidecar)
            size = f.tell()
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    return size


def container_overhead(partitions: int, schemes: Schemes, embedded: PackedSeq | None = None) -> int:
    """Bytes of header and partition table."""
    size = _FIXED.size + sum(len(s.to_bytes()) for s in schemes) + _U32.size
    if embedded is not None:
        size += len(packed_record(embedded))
    return size + _ENTRY.size * partitions + _U32.size


class Container:
    """Parsed header and partition table of a container file."""

    def __init__(self, path, verify: bool = True):
        self.path = os.fspath(path)
        with open(self.path, "rb") as f:
            self.header, self.entries, self.data_start = self._parse(f)
            f.seek(0, io.SEEK_END)
            self.file_size = f.tell()
        end = self.file_size - self.header.sidecar_len
        for i, e in enumerate(self.entries):
            for off, ln in zip(e.offsets, e.lengths):
                if off < self.data_start or off + ln > end:
                    raise CorruptionError("blob outside the file (truncated?)", partition=i)
        if verify:
            bad = self.verify()
            if bad:
                raise ChecksumError(f"checksum mismatch in partition {bad[0]}", partition=bad[0])

    @staticmethod
    def _read(f: BinaryIO, n: int, what: str) -> bytes:
        data = f.read(n)
        if len(data) != n:
            raise CorruptionError(f"truncated {what}")
        return data

    def _parse(self, f):
        fixed = f.read(_FIXED.size)
        if len(fixed) < 4 or fixed[:4] != MAGIC:
            raise FormatError("not a SAGE container (bad magic)")
        if len(fixed) > 4 and fixed[4] != VERSION:
            raise VersionError(f"unsupported container version {fixed[4]} (expected {VERSION})")
        if len(fixed) != _FIXED.size:
            raise CorruptionError("truncated header")
        (_, version, flags, clen, digest, k, nreads, flen, nparts, maxseg, obits,
         sidecar_len) = _FIXED.unpack(fixed)
        if flags & ~_KNOWN_FLAGS:
            raise FormatError(f"unknown header flags {flags:#x}")
        raw = bytearray(fixed)
        schemes = []
        for _ in range(4):
            head = self._read(f, 2, "scheme")
            body = self._read(f, 2 * head[0], "scheme")
            raw += head + body
            try:
                scheme, _ = ClassScheme.from_bytes(head + body)
            except ValueError as exc:
                raise FormatError(f"invalid class scheme: {exc}") from None
            schemes.append(scheme)
        embedded = None
        if flags & F_EMBEDDED:
            rec = self._read(f, 9, "embedded consensus")
            mode, count = struct.unpack("<BQ", rec)
            try:
                mode = PackMode(mode)
            except ValueError:
                raise FormatError(f"unknown pack mode {mode}") from None
            body = self._read(f, (count * int(mode) + 7) // 8, "embedded consensus")
            raw += rec + body
            embedded = PackedSeq(mode, body, count)
        (crc,) = _U32.unpack(self._read(f, 4, "header"))
        if zlib.crc32(raw) != crc:
            raise ChecksumError("header checksum mismatch")
        if nparts < 1:
            raise FormatError("container declares no partitions")
        header = Header(flags, clen, digest, k, nreads, flen, nparts, maxseg, obits,
                        Schemes(*schemes), sidecar_len, embedded, version)
        table = self._read(f, _ENTRY.size * nparts, "partition table")
        (tcrc,) = _U32.unpack(self._read(f, 4, "partition table"))
        if zlib.crc32(table) != tcrc:
            raise ChecksumError("partition table checksum mismatch")
        entries = []
        for i in range(nparts):
            vals = _ENTRY.unpack_from(table, i * _ENTRY.size)
            pairs = vals[3:-1]
            entries.append(PartitionEntry(vals[0], vals[1], vals[2], tuple(pairs[0::2]),
                                          tuple(pairs[1::2]), vals[-1]))
        if sum(e.read_count for e in entries) != nreads:
            raise FormatError("partition read counts do not add up to the header count")
        return header, entries, f.tell()

    def verify_partition(self, i: int) -> bool:
        e = self.entries[i]
        crc = 0
        with open(self.path, "rb") as f:
            for off, ln in zip(e.offsets, e.lengths):
                f.seek(off)
                left = ln
                while left:
                    chunk = f.read(min(1 << 20, left))
                    if not chunk:
                        return False
                    crc = zlib.crc32(chunk, crc)
                    left -= len(chunk)
        return crc == e.crc

    def verify(self) -> list[int]:
        """Indices of partitions whose checksum fails."""
        return [i for i in range(len(self.entries)) if not self.verify_partition(i)]

    def open_streams(self, i: int, tracing: bool = False) -> list[BitReader]:
        """One forward-only reader per stream, each with its own file handle."""
        cls = TracingBitReader
        kw = {"keep_trace": False} if tracing else {}
        readers = []
        e = self.entries[i]
        for name, off, ln in zip(STREAM_NAMES, e.offsets, e.lengths):
            f = open(self.path, "rb")
            f.seek(off)
            if tracing:
                readers.append(cls(f, ln, name=name, **kw))
            else:
                readers.append(BitReader(f, ln, name=name))
        return readers

    def read_sidecar(self) -> bytes:
        n = self.header.sidecar_len
        if not n:
            return b""
        with open(self.path, "rb") as f:
            f.seek(self.file_size - n)
            return f.read(n)

    def resolve_consensus(self, consensus: str | None) -> str:
        """Check a supplied consensus against the header digest, or fall back
        to the embedded copy."""
        h = self.header
        if consensus is None:
            if h.embedded is None:
                raise FormatError("no consensus supplied and none embedded")
            consensus = unpack_bases(h.embedded)
        actual = consensus_digest(consensus)
        if actual != h.consensus_hash or len(consensus) != h.consensus_len:
            raise ConsensusMismatchError(h.consensus_hash.hex(), actual.hex())
        return consensus


def read_container(path, verify: bool = True) -> Container:
    return Container(path, verify)


def embed_consensus(consensus: str) -> PackedSeq:
    mode = PackMode.THREE_BIT if "N" in consensus else PackMode.TWO_BIT
    return pack_bases(consensus, mode)
