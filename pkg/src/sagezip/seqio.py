"""Read-set I/O and base packing.

Packed layouts (bits are LSB-first within each byte, see :mod:`sagezip.bitio`):

========== ============= ==========================================
mode       bits per base codes
========== ============= ==========================================
TWO_BIT    2             A=00 C=01 G=10 T=11 (no N)
THREE_BIT  3             A=000 C=001 G=010 T=011 N=100
ONE_HOT    4             bit i set for base index i, N=0000
========== ============= ==========================================

The mode's integer value is its bits-per-base, which is also the mode byte of
the packed record format (mode u8 | base count u64 LE | packed bits).
"""

from __future__ import annotations

import enum
import re
import struct
import warnings
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Iterator

import numpy as np

from .errors import CorruptionError, PackError, ParseError

ALPHABET = "ACGTN"
_BAD_BASE = re.compile(r"[^ACGTN]")
_BAD_INPUT = re.compile(rb"[^ACGTNacgtn]")
_COMPLEMENT = str.maketrans("ACGTN", "TGCAN")

# byte -> base index (A0 C1 G2 T3 N4), 255 for anything else
_CODE = np.full(256, 255, dtype=np.uint8)
for _i, _b in enumerate(ALPHABET):
    _CODE[ord(_b)] = _i
_LETTERS = np.frombuffer(ALPHABET.encode(), dtype=np.uint8)
_ONE_HOT = np.array([1, 2, 4, 8, 0], dtype=np.uint8)
_FROM_ONE_HOT = np.full(16, 255, dtype=np.uint8)
_FROM_ONE_HOT[[1, 2, 4, 8, 0]] = [0, 1, 2, 3, 4]


def revcomp(bases: str) -> str:
    return bases.translate(_COMPLEMENT)[::-1]


def base_codes(bases: str) -> np.ndarray:
    """Base indices (A0 C1 G2 T3 N4) as a uint8 array."""
    return _CODE[np.frombuffer(bases.encode("ascii"), dtype=np.uint8)]


@dataclass(frozen=True, slots=True)
class ReadRecord:
    id: str
    bases: str
    qual: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.bases:
            raise ValueError(f"read {self.id!r} is empty")
        bad = _BAD_BASE.search(self.bases)
        if bad:
            raise ValueError(f"read {self.id!r} has illegal base {bad.group()!r}")

    @property
    def length(self) -> int:
        return len(self.bases)


class PackMode(enum.IntEnum):
    TWO_BIT = 2
    THREE_BIT = 3
    ONE_HOT = 4


@dataclass(frozen=True, slots=True)
class PackedSeq:
    mode: PackMode
    data: bytes
    length: int

    @property
    def nbits(self) -> int:
        return self.length * int(self.mode)


def pack_bases(bases: str, mode: PackMode) -> PackedSeq:
    mode = PackMode(mode)
    codes = base_codes(bases)
    if (codes == 255).any():
        raise PackError(f"illegal base in {bases[:20]!r}")
    if mode is PackMode.TWO_BIT:
        if (codes == 4).any():
            raise PackError("N cannot be packed in TWO_BIT mode")
    elif mode is PackMode.ONE_HOT:
        codes = _ONE_HOT[codes]
    width = int(mode)
    bits = (codes[:, None] >> np.arange(width, dtype=np.uint8)) & 1
    data = np.packbits(bits.ravel(), bitorder="little").tobytes()
    return PackedSeq(mode, data, len(bases))


def unpack_bases(packed: PackedSeq) -> str:
    width = int(packed.mode)
    n = packed.length
    if len(packed.data) * 8 < n * width:
        raise CorruptionError(f"packed data holds fewer than {n} bases")
    bits = np.unpackbits(np.frombuffer(packed.data, dtype=np.uint8), bitorder="little")
    bits = bits[: n * width].reshape(n, width)
    codes = (bits << np.arange(width, dtype=np.uint8)).sum(axis=1).astype(np.uint8)
    if packed.mode is PackMode.ONE_HOT:
        codes = _FROM_ONE_HOT[codes]
        if (codes == 255).any():
            raise CorruptionError("invalid one-hot nibble")
    elif packed.mode is PackMode.THREE_BIT and (codes > 4).any():
        raise CorruptionError("3-bit base code above 100")
    return _LETTERS[codes].tobytes().decode("ascii")


# -- parsing ----------------------------------------------------------------

def _clean(line: bytes, index: int) -> str:
    if _BAD_INPUT.search(line):
        bad = _BAD_INPUT.search(line).group()
        raise ParseError(f"illegal base character {bad!r}", index)
    return line.decode("ascii").upper()


def parse_fastq(stream: BinaryIO, keep_meta: bool = False) -> Iterator[ReadRecord]:
    """Yield records from a 4-line FASTQ byte stream.

    Headers and qualities are only kept when ``keep_meta`` is set.
    """
    index = 0
    lines = (line.rstrip(b"\r\n") for line in stream)
    for head in lines:
        if not head:
            continue
        rest = [next(lines, None) for _ in range(3)]
        if rest[-1] is None:
            raise ParseError("truncated record", index)
        seq, plus, qual = rest
        if not head.startswith(b"@"):
            raise ParseError("header line must start with '@'", index)
        if not plus.startswith(b"+"):
            raise ParseError("separator line must start with '+'", index)
        if len(qual) != len(seq):
            raise ParseError("quality and sequence lengths differ", index)
        if not seq:
            raise ParseError("empty sequence", index)
        name = head[1:].decode("ascii", "replace")
        rid = name.split(None, 1)[0] if name.strip() else ""
        yield ReadRecord(
            name if keep_meta else rid,
            _clean(seq, index),
            qual.decode("ascii", "replace") if keep_meta else None,
        )
        index += 1


def parse_fasta(stream: BinaryIO) -> tuple[str, str]:
    """Return (name, bases) of the first FASTA record; extra records are ignored
    with a warning."""
    name = None
    chunks = []
    for raw in stream:
        line = raw.strip()
        if not line:
            continue
        if line.startswith(b">"):
            if name is not None:
                warnings.warn("FASTA has more than one record; using the first", stacklevel=2)
                break
            name = line[1:].decode("ascii", "replace").strip()
            continue
        if name is None:
            raise ParseError("FASTA has no header line")
        chunks.append(_clean(line, 0))
    if name is None:
        raise ParseError("empty FASTA")
    bases = "".join(chunks)
    if not bases:
        raise ParseError(f"FASTA record {name!r} has an empty sequence")
    return name, bases


# -- writers ----------------------------------------------------------------

_RECORD_HEAD = struct.Struct("<BQ")


def write_fastq(out, records: Iterable[ReadRecord]) -> None:
    for rec in records:
        qual = rec.qual if rec.qual is not None else "I" * rec.length
        out.write(f"@{rec.id}\n{rec.bases}\n+\n{qual}\n".encode("ascii"))


def write_fasta(out, records: Iterable[ReadRecord], width: int = 0) -> None:
    for rec in records:
        seq = rec.bases
        if width:
            seq = "\n".join(seq[i:i + width] for i in range(0, len(seq), width))
        out.write(f">{rec.id}\n{seq}\n".encode("ascii"))


def write_lines(out, sequences: Iterable[str]) -> None:
    for seq in sequences:
        out.write(seq.encode("ascii") + b"\n")


def packed_record(packed: PackedSeq) -> bytes:
    return _RECORD_HEAD.pack(int(packed.mode), packed.length) + packed.data


def write_packed(out, sequences: Iterable[str], mode: PackMode) -> int:
    """Write packed records; returns how many reads needed THREE_BIT because
    TWO_BIT cannot hold N."""
    fallbacks = 0
    for seq in sequences:
        m = mode
        if mode is PackMode.TWO_BIT and "N" in seq:
            m = PackMode.THREE_BIT
            fallbacks += 1
        out.write(packed_record(pack_bases(seq, m)))
    return fallbacks


def read_packed(stream: BinaryIO) -> Iterator[str]:
    while True:
        head = stream.read(_RECORD_HEAD.size)
        if not head:
            return
        if len(head) < _RECORD_HEAD.size:
            raise CorruptionError("truncated packed record")
        mode, n = _RECORD_HEAD.unpack(head)
        try:
            mode = PackMode(mode)
        except ValueError:
            raise CorruptionError(f"unknown pack mode {mode}") from None
        data = stream.read((n * int(mode) + 7) // 8)
        yield unpack_bases(PackedSeq(mode, data, n))
