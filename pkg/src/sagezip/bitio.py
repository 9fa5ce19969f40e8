"""LSB-first bit streams.

Every packed stream in the package uses the same rule: the first bit written
lands in bit 0 of byte 0, and a multi-bit value is stored least significant
bit first. A unary guide code of rank ``r`` is ``r`` one-bits followed by a
zero-bit, in stream order.

The reader keeps a 64-bit working register between the byte source and the
caller, which bounds decoder lookahead independently of the input size.
"""

from __future__ import annotations

import io

from .errors import CorruptionError

REGISTER_BITS = 64
_MAX_READ = REGISTER_BITS - 8


class BitWriter:
    __slots__ = ("_out", "_acc", "_nacc")

    def __init__(self):
        self._out = bytearray()
        self._acc = 0
        self._nacc = 0

    def write(self, value: int, nbits: int) -> None:
        if nbits == 0:
            return
        if value >> nbits:
            raise ValueError(f"value {value} does not fit in {nbits} bits")
        self._acc |= value << self._nacc
        self._nacc += nbits
        if self._nacc >= 64:
            n = self._nacc >> 3
            self._out += (self._acc & ((1 << (n << 3)) - 1)).to_bytes(n, "little")
            self._acc >>= n << 3
            self._nacc &= 7

    def write_unary(self, rank: int) -> None:
        self.write((1 << rank) - 1, rank + 1)

    @property
    def bit_length(self) -> int:
        return len(self._out) * 8 + self._nacc

    def getvalue(self) -> bytes:
        """Return the stream zero-padded to a whole byte."""
        tail = (self._nacc + 7) >> 3
        return bytes(self._out) + self._acc.to_bytes(tail, "little")


class BitReader:
    """Forward-only reader over bytes or a region of a binary file.

    ``source`` is either a bytes-like object or a file object positioned at the
    start of the stream, in which case ``length`` bytes are consumed from it in
    ``chunk``-sized reads.
    """

    def __init__(self, source, length=None, name="stream", chunk=4096):
        self.name = name
        if isinstance(source, (bytes, bytearray, memoryview)):
            self._data = bytes(source) if length is None else bytes(source[:length])
            self._file = None
            self._left = 0
        else:
            if length is None:
                raise ValueError("file sources need an explicit length")
            self._data = b""
            self._file = source
            self._left = length
        self._chunk = chunk
        self._ci = 0
        self._buf = 0
        self._nbits = 0
        self.pos = 0

    def _more(self) -> bool:
        if self._file is None or self._left == 0:
            return False
        data = self._file.read(min(self._chunk, self._left))
        if not data:
            raise CorruptionError("truncated stream", stream=self.name, offset=self.pos)
        self._left -= len(data)
        self._data = data
        self._ci = 0
        return True

    def _refill(self) -> None:
        data, ci, buf, nbits = self._data, self._ci, self._buf, self._nbits
        while nbits <= _MAX_READ:
            if ci >= len(data):
                self._buf, self._nbits = buf, nbits
                if not self._more():
                    break
                data, ci = self._data, 0
            buf |= data[ci] << nbits
            ci += 1
            nbits += 8
        self._data, self._ci, self._buf, self._nbits = data, ci, buf, nbits

    def read(self, nbits: int) -> int:
        if nbits > self._nbits:
            if nbits > _MAX_READ:
                lo = BitReader.read(self, 32)
                return lo | (BitReader.read(self, nbits - 32) << 32)
            self._refill()
            if nbits > self._nbits:
                raise CorruptionError("stream exhausted", stream=self.name, offset=self.pos)
        value = self._buf & ((1 << nbits) - 1)
        self._buf >>= nbits
        self._nbits -= nbits
        self.pos += nbits
        return value

    def read_unary(self, limit: int) -> int:
        """Read a unary guide code and return its rank (< ``limit``)."""
        if self._nbits < limit:
            self._refill()
        x = self._buf & ((1 << self._nbits) - 1)
        ones = (x ^ (x + 1)).bit_length() - 1
        if ones >= limit:
            raise CorruptionError("guide code with no class mapping", stream=self.name,
                                  offset=self.pos)
        if ones >= self._nbits:
            raise CorruptionError("stream exhausted", stream=self.name, offset=self.pos)
        self._buf >>= ones + 1
        self._nbits -= ones + 1
        self.pos += ones + 1
        return ones

    def remaining(self) -> int:
        return self._nbits + 8 * (len(self._data) - self._ci + self._left)

    def check_end(self) -> None:
        """Fail unless only zero padding (< 8 bits) is left."""
        left = self.remaining()
        if left >= 8:
            raise CorruptionError(f"{left} unread bits", stream=self.name, offset=self.pos)
        if left and self.read(left):
            raise CorruptionError("nonzero padding", stream=self.name, offset=self.pos)

    def seek(self, bitpos: int) -> None:
        """Reposition an in-memory reader. The decoder never calls this."""
        if self._file is not None:
            raise io.UnsupportedOperation("file-backed readers are forward-only")
        self._ci = bitpos >> 3
        self._buf = 0
        self._nbits = 0
        self.pos = self._ci * 8
        if bitpos & 7:
            self.read(bitpos & 7)


class TracingBitReader(BitReader):
    """Reader that logs every access as ``(kind, nbits)`` and checks cursor
    monotonicity and register lookahead as it goes."""

    def __init__(self, *args, keep_trace=True, **kwargs):
        super().__init__(*args, **kwargs)
        self.trace = [] if keep_trace else None
        self.max_lookahead = 0
        self.backward_seeks = 0
        self._last_pos = 0

    def _refill(self) -> None:
        super()._refill()
        if self._nbits > self.max_lookahead:
            self.max_lookahead = self._nbits

    def _note(self, kind, nbits):
        if self.pos < self._last_pos:
            self.backward_seeks += 1
        self._last_pos = self.pos
        if self.trace is not None:
            self.trace.append((kind, nbits))

    def read(self, nbits: int) -> int:
        if nbits > self._nbits:
            value = super().read(nbits)
        else:
            # inlined fast path of BitReader.read
            value = self._buf & ((1 << nbits) - 1)
            self._buf >>= nbits
            self._nbits -= nbits
            self.pos += nbits
        self._note("bits", nbits)
        return value

    def read_unary(self, limit: int) -> int:
        rank = super().read_unary(limit)
        self._note("code", rank + 1)
        return rank

    def seek(self, bitpos: int) -> None:
        super().seek(bitpos)
        if self.pos < self._last_pos:
            self.backward_seeks += 1
        self._last_pos = self.pos
