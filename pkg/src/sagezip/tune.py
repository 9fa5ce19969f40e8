"""Bit-width class tuning.

A :class:`ClassScheme` splits values by their minimal binary width into a few
classes. Each value is written as a unary guide code naming its class followed
by the value in exactly the class width. The most frequent class gets the
one-bit code ``0``, the next ``10``, then ``110`` and so on.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np

from .errors import CoverageError

MAX_BITS = 40
_POWERS = np.array([1 << k for k in range(MAX_BITS + 1)], dtype=np.uint64)


def bitlen(value: int) -> int:
    return value.bit_length() or 1


@dataclass(frozen=True)
class BitLenHistogram:
    """``counts[b]`` is how many values have minimal width ``b`` (index 0 unused)."""

    counts: tuple[int, ...]

    @classmethod
    def empty(cls) -> "BitLenHistogram":
        return cls((0,) * (MAX_BITS + 1))

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def max_bitlen(self) -> int:
        for b in range(MAX_BITS, 0, -1):
            if self.counts[b]:
                return b
        return 0

    def __add__(self, other: "BitLenHistogram") -> "BitLenHistogram":
        return BitLenHistogram(tuple(a + b for a, b in zip(self.counts, other.counts)))

    def items(self):
        return [(b, c) for b, c in enumerate(self.counts) if c]


def histogram(values: Iterable[int]) -> BitLenHistogram:
    arr = np.asarray(values if not isinstance(values, np.ndarray) else values, dtype=np.uint64)
    if arr.size == 0:
        return BitLenHistogram.empty()
    if int(arr.max()) >> MAX_BITS:
        raise CoverageError(f"value needs more than {MAX_BITS} bits")
    widths = np.searchsorted(_POWERS, arr, side="right")
    widths[widths == 0] = 1
    counts = np.bincount(widths, minlength=MAX_BITS + 1)
    return BitLenHistogram(tuple(int(c) for c in counts))


@dataclass(frozen=True)
class ClassScheme:
    """``widths`` ascend strictly; ``ranks[i]`` is the unary code rank of class
    ``i``. A ``fixed`` scheme has a single class and writes no guide code."""

    widths: tuple[int, ...]
    ranks: tuple[int, ...]
    fixed: bool = False

    def __post_init__(self):
        if not self.widths or len(self.widths) != len(self.ranks):
            raise ValueError("scheme needs one rank per class")
        if any(a >= b for a, b in zip(self.widths, self.widths[1:])):
            raise ValueError("class widths must increase strictly")
        if sorted(self.ranks) != list(range(len(self.ranks))):
            raise ValueError("ranks must be a permutation of 0..K-1")
        if self.fixed and len(self.widths) != 1:
            raise ValueError("a fixed scheme has exactly one class")
        if self.widths[0] < 1 or self.widths[-1] > 64:
            raise ValueError("class widths must lie in 1..64")

    @classmethod
    def fixed_width(cls, width: int) -> "ClassScheme":
        return cls((width,), (0,), fixed=True)

    @property
    def k(self) -> int:
        return len(self.widths)

    @property
    def max_width(self) -> int:
        return self.widths[-1]

    def code_length(self, cls_index: int) -> int:
        return 0 if self.fixed else self.ranks[cls_index] + 1

    @cached_property
    def table(self) -> tuple:
        """Per bit-length ``(rank, code_bits, width)``; None where uncovered."""
        out = [None] * (max(MAX_BITS, self.max_width) + 1)
        ci = 0
        for b in range(1, len(out)):
            while ci < self.k and self.widths[ci] < b:
                ci += 1
            if ci < self.k:
                out[b] = (self.ranks[ci], self.code_length(ci), self.widths[ci])
        return tuple(out)

    @cached_property
    def width_by_rank(self) -> tuple[int, ...]:
        out = [0] * self.k
        for w, r in zip(self.widths, self.ranks):
            out[r] = w
        return tuple(out)

    def bits_for(self, value: int) -> int:
        b = value.bit_length() or 1
        entry = self.table[b] if b < len(self.table) else None
        if entry is None:
            raise CoverageError(f"value {value} exceeds widest class {self.max_width}")
        return entry[1] + entry[2]

    def to_bytes(self) -> bytes:
        return bytes([self.k, int(self.fixed), *self.widths, *self.ranks])

    @classmethod
    def from_bytes(cls, data: bytes, offset: int = 0) -> tuple["ClassScheme", int]:
        k, fixed = data[offset], data[offset + 1]
        widths = tuple(data[offset + 2: offset + 2 + k])
        ranks = tuple(data[offset + 2 + k: offset + 2 + 2 * k])
        if len(ranks) != k or fixed > 1:
            raise ValueError("truncated or invalid scheme")
        return cls(widths, ranks, bool(fixed)), offset + 2 + 2 * k


def assign_ranks(widths, freqs) -> tuple[int, ...]:
    """Rank classes by descending frequency; ties go to the narrower class."""
    order = sorted(range(len(widths)), key=lambda i: (-freqs[i], widths[i]))
    ranks = [0] * len(widths)
    for r, i in enumerate(order):
        ranks[i] = r
    return tuple(ranks)


def class_frequencies(hist: BitLenHistogram, widths) -> list[int]:
    freqs = [0] * len(widths)
    ci = 0
    for b, c in hist.items():
        while ci < len(widths) and widths[ci] < b:
            ci += 1
        if ci == len(widths):
            raise CoverageError(f"bit length {b} exceeds widest class {widths[-1]}")
        freqs[ci] += c
    return freqs


def scheme_for(hist: BitLenHistogram, widths) -> ClassScheme:
    widths = tuple(widths)
    return ClassScheme(widths, assign_ranks(widths, class_frequencies(hist, widths)))


def cost_of(hist: BitLenHistogram, scheme: ClassScheme) -> int:
    table = scheme.table
    total = 0
    for b, c in hist.items():
        entry = table[b] if b < len(table) else None
        if entry is None:
            raise CoverageError(f"bit length {b} exceeds widest class {scheme.max_width}")
        total += c * (entry[1] + entry[2])
    return total


def optimize_classes(hist: BitLenHistogram, max_k: int = 6) -> ClassScheme:
    """Return the cheapest scheme with at most ``max_k`` classes.

    Dynamic program over the distinct observed bit lengths, left to right. The
    state is (last cut, set of code ranks already used); giving each new class
    an unused rank and minimising over all assignments reaches the
    frequency-sorted assignment, so the optimum is exact.
    """
    if not 1 <= max_k <= 8:
        raise ValueError("max_k must lie in 1..8")
    items = hist.items()
    if not items:
        raise ValueError("cannot tune on an empty histogram")
    lens = [b for b, _ in items]
    prefix = np.concatenate([[0], np.cumsum([c for _, c in items])]).astype(np.int64)
    d = len(lens)
    nmask = 1 << max_k
    inf = np.iinfo(np.int64).max // 4
    best = np.full((d + 1, nmask), inf, dtype=np.int64)
    parent_i = np.zeros((d + 1, nmask), dtype=np.int64)
    parent_r = np.zeros((d + 1, nmask), dtype=np.int64)
    best[0, 0] = 0
    masks = np.arange(nmask)
    free = [masks[(masks >> r) & 1 == 0] for r in range(max_k)]
    for i in range(d):
        row = best[i]
        if (row >= inf).all():
            continue
        for j in range(i + 1, d + 1):
            freq = int(prefix[j] - prefix[i])
            w = lens[j - 1]
            for r in range(max_k):
                src = free[r]
                cand = row[src] + freq * (r + 1 + w)
                dst = src | (1 << r)
                better = cand < best[j, dst]
                if better.any():
                    hit = dst[better]
                    best[j, hit] = cand[better]
                    parent_i[j, hit] = i
                    parent_r[j, hit] = r
    final = best[d]
    pop = np.array([bin(m).count("1") for m in range(nmask)])
    order = np.lexsort((masks, pop, final))
    mask = int(order[0])
    cuts = []
    j = d
    while j > 0:
        i, r = int(parent_i[j, mask]), int(parent_r[j, mask])
        cuts.append(lens[j - 1])
        mask &= ~(1 << r)
        j = i
    return scheme_for(hist, sorted(cuts))
