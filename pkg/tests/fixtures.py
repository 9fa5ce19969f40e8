"""Hand-built read sets shared by several test modules."""

from __future__ import annotations

import random

from oracles import revcomp
from sagezip.simulate import random_consensus

CHIM_A = 5_000
CHIM_B = 25_000
CHIM_HALF = 75
CHIM_DIVERGED = 10


def chimeric_fixture(seed: int = 11, copies: int = 1):
    """Consensus and reads whose first half comes from locus A and second
    half from locus B, 20 kb away. The consensus right after A holds a copy of
    B's region with ``CHIM_DIVERGED`` substitutions, so one segment at A costs
    that many mismatches while two segments need none."""
    rng = random.Random(seed)
    cons = list(random_consensus(40_000, rng))
    region_b = cons[CHIM_B:CHIM_B + CHIM_HALF]
    copy = list(region_b)
    for off in rng.sample(range(2, CHIM_HALF - 2), CHIM_DIVERGED):
        copy[off] = rng.choice([b for b in "ACGT" if b != copy[off]])
    cons[CHIM_A + CHIM_HALF:CHIM_A + 2 * CHIM_HALF] = copy
    consensus = "".join(cons)
    reads = []
    for i in range(copies):
        a = CHIM_A + 3 * i
        read = consensus[a:CHIM_A + CHIM_HALF] + consensus[CHIM_B:CHIM_B + CHIM_HALF + 3 * i]
        reads.append(read if i % 2 == 0 else revcomp(read))
    return consensus, reads


def hand_container(path, consensus, alignments, layout, schemes, partitions=1, k=15):
    """Write ``alignments`` with explicit layout and schemes, bypassing the
    planner. Returns the plan-free slices used."""
    from sagezip.container import (F_HAS_LITERALS, F_PRESERVE_ORDER, Header, consensus_digest,
                                   layout_flags, partition_reads, write_container)
    from sagezip.encode import encode_partition, sort_order

    slices = partition_reads(alignments, sort_order(alignments), partitions, len(consensus))
    blobs = [encode_partition(alignments, sl.order, sl.start, layout, schemes, consensus).blobs
             for sl in slices]
    flags = layout_flags(layout)
    if layout.order_bits:
        flags |= F_PRESERVE_ORDER
    if any(not a.mapped or a.n_literal is not None for a in alignments):
        flags |= F_HAS_LITERALS
    header = Header(flags, len(consensus), consensus_digest(consensus), k, len(alignments),
                    layout.fixed_read_len, partitions, 2 if layout.chimeric else 1,
                    layout.order_bits, schemes)
    write_container(path, header, slices, blobs)
    return slices


def synthetic_exact_container(path, consensus_len, n_reads, read_len=100, seed=0):
    """Container of ``n_reads`` error-free forward reads built directly with
    numpy: fixed 8-bit position deltas, 1-bit zero counts, offset-0 corner
    marking and a fixed read length. Returns the consensus."""
    import numpy as np

    from sagezip.container import (Header, PartitionSlice, consensus_digest, layout_flags,
                                   write_container)
    from sagezip.encode import Layout, Schemes
    from sagezip.tune import ClassScheme

    rng = np.random.default_rng(seed)
    codes = rng.integers(0, 4, consensus_len)
    consensus = "".join("ACGT"[c] for c in codes)
    deltas = rng.integers(0, 256, n_reads).astype(np.uint8)
    pos = np.cumsum(deltas.astype(np.int64)) % (consensus_len - read_len)
    deltas = np.diff(np.concatenate([[0], np.sort(pos)])).astype(np.int64)
    deltas = np.minimum(deltas, 255).astype(np.uint8)
    layout = Layout(indel_lengths=False, merged_types=True, corner_offset0=True,
                    chimeric=False, fixed_read_len=read_len)
    schemes = Schemes(ClassScheme.fixed_width(8), ClassScheme.fixed_width(8),
                      ClassScheme.fixed_width(1), ClassScheme.fixed_width(8))
    zeros = bytes((2 * n_reads + 7) // 8)
    blobs = [b"", deltas.tobytes(), b"", bytes((n_reads + 7) // 8), b"", zeros, b"", b""]
    end = int(deltas.astype(np.int64).sum()) + read_len
    header = Header(layout_flags(layout), consensus_len, consensus_digest(consensus), 15,
                    n_reads, read_len, 1, 1, 0, schemes)
    write_container(path, header, [PartitionSlice(0, consensus_len, list(range(n_reads)))],
                    [blobs])
    assert end <= consensus_len
    return consensus


def fig7_container(path):
    """One 55-base read over consensus[100:160]: SUB at offset 2, a 5-base
    deletion at offset 11 and a SUB at offset 40. Mismatch-position classes
    are 2, 4 and 8 bits with guide codes 0, 10 and 110, so the deletion's
    delta of 9 is guide "10" plus 4 MPA bits, then the length-path flag 0
    and 8 MPA bits holding 5."""
    from sagezip.align import Alignment, Kind, Mismatch, Segment
    from sagezip.encode import Layout, Schemes
    from sagezip.tune import ClassScheme

    rng = random.Random(77)
    consensus = random_consensus(1_000, rng)
    c = consensus[100:160]
    sub1 = next(b for b in "ACGT" if b != c[2])
    sub2 = next(b for b in "ACGT" if b != c[40])
    mms = (Mismatch(2, Kind.SUB, 1, sub1), Mismatch(11, Kind.DEL, 5, ""),
           Mismatch(40, Kind.SUB, 1, sub2))
    aln = Alignment((Segment(100, False, (0, 55), mms, 60),))
    read = c[:2] + sub1 + c[3:11] + c[16:40] + sub2 + c[41:]
    layout = Layout(indel_lengths=True, merged_types=True, corner_offset0=True, chimeric=False,
                    fixed_read_len=55)
    schemes = Schemes(ClassScheme.fixed_width(8), ClassScheme((2, 4, 8), (0, 1, 2)),
                      ClassScheme.fixed_width(4), ClassScheme.fixed_width(8))
    hand_container(path, consensus, [aln], layout, schemes)
    return consensus, read


def traced_readers(container, i, log):
    """Readers for partition ``i`` that append (stream, kind, nbits) to ``log``."""
    from sagezip.bitio import TracingBitReader
    from sagezip.encode import STREAM_NAMES

    class Logged(TracingBitReader):
        def _note(self, kind, nbits):
            super()._note(kind, nbits)
            log.append((self.name, kind, nbits))

    e = container.entries[i]
    readers = []
    for name, off, ln in zip(STREAM_NAMES, e.offsets, e.lengths):
        f = open(container.path, "rb")
        f.seek(off)
        readers.append(Logged(f, ln, name=name, keep_trace=False))
    return readers


def golden_inputs():
    """Three fixed reads over a fixed 300-base consensus: one exact forward
    read, one reverse read with a substitution and an insertion, and one
    literal."""
    from sagezip.align import Alignment, Kind, Mismatch, Segment
    from sagezip.encode import Layout, fixed_schemes

    consensus = random_consensus(300, random.Random(2024))
    sub = "A" if consensus[57] != "A" else "G"
    alns = [
        Alignment((Segment(10, False, (0, 40), (), 40),)),
        Alignment((Segment(50, True, (0, 42), (Mismatch(7, Kind.SUB, 1, sub),
                                               Mismatch(20, Kind.INS, 2, "TT")), 40),)),
        Alignment.literal("GATTACA"),
    ]
    layout = Layout(indel_lengths=True, merged_types=True, corner_offset0=True, chimeric=False)
    return consensus, alns, layout, fixed_schemes()
