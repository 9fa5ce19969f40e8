import random

import pytest
from hypothesis import given, strategies as st

from fixtures import CHIM_A, CHIM_B, chimeric_fixture
from oracles import bytes_to_bits, take
from sagezip.align import Alignment, Kind, Mismatch, Segment, build_index, align_batch
from sagezip.bitio import BitReader
from sagezip.decode import ScanState
from sagezip.encode import (LITERALS, MAPA, MAPGA, MBTA, MPA, MPGA, N_STREAMS, RFLAGS, Corner,
                            Layout, Schemes, SizeCounter, StreamWriter, bit_string, emit_read,
                            encode_bases_types, encode_matching_positions,
                            encode_mismatch_positions, encode_partition, estimate_bits,
                            fixed_schemes, sort_and_delta, sort_order, split_events, unzigzag,
                            zigzag)
from sagezip.errors import SageError
from sagezip.seqio import revcomp
from sagezip.simulate import SimParams, simulate_reads
from sagezip.tune import ClassScheme

W24 = ClassScheme((2, 4), (0, 1))
W248 = ClassScheme((2, 4, 8), (0, 1, 2))


def at(pos, mismatches=(), length=20, rev=False, **kw):
    cons_len = length + sum(m.block_len if m.kind is Kind.DEL else
                            -m.block_len if m.kind is Kind.INS else 0 for m in mismatches)
    return Alignment((Segment(pos, rev, (0, length), tuple(mismatches), cons_len),), **kw)


class TestMatchingPositions:
    def test_sort_and_delta(self):
        alns = [at(500), at(100), at(100), at(730)]
        ordered, deltas = sort_and_delta(alns)
        assert [a.cons_pos for a in ordered] == [100, 100, 500, 730]
        assert deltas == [100, 0, 400, 230]

    def test_single_read(self):
        assert sort_and_delta([at(0)])[1] == [0]

    def test_literals_go_last(self):
        alns = [Alignment.literal("ACGT"), at(5)]
        assert sort_order(alns) == [1, 0]

    @given(st.lists(st.integers(0, 10**7), min_size=1, max_size=50))
    def test_deltas_sum_to_last(self, positions):
        ordered, deltas = sort_and_delta([at(p) for p in positions])
        assert sum(deltas) == max(positions) and min(deltas) >= 0

    def test_delta_zero(self):
        g, p = encode_matching_positions([0], W24)
        assert bit_string(g) == "0" and bit_string(p) == "00"

    def test_delta_nine(self):
        g, p = encode_matching_positions([9], W24)
        assert bit_string(g) == "10"
        assert take(bit_string(p), 0, 4) == (0b1001, 4)

    def test_roundtrip_ten_thousand(self):
        rng = random.Random(0)
        deltas = [rng.choice([rng.randrange(4), rng.randrange(1 << 8), rng.randrange(1 << 20)])
                  for _ in range(10_000)]
        scheme = ClassScheme((2, 8, 20), (1, 0, 2))
        g, p = encode_matching_positions(deltas, scheme)
        readers = [BitReader(b"")] * N_STREAMS
        readers[MAPGA], readers[MAPA] = BitReader(g.getvalue()), BitReader(p.getvalue())
        scan = ScanState(readers, Schemes(scheme, scheme, scheme, scheme), 0)
        got = [scan.next_position() for _ in deltas]
        assert got == [sum(deltas[:i + 1]) for i in range(len(deltas))]


class TestMismatchPositions:
    def test_zero_mismatches(self):
        g, p = encode_mismatch_positions(at(3), W24, W24, long_read=False)
        assert bit_string(g) == "0" and bit_string(p) == "00"

    def test_fig7_read(self):
        mms = [Mismatch(2, Kind.SUB, 1, "A"), Mismatch(11, Kind.DEL, 5, ""),
               Mismatch(40, Kind.SUB, 1, "C")]
        g, p = encode_mismatch_positions(at(0, mms, 60), W248, W248, long_read=True)
        gb, pb = bit_string(g), bit_string(p)
        # MPGA: count (3 -> class 2), deltas 2, 9, 29, flag 0 after the indel
        assert gb == "0" + "0" + "10" + "0" + "110"
        pos = 0
        for want, width in ((3, 2), (2, 2), (9, 4), (5, 8), (29, 8)):
            v, pos = take(pb, pos, width)
            assert v == want
        assert pos == len(pb)
        assert pb[8:16] == "00000101"[::-1]

    def test_single_base_insertion_in_long_mode(self):
        mms = [Mismatch(4, Kind.INS, 1, "G")]
        g, p = encode_mismatch_positions(at(0, mms, 21), W248, W248, long_read=True)
        assert bit_string(g) == "0" + "10" + "1"
        assert len(bit_string(p)) == 2 + 4

    def test_offsets_must_increase(self):
        mms = [Mismatch(4, Kind.SUB, 1, "G"), Mismatch(4, Kind.SUB, 1, "T")]
        with pytest.raises(SageError):
            encode_mismatch_positions(at(0, mms), W248, W248, False)


class TestBasesTypes:
    CONS = "AGGCATTAGGAC" * 4

    def test_substitution(self):
        mbta = encode_bases_types(at(0, [Mismatch(0, Kind.SUB, 1, "T")]), self.CONS,
                                  Layout(merged_types=True, corner_offset0=False, fixed_read_len=20))
        assert bit_string(mbta) == "11"

    def test_deletion_sentinel(self):
        mbta = encode_bases_types(at(1, [Mismatch(0, Kind.DEL, 1, "")]), self.CONS,
                                  Layout(merged_types=True, corner_offset0=False, fixed_read_len=20))
        bits = bit_string(mbta)
        assert take(bits, 0, 2)[0] == 2 and bits[2:] == "1"

    def test_insertion_carries_bases(self):
        mbta = encode_bases_types(at(1, [Mismatch(0, Kind.INS, 1, "C")]), self.CONS,
                                  Layout(merged_types=True, corner_offset0=False, fixed_read_len=20))
        bits = bit_string(mbta)
        assert take(bits, 0, 2)[0] == 2 and bits[2] == "0" and take(bits, 3, 2)[0] == 1

    def test_unmerged_types(self):
        mbta = encode_bases_types(at(0, [Mismatch(0, Kind.SUB, 1, "T")]), self.CONS,
                                  Layout(merged_types=False, corner_offset0=False, fixed_read_len=20))
        assert bit_string(mbta) == "00" + "11"

    def test_substitution_equal_to_consensus_rejected(self):
        with pytest.raises(SageError):
            encode_bases_types(at(0, [Mismatch(0, Kind.SUB, 1, "A")]), self.CONS,
                               Layout(merged_types=True, corner_offset0=False, fixed_read_len=20))

    def test_n_read_corner_path(self):
        read = "ACGTN" + "A" * 15
        aln = Alignment((Segment(0, False, (0, 20), (), 0),), n_literal=read)
        w = StreamWriter()
        emit_read(w, aln, Layout(merged_types=True, corner_offset0=True, fixed_read_len=20),
                  fixed_schemes(), 0, self.CONS)
        mbta = bit_string(w.writers[MBTA])
        assert mbta == "1" + "00"          # corner marker, subtype N literal
        lit = bit_string(w.writers[LITERALS])
        assert lit[0] == "1" and take(lit, 1, 32)[0] == 20
        assert len(lit) == 1 + 32 + 3 * 20

    def test_real_offset0_mismatch_gets_zero_bit(self):
        aln = at(0, [Mismatch(0, Kind.SUB, 1, "T")])
        w = StreamWriter()
        emit_read(w, aln, Layout(merged_types=True, corner_offset0=True, fixed_read_len=20),
                  fixed_schemes(), 0, self.CONS)
        assert bit_string(w.writers[MBTA]) == "0" + "11"


class TestChimeric:
    def test_segment_fields(self):
        cons, reads = chimeric_fixture()
        best, _ = align_batch([reads[0]], build_index(cons, 15))[0]
        w = StreamWriter()
        emit_read(w, best, Layout(chimeric=True, merged_types=True, corner_offset0=True),
                  fixed_schemes(), 0, cons)
        rf = bit_string(w.writers[RFLAGS])
        assert rf[:3] == "001"               # not escaped, forward, chimeric
        assert take(rf, 3, 3)[0] == 2 and rf[6:] == "0"
        mapa = bit_string(w.writers[MAPA])
        assert take(mapa, 0, 32)[0] == CHIM_A
        assert unzigzag(take(mapa, 32, 32)[0]) == CHIM_B + 3 - CHIM_A

    def test_chimeric_is_smaller(self):
        cons, reads = chimeric_fixture()
        best, single = align_batch([reads[0]], build_index(cons, 15))[0]
        lay = Layout(chimeric=True, fixed_read_len=150)
        assert estimate_bits(best, fixed_schemes(), lay) < estimate_bits(single, fixed_schemes(),
                                                                        lay)

    def test_chimeric_needs_layout(self):
        cons, reads = chimeric_fixture()
        best, _ = align_batch([reads[0]], build_index(cons, 15))[0]
        with pytest.raises(SageError):
            estimate_bits(best, fixed_schemes(), Layout(chimeric=False))


@given(st.integers(-10**9, 10**9))
def test_zigzag(d):
    assert unzigzag(zigzag(d)) == d and zigzag(d) >= 0


def test_split_events():
    ins = Mismatch(3, Kind.INS, 300, "A" * 300)
    assert [e.block_len for e in split_events([ins], True)] == [255, 45]
    dels = split_events([Mismatch(3, Kind.DEL, 3, "")], False)
    assert [(e.offset, e.block_len) for e in dels] == [(3, 1), (4, 1), (5, 1)]


def test_zero_mismatch_read_cost():
    s = fixed_schemes()
    assert estimate_bits(at(7), s, Layout(fixed_read_len=20)) == 3 + 32 + 16


LAYOUTS = [Layout(indel_lengths=a, merged_types=b, corner_offset0=c, chimeric=True,
                  order_bits=o) for a in (False, True) for b in (False, True)
           for c in (False, True) for o in (0, 11)]


@pytest.fixture(scope="module")
def mixed(consensus_n):
    p = SimParams.short(sub_rate=0.02, indel_rate=0.01, n_frac=0.05, clip_frac=0.1,
                        chimeric_frac=0.1, random_frac=0.05)
    reads = simulate_reads(consensus_n, 1000, p, 21)
    alns = [b for b, _ in align_batch([r.bases for r in reads], build_index(consensus_n, 15))]
    return alns


@pytest.mark.parametrize("layout", LAYOUTS, ids=str)
def test_estimate_equals_emitted(mixed, consensus_n, layout):
    schemes = Schemes(W248, ClassScheme((3, 6, 9), (2, 0, 1)), ClassScheme((2, 8), (0, 1)),
                      ClassScheme((8,), (0,)))
    schemes = schemes._replace(matching=ClassScheme((4, 8, 16), (0, 1, 2)))
    order = sort_order(mixed)
    enc = encode_partition(mixed, order, 0, layout, schemes, consensus_n)
    prev, total = 0, 0
    for i in order:
        total += estimate_bits(mixed[i], schemes, layout, prev)
        if mixed[i].mapped:
            prev = mixed[i].cons_pos
    assert sum(enc.stream_bits) == total == sum(enc.categories)
    assert [len(b) for b in enc.blobs] == [(n + 7) // 8 for n in enc.stream_bits]


def test_sentinels_sound(mixed, consensus_n):
    for a in mixed:
        if not a.mapped or a.n_literal is not None:
            continue
        for seg in a.segments:
            for m in seg.mismatches:
                base = consensus_n[seg.cons_pos + m.offset]
                if m.kind is Kind.SUB:
                    assert m.payload != base
                else:
                    assert base in "ACGT"
