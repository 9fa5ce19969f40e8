import io
import random
import warnings

import pytest
from hypothesis import given, strategies as st

from oracles import bits_to_bytes, bits_of
from sagezip.errors import CorruptionError, PackError, ParseError
from sagezip.seqio import (PackMode, PackedSeq, ReadRecord, pack_bases, parse_fasta,
                           parse_fastq, read_packed, revcomp, unpack_bases, write_fastq,
                           write_packed)

dna = st.text(alphabet="ACGT", min_size=1, max_size=300)
dna_n = st.text(alphabet="ACGTN", min_size=1, max_size=300)


def fq(text: str):
    return list(parse_fastq(io.BytesIO(text.encode())))


class TestParseFastq:
    def test_minimal_record(self):
        assert fq("@r1\nACGT\n+\nIIII\n") == [ReadRecord("r1", "ACGT")]

    def test_lowercase_n_is_uppercased(self):
        assert fq("@r\nacnt\n+\nIIII\n")[0].bases == "ACNT"

    def test_truncated_last_record_names_its_index(self):
        with pytest.raises(ParseError) as err:
            fq("@a\nAC\n+\nII\n@b\nAC\n+\n")
        assert err.value.index == 1

    def test_illegal_character(self):
        with pytest.raises(ParseError):
            fq("@a\nAXGT\n+\nIIII\n")

    def test_quality_length_mismatch(self):
        with pytest.raises(ParseError):
            fq("@a\nACGT\n+\nIII\n")

    def test_keep_meta(self):
        recs = list(parse_fastq(io.BytesIO(b"@a x y\nAC\n+\n#I\n"), keep_meta=True))
        assert recs[0].id == "a x y" and recs[0].qual == "#I"

    def test_empty_input(self):
        assert fq("") == []

    @given(st.lists(dna_n, max_size=20))
    def test_accepts_own_writer_output(self, seqs):
        recs = [ReadRecord(f"r{i}", s) for i, s in enumerate(seqs)]
        buf = io.BytesIO()
        write_fastq(buf, recs)
        buf.seek(0)
        assert list(parse_fastq(buf)) == recs


class TestParseFasta:
    def test_multiline(self):
        assert parse_fasta(io.BytesIO(b">c\nACGT\nACGT\n")) == ("c", "ACGTACGT")

    def test_two_records_keeps_first_and_warns(self):
        with warnings.catch_warnings(record=True) as w:
            warnings.simplefilter("always")
            assert parse_fasta(io.BytesIO(b">a\nAC\n>b\nGG\n")) == ("a", "AC")
        assert w

    def test_empty_sequence(self):
        with pytest.raises(ParseError):
            parse_fasta(io.BytesIO(b">c\n\n"))


class TestPacking:
    def test_two_bit_acgt_byte(self):
        assert pack_bases("ACGT", PackMode.TWO_BIT).data == bytes([0b11100100])

    def test_two_bit_matches_bit_oracle(self):
        s = "GATTACAGC"
        expect = bits_to_bytes(bits_of((" ACGT".index(b) - 1, 2) for b in s))
        assert pack_bases(s, PackMode.TWO_BIT).data == expect

    def test_one_hot_single_base(self):
        assert pack_bases("A", PackMode.ONE_HOT).data[0] & 0xF == 0b0001

    def test_two_bit_rejects_n(self):
        with pytest.raises(PackError):
            pack_bases("AN", PackMode.TWO_BIT)

    def test_three_bit_roundtrip_with_n(self):
        assert unpack_bases(pack_bases("ACGTN", PackMode.THREE_BIT)) == "ACGTN"

    def test_corrupted_three_bit_code(self):
        with pytest.raises(CorruptionError):
            unpack_bases(PackedSeq(PackMode.THREE_BIT, bytes([0b111]), 1))

    def test_corrupted_one_hot_nibble(self):
        with pytest.raises(CorruptionError):
            unpack_bases(PackedSeq(PackMode.ONE_HOT, bytes([0b0011]), 1))

    def test_ten_thousand_random_strings(self):
        rng = random.Random(3)
        for _ in range(10_000):
            s = "".join(rng.choice("ACGT") for _ in range(rng.randint(1, 40)))
            assert unpack_bases(pack_bases(s, PackMode.TWO_BIT)) == s

    @given(dna_n, st.sampled_from([PackMode.THREE_BIT, PackMode.ONE_HOT]))
    def test_roundtrip_any_mode(self, s, mode):
        p = pack_bases(s, mode)
        assert unpack_bases(p) == s
        assert p.nbits == len(s) * int(mode)
        assert len(p.data) == (p.nbits + 7) // 8

    @given(dna)
    def test_two_bit_size(self, s):
        p = pack_bases(s, PackMode.TWO_BIT)
        assert p.nbits == 2 * len(s) and unpack_bases(p) == s

    def test_packed_records_fall_back_for_n(self):
        buf = io.BytesIO()
        assert write_packed(buf, ["ACGT", "ANGT"], PackMode.TWO_BIT) == 1
        buf.seek(0)
        assert list(read_packed(buf)) == ["ACGT", "ANGT"]


@given(dna_n)
def test_revcomp_involution(s):
    assert revcomp(revcomp(s)) == s


def test_revcomp_example():
    assert revcomp("AACGN") == "NCGTT"
