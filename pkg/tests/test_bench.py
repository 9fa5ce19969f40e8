import logging

import pytest
from hypothesis import given, strategies as st

from sagezip.bench import BenchReport, StageSpec, bench, bottleneck, pipeline_throughput, ratio
from sagezip.codec import CompressOptions
from sagezip.plan import LEVELS
from sagezip.seqio import write_fastq
from sagezip.simulate import SimParams, simulate_reads

rates = st.floats(min_value=1e-3, max_value=1e12, allow_nan=False, allow_infinity=False)
stages = st.lists(st.tuples(st.text(min_size=1, max_size=5), rates), min_size=1, max_size=12)


def test_decompression_bound():
    s = [StageSpec("io", 7e9), StageSpec("decompress", 1e8), StageSpec("map", 5e9)]
    assert pipeline_throughput(s) == 1e8 and bottleneck(s).name == "decompress"


def test_single_stage():
    assert pipeline_throughput([StageSpec("only", 123.5)]) == 123.5


def test_empty_pipeline():
    with pytest.raises(ValueError):
        pipeline_throughput([])


def test_stage_needs_positive_rate():
    with pytest.raises(ValueError):
        StageSpec("bad", 0)


@given(stages, st.randoms())
def test_min_and_permutation_invariance(specs, rnd):
    s = [StageSpec(n, t) for n, t in specs]
    shuffled = list(s)
    rnd.shuffle(shuffled)
    assert pipeline_throughput(s) == min(t for _, t in specs) == pipeline_throughput(shuffled)


def test_ratio():
    assert ratio(1000, 100) == 10.0
    with pytest.raises(ValueError):
        ratio(10, 0)


def test_bench_report(consensus, caplog):
    reads = simulate_reads(consensus, 400, SimParams.short(sub_rate=0.01, random_frac=0.02), 2)
    import io
    buf = io.BytesIO()
    write_fastq(buf, reads)
    raw = buf.getvalue()
    with caplog.at_level(logging.WARNING):
        rep = bench(reads, consensus, len(raw), CompressOptions(), ablate=LEVELS,
                    external=["cat", "definitely-not-a-command"], raw_input=raw)
    assert isinstance(rep, BenchReport)
    assert rep.ratio == len(raw) / rep.compressed_bytes > 10
    assert sum(rep.categories.values()) == rep.payload_bits
    sizes = [rep.ablation[lv]["bytes"] for lv in LEVELS]
    assert sizes == sorted(sizes, reverse=True) and sizes[-1] == rep.compressed_bytes
    for row in rep.ablation.values():
        assert sum(row["categories"].values()) > 0
    assert rep.external == {"cat": len(raw)}
    assert "definitely-not-a-command" in caplog.text
    assert rep.decode_throughput > 0
    assert "ratio" in rep.summary()
