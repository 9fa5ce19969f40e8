import random

import pytest
from hypothesis import given, strategies as st

from oracles import brute_force_cost, recount, scheme_cost
from sagezip.errors import CoverageError
from sagezip.tune import (BitLenHistogram, ClassScheme, cost_of, histogram, optimize_classes,
                          scheme_for)


def hist_of(d: dict) -> BitLenHistogram:
    counts = [0] * 41
    for b, c in d.items():
        counts[b] = c
    return BitLenHistogram(tuple(counts))


hists = st.dictionaries(st.integers(1, 12), st.integers(1, 500), min_size=1, max_size=12)


def test_histogram_example():
    assert {b: c for b, c in histogram([0, 1, 2, 3, 7, 8]).items()} == {1: 2, 2: 2, 3: 1, 4: 1}


def test_histogram_empty():
    assert histogram([]).total == 0


def test_histogram_recount():
    rng = random.Random(1)
    vals = [rng.randrange(1 << 16) for _ in range(100_000)]
    assert dict(histogram(vals).items()) == recount(vals)


def test_single_class():
    h = hist_of({4: 1000})
    s = optimize_classes(h, 5)
    assert s.widths == (4,) and cost_of(h, s) == 5000


def test_two_classes():
    h = hist_of({2: 900, 8: 100})
    s = optimize_classes(h, 5)
    assert s.widths == (2, 8) and cost_of(h, s) == 3700
    assert brute_force_cost({2: 900, 8: 100}, 5) == 3700
    assert cost_of(h, scheme_for(h, (8,))) == 9000


def test_uncovered_value():
    with pytest.raises(CoverageError):
        cost_of(hist_of({9: 1}), scheme_for(hist_of({3: 1}), (3, 8)))
    with pytest.raises(CoverageError):
        ClassScheme((2, 4), (0, 1)).bits_for(16)


def test_rank_permutations_do_not_beat_frequency_order():
    rng = random.Random(5)
    for _ in range(10):
        d = {b: rng.randint(1, 100) for b in rng.sample(range(1, 8), rng.randint(1, 6))}
        assert brute_force_cost(d, 3, permute=True) == cost_of(hist_of(d), optimize_classes(
            hist_of(d), 3))


@given(hists, st.integers(1, 5))
def test_optimal_against_enumeration(d, k):
    assert cost_of(hist_of(d), optimize_classes(hist_of(d), k)) == brute_force_cost(d, k)


@given(hists, st.integers(1, 5))
def test_more_classes_never_cost_more(d, k):
    h = hist_of(d)
    assert cost_of(h, optimize_classes(h, k + 1)) <= cost_of(h, optimize_classes(h, k))


@given(hists, st.integers(1, 5))
def test_frequent_classes_get_short_codes(d, k):
    h = hist_of(d)
    s = optimize_classes(h, k)
    use = [0] * s.k
    for b, c in d.items():
        use[next(i for i, w in enumerate(s.widths) if w >= b)] += c
    for a in range(s.k):
        for b in range(s.k):
            if use[a] > use[b]:
                assert s.code_length(a) <= s.code_length(b)
    assert cost_of(h, s) == scheme_cost(d, s.widths, s.ranks)


@given(hists, st.integers(1, 6))
def test_scheme_bytes_roundtrip(d, k):
    s = optimize_classes(hist_of(d), k)
    back, end = ClassScheme.from_bytes(s.to_bytes())
    assert back == s and end == len(s.to_bytes())


def test_fixed_scheme_has_no_guide_bits():
    s = ClassScheme.fixed_width(32)
    assert s.bits_for(5) == 32
