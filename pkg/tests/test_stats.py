import time
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ergotest.errors import AlphabetError
from ergotest.stats import (as_sample, batch_counts, batch_frequencies, format_sample, frequency,
                            frequency_table, occurrence_count, read_samples, write_samples)
from ergotest.symbolics import code_to_word


def naive_count(x, word):
    x, word = list(x), list(word)
    return sum(x[i:i + len(word)] == word for i in range(len(x) - len(word) + 1))


samples = st.integers(2, 4).flatmap(
    lambda a: st.tuples(st.just(a), st.lists(st.integers(0, a - 1), max_size=60)))


@pytest.mark.parametrize("x, word, count", [("0001", "00", 2), ("01", "000", 0), ("0101", "01", 2)])
def test_occurrence_count(x, word, count):
    assert occurrence_count(x, as_sample(word)) == count


@pytest.mark.parametrize("x, word, value", [("0001", "00", Fraction(2, 3)), ("1111", "1", 1), ("0", "01", 0)])
def test_frequency(x, word, value):
    assert frequency(x, as_sample(word)) == value


def test_table_examples():
    table = frequency_table("0001", 1, 2)
    assert dict(table.items(1)) == {(0,): Fraction(3, 4), (1,): Fraction(1, 4)}
    empty = frequency_table([], 3, 2)
    assert all(not c.any() for c in empty.counts)
    assert all(not empty.frequencies(ell).any() for ell in range(1, 4))


@given(samples, st.integers(1, 5))
def test_table_matches_per_word_counts(case, depth):
    a, x = case
    table = frequency_table(x, depth, a)
    for ell in range(1, depth + 1):
        for rank in range(a**ell):
            word = code_to_word(ell, rank, a)
            assert table.count(word) == naive_count(x, word)
            assert table.frequency(word) == frequency(x, word)


@given(samples, st.integers(1, 5))
def test_rows_sum_to_one(case, depth):
    a, x = case
    table = frequency_table(x, depth, a)
    for ell in range(1, depth + 1):
        if len(x) >= ell:
            assert sum(f for _, f in table.items(ell)) == 1
            assert table.frequencies(ell).sum() == pytest.approx(1.0, abs=1e-12)


@given(samples, st.integers(2, 5))
def test_marginalization(case, depth):
    a, x = case
    table = frequency_table(x, depth, a)
    for ell in range(1, min(depth, len(x))):
        longer = table.counts[ell].reshape(a**ell, a).sum(axis=1)
        assert set(np.unique(table.counts[ell - 1] - longer)) <= {0, 1}


@given(st.lists(st.lists(st.integers(0, 2), min_size=12, max_size=12), min_size=1, max_size=5))
def test_batch_counts_match_single(rows):
    batch = np.array(rows)
    counts = batch_counts(batch, 4, 3)
    freqs = batch_frequencies(batch, 4, 3)
    for r, x in enumerate(rows):
        table = frequency_table(x, 4, 3)
        for ell in range(1, 5):
            np.testing.assert_array_equal(counts[ell - 1][r], table.counts[ell - 1])
            np.testing.assert_allclose(freqs[ell - 1][r], table.frequencies(ell), rtol=0, atol=0)


def test_out_of_alphabet_symbol():
    with pytest.raises(AlphabetError):
        frequency_table("0120", 2, 2)


def test_sample_file_round_trip(tmp_path):
    path = tmp_path / "x.txt"
    xs = [as_sample("0110", 2), as_sample("1", 2)]
    write_samples(path, xs, 2)
    assert path.read_text() == "0110\n1\n"
    back = read_samples(path, 2)
    assert [b.tolist() for b in back] == [x.tolist() for x in xs]
    wide = tmp_path / "w.txt"
    write_samples(wide, [np.array([11, 0, 3])], 12)
    assert read_samples(wide, 12)[0].tolist() == [11, 0, 3]
    assert format_sample([1, 0], 2) == "10"


def test_table_speed_gate():
    x = np.random.default_rng(0).integers(0, 2, size=10**6)
    start = time.perf_counter()
    table = frequency_table(x, 8, 2)
    elapsed = time.perf_counter() - start
    assert table.counts[7].sum() == 10**6 - 7
    assert elapsed < 2.0
