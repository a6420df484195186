"""Occurrence counts and empirical word frequencies of finite samples."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import AlphabetError, SpecError
from .symbolics import AlphabetLike, Word, alphabet_size, code_to_word, word_code


def symbol_dtype(alphabet: int):
    return np.uint8 if alphabet <= 256 else np.int32


def as_sample(x, alphabet: AlphabetLike | None = None) -> np.ndarray:
    """Coerce a string of digits, a sequence or an array into a symbol array."""
    if isinstance(x, str):
        x = [int(c) for c in x if not c.isspace()]
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise ValueError("a sample is one-dimensional")
    if arr.size and (arr.min() < 0):
        raise AlphabetError("negative symbol in sample")
    if alphabet is not None:
        a = alphabet_size(alphabet)
        if arr.size and arr.max() >= a:
            raise AlphabetError(f"symbol {int(arr.max())} outside alphabet of size {a}")
        return arr.astype(symbol_dtype(a), copy=False)
    return arr.astype(np.int64, copy=False)


def occurrence_count(x, word: Sequence[int]) -> int:
    """Number of positions at which ``word`` occurs in ``x`` (overlaps counted)."""
    x = as_sample(x)
    b = np.asarray(word, dtype=np.int64)
    if b.size == 0:
        raise ValueError("empty word")
    if x.size < b.size:
        return 0
    windows = np.lib.stride_tricks.sliding_window_view(x, b.size)
    return int(np.count_nonzero((windows == b).all(axis=1)))


def frequency(x, word: Sequence[int]) -> Fraction:
    """Relative frequency of ``word`` among the ``|x| - |word| + 1`` windows;
    zero when the sample is shorter than the word."""
    x = as_sample(x)
    n_windows = x.size - len(word) + 1
    if n_windows <= 0:
        return Fraction(0)
    return Fraction(occurrence_count(x, word), n_windows)


def _length_codes(x: np.ndarray, a: int, max_length: int):
    """Yield ``(l, codes)`` with the rank of every length-``l`` window.

    ``x`` may be 1-D or a 2-D batch (one sample per row).
    """
    codes = x.astype(np.int64)
    for length in range(1, max_length + 1):
        if length > 1:
            codes = codes[..., :-1] * a + x[..., length - 1:]
        if codes.shape[-1] == 0:
            return
        yield length, codes


@dataclass(frozen=True)
class FrequencyTable:
    """Counts of every word of length ``1..max_length`` in one sample.

    ``counts[l - 1][rank]`` is the occurrence count of the word with that
    rank; frequencies are kept as exact integer pairs (count, windows).
    """

    alphabet: int
    max_length: int
    n: int
    counts: list = field(repr=False)

    def windows(self, length: int) -> int:
        return max(self.n - length + 1, 0)

    def frequencies(self, length: int) -> np.ndarray:
        w = self.windows(length)
        c = self.counts[length - 1]
        if w == 0:
            return np.zeros(c.shape, dtype=float)
        return c / w

    def count(self, word: Sequence[int]) -> int:
        length, rank = word_code(word, self.alphabet)
        if length > self.max_length:
            raise ValueError(f"word longer than table depth {self.max_length}")
        return int(self.counts[length - 1][rank])

    def frequency(self, word: Sequence[int]) -> Fraction:
        w = self.windows(len(word))
        return Fraction(self.count(word), w) if w else Fraction(0)

    def items(self, length: int) -> Iterable[tuple[Word, Fraction]]:
        for rank in range(self.alphabet**length):
            word = code_to_word(length, rank, self.alphabet)
            yield word, self.frequency(word)


def frequency_table(x, max_length: int, alphabet: AlphabetLike) -> FrequencyTable:
    if max_length < 1:
        raise ValueError("max_length must be >= 1")
    a = alphabet_size(alphabet)
    x = as_sample(x, a)
    counts = [np.zeros(a**length, dtype=np.int64) for length in range(1, max_length + 1)]
    for length, codes in _length_codes(x, a, max_length):
        counts[length - 1] = np.bincount(codes, minlength=a**length)
    return FrequencyTable(a, max_length, int(x.size), counts)


def batch_counts(samples: np.ndarray, max_length: int, alphabet: int) -> list[np.ndarray]:
    """Per-length count matrices ``(R, a**l)`` for a batch of equal-length samples."""
    samples = np.atleast_2d(samples)
    r = samples.shape[0]
    a = alphabet
    out = [np.zeros((r, a**length), dtype=np.int64) for length in range(1, max_length + 1)]
    offsets = np.arange(r, dtype=np.int64)[:, None]
    for length, codes in _length_codes(samples, a, max_length):
        size = a**length
        flat = (codes + offsets * size).ravel()
        out[length - 1] = np.bincount(flat, minlength=r * size).reshape(r, size)
    return out


def batch_frequencies(samples: np.ndarray, max_length: int, alphabet: int) -> list[np.ndarray]:
    samples = np.atleast_2d(samples)
    n = samples.shape[1]
    freqs = []
    for length, c in enumerate(batch_counts(samples, max_length, alphabet), start=1):
        w = n - length + 1
        freqs.append(c / w if w > 0 else np.zeros(c.shape))
    return freqs


# -- sample files -------------------------------------------------------------


def parse_sample_line(line: str) -> list[int]:
    line = line.strip()
    if any(c.isspace() for c in line):
        return [int(t) for t in line.split()]
    if not line.isdigit():
        raise SpecError(f"cannot parse sample line {line[:40]!r}")
    return [int(c) for c in line]


def read_samples(path: str | os.PathLike, alphabet: AlphabetLike | None = None) -> list[np.ndarray]:
    """Read a sample file: one sample per line, blank lines ignored.

    Symbols are contiguous digits (alphabets up to 10) or
    whitespace-separated integers.
    """
    samples = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                samples.append(as_sample(parse_sample_line(line), alphabet))
    return samples


def format_sample(x, alphabet: int) -> str:
    x = np.asarray(x)
    if alphabet <= 10:
        return "".join(map(str, x.tolist()))
    return " ".join(map(str, x.tolist()))


def write_samples(path: str | os.PathLike, samples: Iterable, alphabet: int) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w") as fh:
        for x in samples:
            fh.write(format_sample(x, alphabet) + "\n")
    os.replace(tmp, path)
