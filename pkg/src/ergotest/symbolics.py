"""Words over a finite alphabet, their length-lexicographic index and weights.

Words are plain tuples of integer symbols.  Internally a word of length ``l``
is packed as ``(l, rank)`` where ``rank`` is its base-``|A|`` value, so all
words of one length map to ``range(|A|**l)`` in lexicographic order.  The
global index of a word is ``N_{l-1} + 1 + rank`` with ``N_l`` the number of
words of length at most ``l``, and its weight is ``2**-index``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

from .errors import AlphabetError

#: Hard cap on the number of enumerated words, ``N_L``.
MAX_WORDS = 10**6

Word = tuple


@dataclass(frozen=True)
class Alphabet:
    """Finite alphabet ``{0, ..., size - 1}``."""

    size: int

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 1:
            raise AlphabetError(f"alphabet size must be a positive integer, got {self.size!r}")

    def __len__(self) -> int:
        return self.size


AlphabetLike = Union[Alphabet, int]


def alphabet_size(alphabet: AlphabetLike) -> int:
    size = alphabet.size if isinstance(alphabet, Alphabet) else int(alphabet)
    if size < 1:
        raise AlphabetError(f"alphabet size must be >= 1, got {size}")
    return size


def cumulative_count(length: int, alphabet: AlphabetLike) -> int:
    """Number of words of length 1..``length``."""
    a = alphabet_size(alphabet)
    if length <= 0:
        return 0
    if a == 1:
        return length
    return (a ** (length + 1) - a) // (a - 1)


def word_code(word: Sequence[int], alphabet: AlphabetLike) -> tuple[int, int]:
    """Pack ``word`` into ``(length, rank)``."""
    a = alphabet_size(alphabet)
    rank = 0
    for s in word:
        s = int(s)
        if not 0 <= s < a:
            raise AlphabetError(f"symbol {s} outside alphabet of size {a}")
        rank = rank * a + s
    return len(word), rank


def code_to_word(length: int, rank: int, alphabet: AlphabetLike) -> Word:
    a = alphabet_size(alphabet)
    symbols = [0] * length
    for i in range(length - 1, -1, -1):
        rank, symbols[i] = divmod(rank, a)
    return tuple(symbols)


def index_to_word(k: int, alphabet: AlphabetLike) -> Word:
    """Return the ``k``-th word (1-based) in length-lexicographic order."""
    if k < 1:
        raise ValueError(f"word index must be >= 1, got {k}")
    a = alphabet_size(alphabet)
    length = 1
    while cumulative_count(length, a) < k:
        length += 1
    return code_to_word(length, k - cumulative_count(length - 1, a) - 1, a)


def word_to_index(word: Sequence[int], alphabet: AlphabetLike) -> int:
    if len(word) == 0:
        raise ValueError("the empty word has no index")
    length, rank = word_code(word, alphabet)
    return cumulative_count(length - 1, alphabet) + 1 + rank


def tail_weight(length: int, alphabet: AlphabetLike) -> float:
    """Total weight ``2**-N_L`` of all words longer than ``length``."""
    if length < 0:
        raise ValueError("length must be >= 0")
    return math.ldexp(1.0, -cumulative_count(length, alphabet))


def exact_tail_weight(length: int, alphabet: AlphabetLike) -> Fraction:
    return Fraction(1, 2 ** cumulative_count(length, alphabet))


def max_depth(alphabet: AlphabetLike, max_words: int = MAX_WORDS) -> int:
    """Largest ``L`` with ``N_L <= max_words``."""
    depth = 0
    while cumulative_count(depth + 1, alphabet) <= max_words:
        depth += 1
    return depth


class WeightScheme:
    """Weights ``2**-k`` of all words up to ``max_length``, grouped by length.

    ``weights(l)`` is a float array indexed by word rank within length ``l``.
    Weights smaller than the double-precision range are flushed to zero;
    their mass is always below ``tail_weight`` of a shorter depth.
    """

    def __init__(self, alphabet: AlphabetLike, max_length: int):
        self.alphabet = Alphabet(alphabet_size(alphabet))
        if max_length < 0:
            raise ValueError("max_length must be >= 0")
        if cumulative_count(max_length, self.alphabet) > MAX_WORDS:
            raise ValueError(
                f"depth {max_length} enumerates more than {MAX_WORDS} words "
                f"(use at most {max_depth(self.alphabet)})"
            )
        self.max_length = max_length
        a = self.alphabet.size
        self._weights = []
        for length in range(1, max_length + 1):
            start = cumulative_count(length - 1, a) + 1
            exps = -(start + np.arange(a**length, dtype=np.int64))
            self._weights.append(np.ldexp(1.0, exps.astype(np.int32)))

    def weights(self, length: int) -> np.ndarray:
        return self._weights[length - 1]

    @property
    def tail(self) -> float:
        return tail_weight(self.max_length, self.alphabet)

    @property
    def n_words(self) -> int:
        return cumulative_count(self.max_length, self.alphabet)

    def exact_weights(self, length: int) -> list[Fraction]:
        start = cumulative_count(length - 1, self.alphabet) + 1
        return [Fraction(1, 2 ** (start + r)) for r in range(self.alphabet.size**length)]

    def __repr__(self):
        return f"WeightScheme(alphabet={self.alphabet.size}, max_length={self.max_length})"


@lru_cache(maxsize=64)
def weight_scheme(alphabet: int, max_length: int) -> WeightScheme:
    return WeightScheme(alphabet, max_length)


def parse_word(text: str) -> Word:
    """``"0101"`` -> ``(0, 1, 0, 1)``; whitespace-separated integers also accepted."""
    text = text.strip()
    if any(c.isspace() for c in text):
        return tuple(int(t) for t in text.split())
    return tuple(int(c) for c in text)
