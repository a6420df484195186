"""Threshold calibration, the level-alpha test, the nearest-family test and
exhaustive oracles for their error probabilities."""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from ._seeds import derive_seed
from .distance import distance_to_family, family_statistics
from .errors import (CacheMismatchError, CalibrationError, CapExceededError, DomainError,
                     SpecError)
from .hypotheses import (HypothesisFamily, MemberDesign, design_from_spec, family_from_spec,
                         member_design)
from .processes import ProcessModel
from .stats import as_sample, symbol_dtype
from .symbolics import cumulative_count, exact_tail_weight, weight_scheme

DEFAULT_CAP = 2**20


def conservative_rank(alpha: float, replicates: int) -> int:
    """1-based order-statistic rank ``ceil((1 - alpha)(m + 1))``, capped at ``m``."""
    if not 0.0 < alpha < 1.0:
        raise CalibrationError(f"alpha must lie in (0, 1), got {alpha}")
    if replicates < 1:
        raise CalibrationError("need at least one replicate")
    level = 1 - Fraction(alpha).limit_denominator(10**12)
    return min(math.ceil(level * (replicates + 1)), replicates)


def conservative_quantile(values: Sequence[float], alpha: float) -> float:
    values = np.sort(np.asarray(values, dtype=float))
    return float(values[conservative_rank(alpha, values.size) - 1])


def request_key(family: HypothesisFamily, design: MemberDesign, n: int, alpha: float,
                depth: int, replicates: int, seed: int) -> str:
    """Content hash identifying a calibration request."""
    payload = {"family": family.to_spec(), "design": design.to_spec(), "n": int(n),
               "alpha": float(alpha), "depth": int(depth), "replicates": int(replicates),
               "seed": int(seed)}
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class CalibrationTable:
    """Calibrated acceptance radius for one (family, n, alpha, depth)."""

    family: dict
    n: int
    alpha: float
    depth: int
    design: dict
    replicates: int
    threshold: float
    seed: int
    quantile_rank: int
    member_quantiles: list = field(default_factory=list)
    quantile_rule: str = "ceil((1-alpha)(m+1))-th order statistic, max over members"
    key: str = ""

    def expected_key(self) -> str:
        return request_key(family_from_spec(self.family), design_from_spec(self.design), self.n,
                           self.alpha, self.depth, self.replicates, self.seed)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CalibrationTable":
        try:
            table = cls(**json.loads(text))
        except (TypeError, json.JSONDecodeError) as exc:
            raise SpecError(f"malformed calibration table: {exc}") from None
        if table.key != table.expected_key():
            raise CacheMismatchError("calibration table content does not match its key")
        return table

    def save(self, path: str | os.PathLike) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(self.to_json())
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "CalibrationTable":
        return cls.from_json(Path(path).read_text())


def _member_statistics(args):
    family_spec, member_spec, index, n, depth, replicates, seed = args
    from .processes import model_from_spec

    family = family_from_spec(family_spec)
    member = model_from_spec(member_spec)
    samples = member.sample_paths(n, replicates, derive_seed(seed, "member", index))
    return family_statistics(samples, family, depth)


def calibrate_many(family: HypothesisFamily, n: int, alphas: Sequence[float], depth: int,
                   design: MemberDesign = MemberDesign(), replicates: int = 1000, seed: int = 0,
                   workers: int = 1) -> list[CalibrationTable]:
    """Tables for several levels from one shared set of simulated statistics."""
    ranks = [conservative_rank(alpha, replicates) for alpha in alphas]
    if n < 1 or depth < 1:
        raise CalibrationError("n and depth must be >= 1")
    members = member_design(family, design)
    if not members:
        raise CalibrationError("empty member design")
    jobs = [(family.to_spec(), m.to_spec(), i, n, depth, replicates, seed)
            for i, m in enumerate(members)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            stats = [np.sort(s) for s in pool.map(_member_statistics, jobs)]
    else:
        stats = []
        for i, m in enumerate(members):
            samples = m.sample_paths(n, replicates, derive_seed(seed, "member", i))
            stats.append(np.sort(family_statistics(samples, family, depth)))
    tables = []
    for alpha, rank in zip(alphas, ranks):
        quantiles = [float(s[rank - 1]) for s in stats]
        table = CalibrationTable(
            family=family.to_spec(), n=int(n), alpha=float(alpha), depth=int(depth),
            design=design.to_spec(), replicates=int(replicates), threshold=max(quantiles),
            seed=int(seed), quantile_rank=rank, member_quantiles=quantiles,
        )
        table.key = request_key(family, design, n, alpha, depth, replicates, seed)
        tables.append(table)
    return tables


def calibrate_gamma(family: HypothesisFamily, n: int, alpha: float, depth: int,
                    design: MemberDesign = MemberDesign(), replicates: int = 1000, seed: int = 0,
                    workers: int = 1) -> CalibrationTable:
    """Monte Carlo estimate of the smallest radius ``gamma`` with
    ``rho(d(X, H) <= gamma) >= 1 - alpha`` for every design member ``rho``.

    Each member gets ``replicates`` paths of length ``n``; its radius is the
    conservative order statistic of their statistics and the threshold is
    the largest member radius.
    """
    return calibrate_many(family, n, [alpha], depth, design, replicates, seed, workers)[0]


def cached_calibration(cache_dir: str | os.PathLike, family: HypothesisFamily, n: int, alpha: float,
                       depth: int, design: MemberDesign = MemberDesign(), replicates: int = 1000,
                       seed: int = 0, workers: int = 1) -> tuple[CalibrationTable, bool]:
    """Load a table from ``cache_dir`` by request key, computing it on a miss.

    Returns ``(table, hit)``.
    """
    key = request_key(family, design, n, alpha, depth, replicates, seed)
    path = Path(cache_dir) / f"{key}.json"
    if path.exists():
        table = CalibrationTable.load(path)
        if table.key != key:
            raise CacheMismatchError(f"cached table {path} does not match the request")
        return table, True
    table = calibrate_gamma(family, n, alpha, depth, design, replicates, seed, workers)
    Path(cache_dir).mkdir(parents=True, exist_ok=True)
    table.save(path)
    return table, False


# -- tests --------------------------------------------------------------------


@dataclass
class TestReport:
    """Outcome of one test on one sample (1 means "not H0")."""

    __test__ = False

    test: str
    decision: int
    statistic: float
    n: int
    threshold: float | None = None
    alpha: float | None = None
    statistic_alt: float | None = None
    witnesses: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


class PsiTest:
    """Reject iff the distance to ``family`` exceeds the calibrated radius."""

    def __init__(self, table: CalibrationTable, family: HypothesisFamily):
        if family.to_spec() != table.family:
            raise CacheMismatchError("calibration table was computed for a different family")
        self.table = table
        self.family = family

    @property
    def alphabet(self):
        return self.family.alphabet

    def statistics(self, samples: np.ndarray) -> np.ndarray:
        samples = np.atleast_2d(samples)
        if samples.shape[1] != self.table.n:
            raise CalibrationError(
                f"sample length {samples.shape[1]} does not match calibrated n={self.table.n}"
            )
        return family_statistics(samples, self.family, self.table.depth)

    def rejects(self, samples: np.ndarray) -> np.ndarray:
        return self.statistics(samples) > self.table.threshold

    def report(self, x) -> TestReport:
        x = as_sample(x, self.alphabet)
        stat = float(self.statistics(x[None, :])[0])
        witness = distance_to_family(x, self.family, self.table.depth).witness
        return TestReport("psi", int(stat > self.table.threshold), stat, int(x.size),
                          threshold=self.table.threshold, alpha=self.table.alpha,
                          witnesses=[witness.to_spec()])


class PhiTest:
    """Nearest-family test: 0 iff strictly closer to ``h0`` than to ``h1``."""

    def __init__(self, h0: HypothesisFamily, h1: HypothesisFamily, depth: int):
        if h0.alphabet != h1.alphabet:
            raise DomainError("families use different alphabets")
        self.h0, self.h1, self.depth = h0, h1, depth

    @property
    def alphabet(self):
        return self.h0.alphabet

    def statistics(self, samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        samples = np.atleast_2d(samples)
        return (family_statistics(samples, self.h0, self.depth),
                family_statistics(samples, self.h1, self.depth))

    def rejects(self, samples: np.ndarray) -> np.ndarray:
        s0, s1 = self.statistics(samples)
        return ~(s0 < s1)

    def report(self, x) -> TestReport:
        x = as_sample(x, self.alphabet)
        s0, s1 = (float(s[0]) for s in self.statistics(x[None, :]))
        w0 = distance_to_family(x, self.h0, self.depth).witness
        w1 = distance_to_family(x, self.h1, self.depth).witness
        return TestReport("phi", 0 if s0 < s1 else 1, s0, int(x.size), statistic_alt=s1,
                          witnesses=[w0.to_spec(), w1.to_spec()])


def psi_test(x, table: CalibrationTable, family: HypothesisFamily) -> TestReport:
    return PsiTest(table, family).report(x)


def phi_test(x, h0: HypothesisFamily, h1: HypothesisFamily, depth: int) -> TestReport:
    return PhiTest(h0, h1, depth).report(x)


# -- exhaustive oracles -------------------------------------------------------


def all_samples(n: int, alphabet: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Rows ``start..stop`` of the lexicographic enumeration of ``A**n``."""
    stop = alphabet**n if stop is None else stop
    ranks = np.arange(start, stop, dtype=np.int64)
    powers = alphabet ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((ranks[:, None] // powers[None, :]) % alphabet).astype(symbol_dtype(alphabet))


def _check_cap(n: int, alphabet: int, cap: int) -> None:
    if alphabet**n > cap:
        raise CapExceededError(f"|A|^n = {alphabet}^{n} exceeds the enumeration cap {cap}")


def exact_rejection_probability(test, model: ProcessModel, n: int, cap: int = DEFAULT_CAP,
                                chunk: int = 2**14) -> float:
    """``model(test rejects X)`` summed exactly over every ``X`` in ``A**n``."""
    a = model.alphabet
    if test.alphabet != a:
        raise DomainError("test and model use different alphabets")
    _check_cap(n, a, cap)
    probs = model.marginals(n)
    terms = []
    for lo in range(0, a**n, chunk):
        hi = min(lo + chunk, a**n)
        rej = test.rejects(all_samples(n, a, lo, hi))
        terms.extend(probs[lo:hi][rej].tolist())
    return math.fsum(terms)


def monte_carlo_rejection(test, model: ProcessModel, n: int, replicates: int, seed: int) -> float:
    samples = model.sample_paths(n, replicates, seed)
    return float(np.mean(test.rejects(samples)))


# -- smoothing bounds ---------------------------------------------------------


@dataclass
class SmoothingRow:
    epsilon: float
    equation: str
    lhs: float
    rhs: float
    threshold: float
    holds: bool


def exact_statistic(x, family: HypothesisFamily, depth: int) -> Fraction:
    """The statistic in rational arithmetic (model marginals taken as the
    exact values of their doubles).  Enumerable families only."""
    if not family.enumerable:
        raise DomainError("exact statistics need an enumerable family")
    a = family.alphabet
    x = as_sample(x, a)
    n = x.size
    scheme = weight_scheme(a, depth)
    counts = []
    for length in range(1, depth + 1):
        c = np.zeros(a**length, dtype=np.int64)
        for i in range(n - length + 1):
            r = 0
            for s in x[i:i + length]:
                r = r * a + int(s)
            c[r] += 1
        counts.append(c)
    best = None
    for member in family.members:
        tables = member.marginal_tables(depth)
        total = Fraction(0)
        for length in range(1, depth + 1):
            w = n - length + 1
            weights = scheme.exact_weights(length)
            for r in range(a**length):
                nu = Fraction(int(counts[length - 1][r]), w) if w > 0 else Fraction(0)
                total += weights[r] * abs(nu - Fraction(float(tables[length - 1][r])))
        best = total if best is None else min(best, total)
    return best


class _ExactComparator:
    """Compares float statistics against rational thresholds, deciding
    near-ties with :func:`exact_statistic`."""

    def __init__(self, samples, stats, family, depth, slack=1e-9):
        self.samples, self.stats, self.family, self.depth = samples, stats, family, depth
        self.slack = slack
        self._exact: dict[int, Fraction] = {}

    def _value(self, i: int) -> Fraction:
        if i not in self._exact:
            self._exact[i] = exact_statistic(self.samples[i], self.family, self.depth)
        return self._exact[i]

    def ge(self, threshold: Fraction) -> np.ndarray:
        mask = self.stats >= float(threshold)
        if self.family.enumerable:
            for i in np.flatnonzero(np.abs(self.stats - float(threshold)) <= self.slack):
                mask[i] = self._value(i) >= threshold
        return mask

    def le(self, threshold: Fraction) -> np.ndarray:
        mask = self.stats <= float(threshold)
        if self.family.enumerable:
            for i in np.flatnonzero(np.abs(self.stats - float(threshold)) <= self.slack):
                mask[i] = self._value(i) <= threshold
        return mask


def verify_smoothing_bounds(model: ProcessModel, family: HypothesisFamily, m: int, k: int,
                            epsilons: Sequence, depth: int, cap: int = DEFAULT_CAP,
                            prob_tol: float = 1e-12) -> list[SmoothingRow]:
    """Check both deviation-smoothing inequalities exactly by enumeration.

    For each ``eps``::

        P(d(X_1..m, H) >= eps) <= P(d(X_1..k, H) >= eps - 2k/(m-k+1) - t_k)
        P(d(X_1..m, H) <= eps) <= P(d(X_1..k, H) <= m/(m-k+1) eps + 2k/(m-k+1))

    where ``t_k`` is the weight of words of length ``k+1..depth`` (the
    truncated statistic has no longer words).  Event membership is decided
    exactly; probabilities are correctly rounded sums of the model's word
    probabilities, compared with slack ``prob_tol``.
    """
    if not m > 2 * k > 1:
        raise DomainError(f"need m > 2k > 1, got m={m}, k={k}")
    a = model.alphabet
    if family.alphabet != a:
        raise DomainError("model and family use different alphabets")
    _check_cap(m, a, cap)
    t_k = exact_tail_weight(k, a) - exact_tail_weight(depth, a) if depth > k else Fraction(0)
    gap = Fraction(2 * k, m - k + 1)
    sides = {}
    for length in (m, k):
        samples = all_samples(length, a)
        stats = family_statistics(samples, family, depth)
        sides[length] = (_ExactComparator(samples, stats, family, depth), model.marginals(length))

    def prob(length, mask):
        return math.fsum(sides[length][1][mask].tolist())

    rows = []
    for eps in epsilons:
        eps = eps if isinstance(eps, Fraction) else Fraction(eps).limit_denominator(10**9)
        cm, _ = sides[m]
        ck, _ = sides[k]
        thr2 = eps - gap - t_k
        lhs, rhs = prob(m, cm.ge(eps)), prob(k, ck.ge(thr2))
        rows.append(SmoothingRow(float(eps), "deviation", lhs, rhs, float(thr2), lhs <= rhs + prob_tol))
        thr3 = Fraction(m, m - k + 1) * eps + gap
        lhs, rhs = prob(m, cm.le(eps)), prob(k, ck.le(thr3))
        rows.append(SmoothingRow(float(eps), "concentration", lhs, rhs, float(thr3), lhs <= rhs + prob_tol))
    return rows


def epsilon_grid(step: Fraction | float, stop: float = 1.0) -> list[Fraction]:
    step = Fraction(step).limit_denominator(10**9)
    count = int(Fraction(stop).limit_denominator(10**9) / step)
    return [step * j for j in range(1, count + 1)]
