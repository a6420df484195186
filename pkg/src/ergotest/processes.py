"""Stationary process models with exact finite-dimensional marginals.

Every model exposes

* ``marginal(word)``: probability that a path starts with ``word``;
* ``marginals(length)``: the same for all words of one length, indexed by rank;
* ``sample_path(n, seed)``: a stationary draw, deterministic in ``seed``.

Samplers always start from the invariant law, never from a fixed state.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from typing import Sequence

import numpy as np

from . import _kernels
from ._seeds import derive_seed, rng
from .errors import AlphabetError, DomainError, NonUniqueStationaryError, SpecError, StochasticMatrixError
from .stats import symbol_dtype
from .symbolics import word_code

STOCHASTIC_TOL = 1e-9
GOLDEN_ANGLE = (math.sqrt(5.0) - 1.0) / 2.0


def check_stochastic(matrix, name: str = "matrix") -> np.ndarray:
    m = np.array(matrix, dtype=float, ndmin=2)
    if m.ndim != 2:
        raise StochasticMatrixError(f"{name} must be two-dimensional")
    if not np.all(np.isfinite(m)) or np.any(m < 0):
        raise StochasticMatrixError(f"{name} has negative or non-finite entries")
    sums = m.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > STOCHASTIC_TOL):
        bad = int(np.argmax(np.abs(sums - 1.0)))
        raise StochasticMatrixError(f"row {bad} of {name} sums to {sums[bad]!r}, not 1")
    return m / sums[:, None]


def stationary_distribution(transition) -> tuple[np.ndarray, bool]:
    """Invariant law of a row-stochastic matrix.

    Returns ``(pi, unique)``.  When the invariant law is not unique
    (several closed classes) ``pi`` is still a valid invariant law.
    """
    p = check_stochastic(transition, "transition")
    c = p.shape[0]
    if p.shape[1] != c:
        raise StochasticMatrixError("transition matrix must be square")
    a = p.T - np.eye(c)
    unique = np.linalg.matrix_rank(a, tol=1e-10) == c - 1
    pi = None
    if unique:
        a_sys = a.copy()
        a_sys[-1, :] = 1.0
        rhs = np.zeros(c)
        rhs[-1] = 1.0
        try:
            pi = np.linalg.solve(a_sys, rhs)
        except np.linalg.LinAlgError:
            pi = None
    if pi is None:
        # min-norm point of the affine set of invariant laws; it is a positive
        # combination of the closed-class laws
        a_sys = np.vstack([a, np.ones((1, c))])
        rhs = np.zeros(c + 1)
        rhs[-1] = 1.0
        pi = np.linalg.lstsq(a_sys, rhs, rcond=None)[0]
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    return pi, bool(unique)


def _validate_word(word: Sequence[int], alphabet: int) -> tuple[int, int]:
    return word_code(word, alphabet)


class ProcessModel(ABC):
    """A stationary process over the alphabet ``{0, ..., alphabet - 1}``."""

    alphabet: int
    ergodic: bool = True

    @abstractmethod
    def marginal(self, word: Sequence[int]) -> float:
        ...

    @abstractmethod
    def marginals(self, length: int) -> np.ndarray:
        ...

    def marginal_tables(self, max_length: int) -> list[np.ndarray]:
        return [self.marginals(length) for length in range(1, max_length + 1)]

    @abstractmethod
    def _sample(self, n: int, gen: np.random.Generator) -> np.ndarray:
        ...

    def sample_path(self, n: int, seed: int) -> np.ndarray:
        if n < 0:
            raise ValueError("n must be >= 0")
        return self._sample(int(n), rng(seed))

    def sample_paths(self, n: int, count: int, seed: int) -> np.ndarray:
        """``count`` independent paths; row ``i`` uses ``derive_seed(seed, "path", i)``."""
        out = np.empty((count, n), dtype=symbol_dtype(self.alphabet))
        for i in range(count):
            out[i] = self.sample_path(n, derive_seed(seed, "path", i))
        return out

    @abstractmethod
    def to_spec(self) -> dict:
        ...

    def __eq__(self, other):
        return type(self) is type(other) and self.to_spec() == other.to_spec()

    def __hash__(self):
        return hash(repr(self.to_spec()))


def _cumulative(rows: np.ndarray) -> np.ndarray:
    cum = np.cumsum(rows, axis=-1)
    cum[..., -1] = 1.0
    return cum


class IIDModel(ProcessModel):
    def __init__(self, p):
        self.p = check_stochastic(np.atleast_1d(np.asarray(p, dtype=float))[None, :], "p")[0]
        self.alphabet = self.p.size
        self._cum = _cumulative(self.p)

    @classmethod
    def bernoulli(cls, p1: float) -> "IIDModel":
        """Binary i.i.d. law with ``P(1) = p1``."""
        return cls([1.0 - p1, p1])

    def marginal(self, word):
        _validate_word(word, self.alphabet)
        return float(np.prod(self.p[list(word)]))

    def marginals(self, length):
        out = np.ones(1)
        for _ in range(length):
            out = np.outer(out, self.p).ravel()
        return out

    def _sample(self, n, gen):
        return np.searchsorted(self._cum, gen.random(n), side="right").astype(
            symbol_dtype(self.alphabet)
        )

    def to_spec(self):
        return {"kind": "iid", "p": self.p.tolist()}

    def __repr__(self):
        return f"IIDModel(p={np.round(self.p, 6).tolist()})"


def markov_marginal_tables(trans: np.ndarray, context_law: np.ndarray, order: int,
                           alphabet: int, max_length: int) -> list[np.ndarray]:
    """Word probabilities of (a batch of) order-``k`` chains.

    ``trans`` has shape ``(..., a**k, a)`` and ``context_law`` ``(..., a**k)``;
    returns per-length arrays of shape ``(..., a**l)``.
    """
    a = alphabet
    n_ctx = a**order
    batch = trans.shape[:-2]
    tables = []
    for length in range(1, min(order, max_length) + 1):
        tables.append(context_law.reshape(batch + (a**length, a ** (order - length))).sum(-1))
    cur = context_law
    ctx_of_word = np.arange(n_ctx)
    for length in range(order + 1, max_length + 1):
        # word of length l-1 (rank r) extended by one symbol; its context is r mod a**k
        cur = (cur[..., :, None] * trans[..., ctx_of_word % n_ctx, :]).reshape(batch + (-1,))
        ctx_of_word = np.arange(a**length)
        tables.append(cur)
    return tables


class MarkovModel(ProcessModel):
    """Order-``k`` chain; ``transitions[context_rank, symbol]`` is P(symbol | context).

    With ``initial=None`` the chain starts from the invariant law of the
    induced ``k``-gram chain, which must then be unique.
    """

    def __init__(self, order: int, transitions, initial=None, alphabet: int | None = None):
        if order < 0:
            raise SpecError("Markov order must be >= 0")
        p = check_stochastic(transitions, "transitions")
        a = p.shape[1] if alphabet is None else alphabet
        if p.shape != (a**order, a):
            raise SpecError(f"order-{order} transitions over {a} symbols need shape {(a**order, a)}, got {p.shape}")
        self.order = order
        self.alphabet = a
        self.transitions = p
        n_ctx = a**order
        q = np.zeros((n_ctx, n_ctx))
        for c in range(n_ctx):
            for s in range(a):
                q[c, (c * a + s) % n_ctx] += p[c, s]
        self.context_chain = q
        if initial is None:
            pi, unique = stationary_distribution(q)
            if not unique:
                raise NonUniqueStationaryError(
                    "chain has several invariant laws; pass an explicit initial law"
                )
            self.explicit_initial = False
        else:
            pi = check_stochastic(np.asarray(initial, dtype=float)[None, :], "initial")[0]
            if pi.size != n_ctx:
                raise SpecError(f"initial law needs {n_ctx} entries")
            if np.max(np.abs(pi @ q - pi)) > 1e-9:
                raise SpecError("initial law is not invariant under the chain")
            unique = stationary_distribution(q)[1]
            self.explicit_initial = True
        self.context_law = pi
        self.unique_law = unique
        self.ergodic = unique
        self._cum = _cumulative(p)

    @classmethod
    def binary(cls, p1_given_0: float, p1_given_1: float) -> "MarkovModel":
        return cls(1, [[1 - p1_given_0, p1_given_0], [1 - p1_given_1, p1_given_1]])

    @classmethod
    def constant(cls, symbol: int, alphabet: int = 2) -> "MarkovModel":
        """Deterministic chain emitting only ``symbol``."""
        rows = np.zeros((alphabet, alphabet))
        rows[:, symbol] = 1.0
        return cls(1, rows)

    @classmethod
    def flip(cls) -> "MarkovModel":
        """Binary chain alternating 0101... from a uniform start."""
        return cls(1, [[0.0, 1.0], [1.0, 0.0]])

    def marginal(self, word):
        length, rank = _validate_word(word, self.alphabet)
        a, k = self.alphabet, self.order
        if length <= k:
            block = self.context_law.reshape(a**length, a ** (k - length))
            return float(block[rank].sum())
        ctx = 0
        for s in word[:k]:
            ctx = ctx * a + int(s)
        prob = self.context_law[ctx]
        n_ctx = a**k
        for s in word[k:]:
            prob *= self.transitions[ctx, int(s)]
            ctx = (ctx * a + int(s)) % n_ctx if n_ctx > 1 else 0
        return float(prob)

    def marginals(self, length):
        return self.marginal_tables(length)[-1]

    def marginal_tables(self, max_length):
        return markov_marginal_tables(self.transitions, self.context_law, self.order,
                                      self.alphabet, max_length)

    def _sample(self, n, gen):
        a, k = self.alphabet, self.order
        out = np.zeros(n, dtype=symbol_dtype(a))
        u0 = gen.random()
        u = gen.random(n)
        ctx = int(np.searchsorted(_cumulative(self.context_law), u0, side="right"))
        digits = []
        c = ctx
        for _ in range(k):
            c, d = divmod(c, a)
            digits.append(d)
        digits.reverse()
        head = min(k, n)
        out[:head] = digits[:head]
        if n > k:
            _kernels.markov_fill(out, k, ctx, self._cum, u, a, a**k)
        return out

    def to_spec(self):
        spec = {"kind": "markov", "order": self.order, "alphabet": self.alphabet,
                "transitions": self.transitions.tolist()}
        if self.explicit_initial:
            spec["initial"] = self.context_law.tolist()
        return spec

    def __repr__(self):
        return f"MarkovModel(order={self.order}, transitions={np.round(self.transitions, 6).tolist()})"


class HMMModel(ProcessModel):
    """Hidden Markov process: hidden chain ``transition``, emissions ``emission[state, symbol]``."""

    def __init__(self, transition, emission, initial=None):
        t = check_stochastic(transition, "transition")
        e = check_stochastic(emission, "emission")
        if t.shape[0] != t.shape[1] or e.shape[0] != t.shape[0]:
            raise SpecError("transition must be m x m and emission m x |A|")
        self.transition = t
        self.emission = e
        self.alphabet = e.shape[1]
        self.states = t.shape[0]
        if initial is None:
            pi, unique = stationary_distribution(t)
            if not unique:
                raise NonUniqueStationaryError(
                    "hidden chain has several invariant laws; pass an explicit initial law"
                )
            self.explicit_initial = False
        else:
            pi = check_stochastic(np.asarray(initial, dtype=float)[None, :], "initial")[0]
            if pi.size != self.states or np.max(np.abs(pi @ t - pi)) > 1e-9:
                raise SpecError("initial law must be an invariant law of the hidden chain")
            unique = stationary_distribution(t)[1]
            self.explicit_initial = True
        self.initial = pi
        self.unique_law = unique
        self._cum_t = _cumulative(t)
        self._cum_e = _cumulative(e)

    def marginal(self, word):
        _validate_word(word, self.alphabet)
        f = self.initial * self.emission[:, int(word[0])]
        log_scale = 0.0
        for s in word[1:]:
            z = f.sum()
            if z == 0.0:
                return 0.0
            log_scale += math.log(z)
            f = (f / z) @ self.transition * self.emission[:, int(s)]
        z = f.sum()
        if z == 0.0:
            return 0.0
        return math.exp(log_scale + math.log(z))

    def marginal_tables(self, max_length):
        tables = []
        f = self.initial[None, :] * self.emission.T  # (a, m)
        for length in range(1, max_length + 1):
            if length > 1:
                f = ((f @ self.transition)[:, None, :] * self.emission.T[None, :, :]).reshape(-1, self.states)
            tables.append(f.sum(axis=1))
        return tables

    def marginals(self, length):
        return self.marginal_tables(length)[-1]

    def _sample(self, n, gen):
        out = np.zeros(n, dtype=symbol_dtype(self.alphabet))
        u0 = gen.random()
        u_emit = gen.random(n)
        u_move = gen.random(n)
        state = int(np.searchsorted(_cumulative(self.initial), u0, side="right"))
        _kernels.hmm_fill(out, state, self._cum_t, self._cum_e, u_emit, u_move)
        return out

    def to_spec(self):
        spec = {"kind": "hmm", "transition": self.transition.tolist(),
                "emission": self.emission.tolist()}
        if self.explicit_initial:
            spec["initial"] = self.initial.tolist()
        return spec

    def __repr__(self):
        return (f"HMMModel(transition={np.round(self.transition, 6).tolist()}, "
                f"emission={np.round(self.emission, 6).tolist()})")


class MixtureModel(ProcessModel):
    """Finite mixture of stationary processes.

    A path picks one component (with probability ``weights[i]``) and then
    follows it forever, so the mixture is stationary but not ergodic.
    """

    ergodic = False

    def __init__(self, weights, components: Sequence[ProcessModel]):
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or w.size != len(components) or w.size == 0:
            raise SpecError("mixture needs one weight per component")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > STOCHASTIC_TOL:
            raise SpecError("mixture weights must be positive and sum to 1")
        alphabets = {c.alphabet for c in components}
        if len(alphabets) != 1:
            raise AlphabetError("mixture components use different alphabets")
        self.weights = w / w.sum()
        self.components = list(components)
        self.alphabet = alphabets.pop()
        self._cum = _cumulative(self.weights)

    def marginal(self, word):
        return float(sum(w * c.marginal(word) for w, c in zip(self.weights, self.components)))

    def marginals(self, length):
        return sum(w * c.marginals(length) for w, c in zip(self.weights, self.components))

    def marginal_tables(self, max_length):
        tables = None
        for w, c in zip(self.weights, self.components):
            ct = c.marginal_tables(max_length)
            tables = [w * t for t in ct] if tables is None else [x + w * t for x, t in zip(tables, ct)]
        return tables

    def _sample(self, n, gen):
        i = int(np.searchsorted(self._cum, gen.random(), side="right"))
        return self.components[i]._sample(n, gen)

    def to_spec(self):
        return {"kind": "mixture", "weights": self.weights.tolist(),
                "components": [c.to_spec() for c in self.components]}

    def __repr__(self):
        return f"MixtureModel(weights={self.weights.tolist()}, components={self.components!r})"


class RotationModel(ProcessModel):
    """Binary coding of an irrational circle rotation.

    The phase ``phi`` is uniform on [0, 1); ``X_t = 0`` when
    ``phi + (t - 1) * angle (mod 1)`` lies in ``[0, arc)`` and 1 otherwise.
    Stationary and ergodic (uniquely ergodic for irrational angles), but not
    Markov of any order.
    """

    alphabet = 2

    def __init__(self, angle: float = GOLDEN_ANGLE, arc: float = 0.5):
        if not 0.0 < angle < 1.0:
            raise SpecError("rotation angle must lie in (0, 1)")
        if not 0.0 < arc < 1.0:
            raise SpecError("arc length must lie in (0, 1)")
        self.angle = float(angle)
        self.arc = float(arc)

    def _cells(self, length: int):
        """Partition of the circle into arcs on which the length-``length``
        pattern is constant: returns (cell lengths, pattern ranks)."""
        t = np.arange(length)
        shifts = np.mod(-t * self.angle, 1.0)
        pts = np.concatenate([shifts, np.mod(self.arc + shifts, 1.0), [0.0, 1.0]])
        pts = np.unique(pts)
        widths = np.diff(pts)
        keep = widths > 0
        mids = (pts[:-1] + pts[1:])[keep] / 2.0
        widths = widths[keep]
        bits = (np.mod(mids[:, None] + t[None, :] * self.angle, 1.0) >= self.arc).astype(np.int64)
        ranks = bits @ (2 ** (length - 1 - t))
        return widths, ranks

    def marginal(self, word):
        length, rank = _validate_word(word, 2)
        widths, ranks = self._cells(length)
        return float(math.fsum(widths[ranks == rank]))

    def marginals(self, length):
        widths, ranks = self._cells(length)
        return np.bincount(ranks, weights=widths, minlength=2**length)

    def marginal_tables(self, max_length):
        top = self.marginals(max_length)
        tables = [top]
        for length in range(max_length - 1, 0, -1):
            tables.append(tables[-1].reshape(-1, 2).sum(axis=1))
        return tables[::-1]

    def _sample(self, n, gen):
        phi = gen.random()
        x = np.mod(phi + self.angle * np.arange(n), 1.0) >= self.arc
        return x.astype(np.uint8)

    def to_spec(self):
        return {"kind": "rotation", "angle": self.angle, "arc": self.arc}

    def __repr__(self):
        return f"RotationModel(angle={self.angle!r}, arc={self.arc!r})"


def ergodic_components(model: ProcessModel) -> list[tuple[float, ProcessModel]]:
    """Flatten (nested) finite mixtures into ``(weight, component)`` pairs."""
    if not isinstance(model, MixtureModel):
        return [(1.0, model)]
    out = []
    for w, c in zip(model.weights, model.components):
        out.extend((float(w) * cw, cm) for cw, cm in ergodic_components(c))
    return out


def model_from_spec(spec: dict) -> ProcessModel:
    """Build a model from its JSON description (see README for the schema)."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise SpecError("model spec must be an object with a 'kind' field")
    kind = spec["kind"]
    try:
        if kind == "iid":
            return IIDModel(spec["p"])
        if kind == "markov":
            trans = np.asarray(spec["transitions"], dtype=float)
            return MarkovModel(int(spec["order"]), trans, spec.get("initial"),
                               alphabet=spec.get("alphabet"))
        if kind == "hmm":
            return HMMModel(spec["transition"], spec["emission"], spec.get("initial"))
        if kind == "mixture":
            return MixtureModel(spec["weights"], [model_from_spec(c) for c in spec["components"]])
        if kind == "rotation":
            return RotationModel(spec.get("angle", GOLDEN_ANGLE), spec.get("arc", 0.5))
    except DomainError:
        raise
    except KeyError as exc:
        raise SpecError(f"{kind} model spec lacks field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise SpecError(f"invalid {kind} model spec: {exc}") from None
    raise SpecError(f"unknown model kind {kind!r}")
