"""Hypothesis families and the member designs used to calibrate thresholds.

A family is a set of stationary ergodic processes.  Enumerable families
(a single process, a finite set) list their members; parametric families
(Markov of order at most k, hidden Markov with at most k states) carry the
configuration of the projection that realizes the statistic ``inf_rho d(X, rho)``
so that calibration and testing always compute the same statistic.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ._seeds import derive_seed, rng
from .errors import AlphabetError, DesignError, NonUniqueStationaryError, SpecError
from .processes import HMMModel, MarkovModel, MixtureModel, ProcessModel, model_from_spec


@dataclass(frozen=True)
class RefineConfig:
    """Coordinate-wise golden-section polish of a plug-in projection."""

    enabled: bool = False
    width: float = 0.05
    tol: float = 1e-6
    sweeps: int = 2


@dataclass(frozen=True)
class EMConfig:
    restarts: int = 20
    max_iter: int = 200
    tol: float = 1e-8
    seed: int = 0
    polish: bool = False


class HypothesisFamily:
    kind: str
    alphabet: int

    def to_spec(self) -> dict:
        raise NotImplementedError

    @property
    def enumerable(self) -> bool:
        return False

    def __eq__(self, other):
        return isinstance(other, HypothesisFamily) and self.to_spec() == other.to_spec()

    def __hash__(self):
        return hash(repr(self.to_spec()))

    def __repr__(self):
        return f"{type(self).__name__}({self.to_spec()!r})"


def _check_member(model: ProcessModel, alphabet: int | None) -> None:
    if isinstance(model, MixtureModel) and len(model.components) > 1:
        raise SpecError("family members must be ergodic; got a mixture")
    if not model.ergodic:
        raise SpecError(f"family member {model!r} is not ergodic")
    if alphabet is not None and model.alphabet != alphabet:
        raise AlphabetError("family members must share one alphabet")


class Singleton(HypothesisFamily):
    kind = "singleton"

    def __init__(self, model: ProcessModel):
        _check_member(model, None)
        self.model = model
        self.alphabet = model.alphabet

    @property
    def members(self) -> list[ProcessModel]:
        return [self.model]

    @property
    def enumerable(self):
        return True

    def to_spec(self):
        return {"kind": "singleton", "model": self.model.to_spec()}


class FiniteSet(HypothesisFamily):
    kind = "finite"

    def __init__(self, models: Sequence[ProcessModel]):
        if not models:
            raise SpecError("a finite family needs at least one member")
        for m in models:
            _check_member(m, models[0].alphabet)
        self.models = list(models)
        self.alphabet = models[0].alphabet

    @property
    def members(self) -> list[ProcessModel]:
        return list(self.models)

    @property
    def enumerable(self):
        return True

    def to_spec(self):
        return {"kind": "finite", "models": [m.to_spec() for m in self.models]}


class MarkovOrder(HypothesisFamily):
    """Stationary ergodic chains of order at most ``order``."""

    kind = "markov"

    def __init__(self, order: int, alphabet: int = 2, refine: RefineConfig = RefineConfig()):
        if order < 0:
            raise SpecError("order must be >= 0")
        self.order = order
        self.alphabet = alphabet
        self.refine = refine

    def to_spec(self):
        return {"kind": "markov", "order": self.order, "alphabet": self.alphabet,
                "refine": asdict(self.refine)}


class HMMOrder(HypothesisFamily):
    """Hidden Markov processes with at most ``states`` hidden states."""

    kind = "hmm"

    def __init__(self, states: int, alphabet: int = 2, em: EMConfig = EMConfig()):
        if states < 1:
            raise SpecError("states must be >= 1")
        self.states = states
        self.alphabet = alphabet
        self.em = em

    def to_spec(self):
        return {"kind": "hmm", "states": self.states, "alphabet": self.alphabet,
                "em": asdict(self.em)}


def family_from_spec(spec: dict) -> HypothesisFamily:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise SpecError("family spec must be an object with a 'kind' field")
    kind = spec["kind"]
    try:
        if kind == "singleton":
            return Singleton(model_from_spec(spec["model"]))
        if kind == "finite":
            return FiniteSet([model_from_spec(m) for m in spec["models"]])
        if kind == "markov":
            return MarkovOrder(int(spec["order"]), int(spec.get("alphabet", 2)),
                               RefineConfig(**spec.get("refine", {})))
        if kind == "hmm":
            return HMMOrder(int(spec["states"]), int(spec.get("alphabet", 2)),
                            EMConfig(**spec.get("em", {})))
    except KeyError as exc:
        raise SpecError(f"{kind} family spec lacks field {exc.args[0]!r}") from None
    except TypeError as exc:
        raise SpecError(f"invalid {kind} family spec: {exc}") from None
    raise SpecError(f"unknown family kind {kind!r}")


# -- member designs -----------------------------------------------------------


@dataclass(frozen=True)
class MemberDesign:
    """Which members of a parametric family the calibration visits.

    ``grid_step`` spaces a grid over each probability row (``None`` for no
    grid), ``random`` adds that many random members, and every generated
    probability is kept inside ``[margin, 1 - margin]``.
    """

    grid_step: float | None = None
    random: int = 0
    seed: int = 0
    margin: float = 0.01
    cap: int = 10_000

    def __post_init__(self):
        if self.random < 0:
            raise DesignError("random member count must be >= 0")
        if not 0.0 <= self.margin < 0.5:
            raise DesignError("margin must lie in [0, 0.5)")
        if self.grid_step is not None and not 0.0 < self.grid_step <= 1.0:
            raise DesignError("grid_step must lie in (0, 1]")

    def to_spec(self) -> dict:
        return asdict(self)


def design_from_spec(spec: dict | None) -> MemberDesign:
    try:
        return MemberDesign(**(spec or {}))
    except TypeError as exc:
        raise SpecError(f"invalid design spec: {exc}") from None


def clamp_rows(rows: np.ndarray, margin: float) -> np.ndarray:
    """Keep every entry of each probability row inside ``[margin, 1 - margin]``."""
    rows = np.asarray(rows, dtype=float)
    if margin == 0.0:
        return rows
    a = rows.shape[-1]
    clipped = np.clip(rows, margin, 1.0 - margin)
    ok = np.abs(clipped.sum(axis=-1) - 1.0) < 1e-12
    # when clipping breaks normalization, shrink towards uniform instead
    shrunk = margin + (1.0 - a * margin) * rows
    return np.where(ok[..., None], clipped, shrunk)


def simplex_grid(alphabet: int, step: float) -> np.ndarray:
    """All probability vectors with coordinates on multiples of ``step``."""
    k = round(1.0 / step)
    if abs(k * step - 1.0) > 1e-9:
        raise DesignError(f"grid_step {step} does not divide 1")
    pts = [c for c in itertools.product(range(k + 1), repeat=alphabet - 1) if sum(c) <= k]
    return np.array([[(k - sum(c)) / k, *(ci / k for ci in c)] for c in pts])


def _grid_count(n_row_points: int, n_rows: int) -> int:
    return n_row_points**n_rows


def member_design(family: HypothesisFamily, design: MemberDesign = MemberDesign()) -> list[ProcessModel]:
    """Members over which the calibration infimum is approximated.

    Enumerable families return their members.  Parametric families return a
    clamped grid (if ``design.grid_step``) followed by ``design.random``
    random members; members whose invariant law is not unique (possible
    only with ``margin == 0``) are skipped as non-ergodic.
    """
    if family.enumerable:
        return family.members
    if isinstance(family, MarkovOrder):
        members = _markov_members(family, design)
    elif isinstance(family, HMMOrder):
        members = _hmm_members(family, design)
    else:
        raise DesignError(f"no member design for family {family!r}")
    if not members:
        raise DesignError("member design is empty")
    return members


def _markov_members(family: MarkovOrder, design: MemberDesign) -> list[ProcessModel]:
    a, k = family.alphabet, family.order
    n_ctx = a**k
    rows_list = []
    if design.grid_step is not None:
        grid = simplex_grid(a, design.grid_step)
        count = _grid_count(len(grid), n_ctx)
        if count + design.random > design.cap:
            raise DesignError(f"design has {count + design.random} members, above cap {design.cap}")
        for idx in itertools.product(range(len(grid)), repeat=n_ctx):
            rows_list.append(grid[list(idx)])
    elif design.random > design.cap:
        raise DesignError(f"design has {design.random} members, above cap {design.cap}")
    for i in range(design.random):
        g = rng(derive_seed(design.seed, "markov-member", i))
        rows_list.append(g.dirichlet(np.ones(a), size=n_ctx))
    out = []
    for rows in rows_list:
        try:
            out.append(MarkovModel(k, clamp_rows(rows, design.margin), alphabet=a))
        except NonUniqueStationaryError:
            continue
    return out


def _hmm_members(family: HMMOrder, design: MemberDesign) -> list[ProcessModel]:
    a, s = family.alphabet, family.states
    pairs = []
    if design.grid_step is not None:
        # corners only: each state emits (nearly) one symbol, uniform hidden moves
        count = a**s
        if count + design.random > design.cap:
            raise DesignError(f"design has {count + design.random} members, above cap {design.cap}")
        for corner in itertools.product(range(a), repeat=s):
            emit = np.eye(a)[list(corner)]
            pairs.append((np.full((s, s), 1.0 / s), emit))
    elif design.random > design.cap:
        raise DesignError(f"design has {design.random} members, above cap {design.cap}")
    for i in range(design.random):
        g = rng(derive_seed(design.seed, "hmm-member", i))
        pairs.append((g.dirichlet(np.ones(s), size=s), g.dirichlet(np.ones(a), size=s)))
    out = []
    for trans, emit in pairs:
        try:
            out.append(HMMModel(clamp_rows(trans, design.margin), clamp_rows(emit, design.margin)))
        except NonUniqueStationaryError:
            continue
    return out
