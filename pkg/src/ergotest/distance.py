"""Empirical and exact distributional distances, and projections onto families.

All distances are truncated at word length ``depth``: the value is the
partial sum over words of length ``<= depth`` and ``tail_bound`` bounds the
omitted remainder.  Single-sample entry points run through the same batched
code as calibration, so a sample gets bit-identical statistics either way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from ._seeds import derive_seed, rng
from .errors import AlphabetError, DomainError
from .hypotheses import (EMConfig, FiniteSet, HMMOrder, HypothesisFamily, MarkovOrder,
                         RefineConfig, Singleton)
from .processes import (HMMModel, MarkovModel, ProcessModel, markov_marginal_tables,
                        stationary_distribution)
from .stats import as_sample, batch_counts
from .symbolics import weight_scheme

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
#: Rows processed per chunk in batched statistics (bounds memory use).
CHUNK = 256


@dataclass(frozen=True)
class TruncatedDistance:
    value: float
    tail_bound: float
    depth: int

    @property
    def upper(self) -> float:
        """Upper end of the interval holding the untruncated distance."""
        return self.value + self.tail_bound

    def __float__(self):
        return float(self.value)


@dataclass
class ProjectionResult:
    distance: TruncatedDistance
    witness: ProcessModel
    diagnostics: dict = field(default_factory=dict)


# -- weighted l1 core ---------------------------------------------------------


def _frequencies(counts: list[np.ndarray], n: int) -> list[np.ndarray]:
    out = []
    for length, c in enumerate(counts, start=1):
        w = n - length + 1
        out.append(c / w if w > 0 else np.zeros(c.shape))
    return out


def weighted_l1(freqs: Sequence[np.ndarray], tables: Sequence[np.ndarray], alphabet: int) -> np.ndarray:
    """``sum_l sum_B w_B |freqs[l](B) - tables[l](B)|`` along the last axis."""
    scheme = weight_scheme(alphabet, len(freqs))
    total = 0.0
    for length, (f, t) in enumerate(zip(freqs, tables), start=1):
        total = total + (np.abs(f - t) * scheme.weights(length)).sum(axis=-1)
    return total


def _check_alphabet(*alphabets: int) -> int:
    if len(set(alphabets)) != 1:
        raise AlphabetError(f"alphabets differ: {sorted(set(alphabets))}")
    return alphabets[0]


def _batch(samples, alphabet: int) -> np.ndarray:
    samples = np.asarray(samples)
    if samples.ndim == 1:
        samples = as_sample(samples, alphabet)[None, :]
    if samples.size and samples.max() >= alphabet:
        raise AlphabetError(f"symbol {int(samples.max())} outside alphabet of size {alphabet}")
    return samples


def _truncated(value: float, alphabet: int, depth: int) -> TruncatedDistance:
    return TruncatedDistance(float(value), weight_scheme(alphabet, depth).tail, depth)


def empirical_distance(x, model: ProcessModel, depth: int) -> TruncatedDistance:
    """Weighted l1 gap between the word frequencies of ``x`` and the
    marginals of ``model`` over all words of length ``<= depth``."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    x = _batch(as_sample(x, model.alphabet), model.alphabet)
    value = batch_empirical_distance(x, model, depth)[0]
    return _truncated(value, model.alphabet, depth)


def batch_empirical_distance(samples: np.ndarray, model: ProcessModel, depth: int) -> np.ndarray:
    samples = _batch(samples, model.alphabet)
    tables = model.marginal_tables(depth)
    out = np.empty(samples.shape[0])
    for lo in range(0, samples.shape[0], CHUNK):
        chunk = samples[lo:lo + CHUNK]
        freqs = _frequencies(batch_counts(chunk, depth, model.alphabet), samples.shape[1])
        out[lo:lo + CHUNK] = weighted_l1(freqs, tables, model.alphabet)
    return out


def exact_distance(m1: ProcessModel, m2: ProcessModel, depth: int) -> TruncatedDistance:
    a = _check_alphabet(m1.alphabet, m2.alphabet)
    if depth < 1:
        raise ValueError("depth must be >= 1")
    value = weighted_l1(m1.marginal_tables(depth), m2.marginal_tables(depth), a)
    return _truncated(value, a, depth)


# -- Markov projection --------------------------------------------------------


def _context_laws(trans: np.ndarray, order: int, a: int) -> np.ndarray:
    """Invariant laws of the k-gram chains of a batch ``(R, a**k, a)``."""
    r = trans.shape[0]
    n_ctx = a**order
    if order == 0:
        return np.ones((r, 1))
    q = np.zeros((r, n_ctx, n_ctx))
    ctx = np.repeat(np.arange(n_ctx), a)
    nxt = (ctx * a + np.tile(np.arange(a), n_ctx)) % n_ctx
    q[:, ctx, nxt] = trans.reshape(r, -1)
    sys = np.transpose(q, (0, 2, 1)) - np.eye(n_ctx)
    sys[:, -1, :] = 1.0
    rhs = np.zeros((r, n_ctx, 1))
    rhs[:, -1, 0] = 1.0
    try:
        with np.errstate(all="ignore"):
            law = np.linalg.solve(sys, rhs)[..., 0]
        bad = ~np.all(np.isfinite(law), axis=1) | np.any(law < -1e-9, axis=1)
    except np.linalg.LinAlgError:
        law = np.zeros((r, n_ctx))
        bad = np.ones(r, dtype=bool)
    for i in np.flatnonzero(bad):
        law[i] = stationary_distribution(q[i])[0]
    law = np.clip(law, 0.0, None)
    return law / law.sum(axis=1, keepdims=True)


def _markov_objective(trans, freqs, order, a, depth):
    law = _context_laws(trans, order, a)
    return weighted_l1(freqs, markov_marginal_tables(trans, law, order, a, depth), a)


def _set_coordinate(trans: np.ndarray, ctx: int, j: int, t: np.ndarray) -> np.ndarray:
    """Copy of ``trans`` with ``P(j | ctx) = t``, the rest of the row rescaled."""
    out = trans.copy()
    row = out[:, ctx, :]
    rest = 1.0 - row[:, j]
    a = row.shape[1]
    with np.errstate(all="ignore"):
        scale = np.where(rest > 0, (1.0 - t) / rest, 0.0)
    new = row * scale[:, None]
    flat = rest <= 0
    if np.any(flat):
        new[flat] = ((1.0 - t[flat]) / (a - 1))[:, None]
    new[:, j] = t
    out[:, ctx, :] = new
    return out


def _golden_refine(trans, best, freqs, order, a, depth, cfg: RefineConfig):
    """Coordinate-wise golden-section search, run in lockstep over the batch.

    Each row only accepts moves that lower its own objective.
    """
    n_ctx = a**order
    span = 2.0 * cfg.width
    n_iter = max(1, math.ceil(math.log(cfg.tol / span) / math.log(GOLDEN)))
    coords = [(c, j) for c in range(n_ctx) for j in (range(1, a) if a == 2 else range(a))]
    for _ in range(cfg.sweeps):
        for ctx, j in coords:
            cur = trans[:, ctx, j]
            lo = np.clip(cur - cfg.width, 0.0, 1.0)
            hi = np.clip(cur + cfg.width, 0.0, 1.0)
            x1 = hi - GOLDEN * (hi - lo)
            x2 = lo + GOLDEN * (hi - lo)
            f1 = _markov_objective(_set_coordinate(trans, ctx, j, x1), freqs, order, a, depth)
            f2 = _markov_objective(_set_coordinate(trans, ctx, j, x2), freqs, order, a, depth)
            for _ in range(n_iter):
                left = f1 <= f2
                hi = np.where(left, x2, hi)
                lo = np.where(left, lo, x1)
                new_x = np.where(left, hi - GOLDEN * (hi - lo), lo + GOLDEN * (hi - lo))
                f_new = _markov_objective(_set_coordinate(trans, ctx, j, new_x), freqs, order, a, depth)
                x2, f2, x1, f1 = (np.where(left, x1, new_x), np.where(left, f1, f_new),
                                  np.where(left, new_x, x2), np.where(left, f_new, f2))
            x_best = np.where(f1 <= f2, x1, x2)
            f_best = np.minimum(f1, f2)
            better = f_best < best
            if np.any(better):
                trans = np.where(better[:, None, None], _set_coordinate(trans, ctx, j, x_best), trans)
                best = np.where(better, f_best, best)
    return trans, best


def markov_plug_in(counts_next: np.ndarray, order: int, a: int) -> tuple[np.ndarray, np.ndarray]:
    """Plug-in transitions from (k+1)-gram counts of shape ``(R, a**(k+1))``.

    Returns ``(trans, unseen)`` where ``unseen[r, c]`` marks contexts that
    never occur with a successor; their rows are uniform.
    """
    r = counts_next.shape[0]
    c = counts_next.reshape(r, a**order, a).astype(float)
    totals = c.sum(axis=2)
    unseen = totals == 0
    with np.errstate(all="ignore"):
        trans = np.where(unseen[..., None], 1.0 / a, c / totals[..., None])
    return trans, unseen


def batch_project_markov(samples: np.ndarray, order: int, alphabet: int, depth: int,
                         refine: RefineConfig = RefineConfig()):
    """Batched projection onto order-``order`` chains.

    Each row starts from the better of two plug-in estimates (from linear
    and from wrapped-around transition counts), optionally refined.
    Returns ``(values, trans, unseen)``; ``values`` equals the empirical
    distance of each row to the chain with transitions ``trans``.
    """
    samples = _batch(samples, alphabet)
    n = samples.shape[1]
    if n <= order:
        raise DomainError(f"sample of length {n} is too short for order {order}")
    values = np.empty(samples.shape[0])
    trans_all = np.empty((samples.shape[0], alphabet**order, alphabet))
    unseen_all = np.empty((samples.shape[0], alphabet**order), dtype=bool)
    count_depth = max(depth, order + 1)
    for lo in range(0, samples.shape[0], CHUNK):
        counts = batch_counts(samples[lo:lo + CHUNK], count_depth, alphabet)
        freqs = _frequencies(counts, n)[:depth]
        trans, unseen = markov_plug_in(counts[order], order, alphabet)
        best = _markov_objective(trans, freqs, order, alphabet, depth)
        if order > 0:
            # the linear plug-in chain can strand its mass on a context seen
            # only at the end; wrapped counts form a closed walk, so their
            # chain is irreducible on the observed contexts
            chunk = samples[lo:lo + CHUNK]
            wrapped = np.concatenate([chunk, chunk[:, :order]], axis=1)
            c_trans, c_unseen = markov_plug_in(
                batch_counts(wrapped, order + 1, alphabet)[order], order, alphabet)
            c_best = _markov_objective(c_trans, freqs, order, alphabet, depth)
            better = c_best < best
            trans[better], unseen[better], best[better] = c_trans[better], c_unseen[better], c_best[better]
        if refine.enabled:
            trans, best = _golden_refine(trans, best, freqs, order, alphabet, depth, refine)
        values[lo:lo + CHUNK] = best
        trans_all[lo:lo + CHUNK] = trans
        unseen_all[lo:lo + CHUNK] = unseen
    return values, trans_all, unseen_all


def _markov_witness(trans: np.ndarray, order: int, alphabet: int) -> tuple[MarkovModel, bool]:
    law, unique = stationary_distribution(_kgram_chain(trans, order, alphabet))
    if unique:
        return MarkovModel(order, trans, alphabet=alphabet), True
    return MarkovModel(order, trans, initial=law, alphabet=alphabet), False


def _kgram_chain(trans, order, a):
    n_ctx = a**order
    q = np.zeros((n_ctx, n_ctx))
    for c in range(n_ctx):
        for s in range(a):
            q[c, (c * a + s) % n_ctx] += trans[c, s]
    return q


def project_markov(x, order: int, depth: int, refine: RefineConfig = RefineConfig(),
                   alphabet: int = 2) -> ProjectionResult:
    """Project a sample onto chains of order ``<= order``.

    The witness is the plug-in chain ((k+1)-gram conditional frequencies,
    stationary start), optionally polished by golden-section search.  The
    returned value is an upper bound on the infimum over the family.
    """
    x = _batch(as_sample(x, alphabet), alphabet)
    values, trans, unseen = batch_project_markov(x, order, alphabet, depth, refine)
    witness, unique = _markov_witness(trans[0], order, alphabet)
    diagnostics = {
        "method": "plug-in" + ("+golden" if refine.enabled else ""),
        "unseen_contexts": np.flatnonzero(unseen[0]).tolist(),
        "unique_law": unique,
        "converged": True,
    }
    return ProjectionResult(_truncated(values[0], alphabet, depth), witness, diagnostics)


# -- HMM projection -----------------------------------------------------------


def _safe_hmm(trans, emit) -> tuple[HMMModel, bool]:
    law, unique = stationary_distribution(trans)
    if unique:
        return HMMModel(trans, emit), True
    return HMMModel(trans, emit, initial=law), False


def _hmm_objective(trans, emit, freqs, depth, a):
    model, _ = _safe_hmm(trans, emit)
    return float(weighted_l1(freqs, model.marginal_tables(depth), a)[0])


def _polish_rows(mat, other, is_trans, freqs, depth, a, best, cfg: RefineConfig):
    """Golden-section over each coordinate of each row of one HMM matrix."""
    mat = mat.copy()
    if mat.shape[1] == 1:
        return mat, best
    for _ in range(cfg.sweeps):
        for i in range(mat.shape[0]):
            for j in range(mat.shape[1] if mat.shape[1] > 2 else 1):
                batch = mat[None]

                def f(t):
                    cand = _set_coordinate(batch, i, j, np.array([t]))[0]
                    args = (cand, other) if is_trans else (other, cand)
                    return _hmm_objective(*args, freqs, depth, a), cand

                lo, hi = max(0.0, mat[i, j] - cfg.width), min(1.0, mat[i, j] + cfg.width)
                x1, x2 = hi - GOLDEN * (hi - lo), lo + GOLDEN * (hi - lo)
                (f1, c1), (f2, c2) = f(x1), f(x2)
                while hi - lo > cfg.tol:
                    if f1 <= f2:
                        hi, x2, f2, c2 = x2, x1, f1, c1
                        x1 = hi - GOLDEN * (hi - lo)
                        f1, c1 = f(x1)
                    else:
                        lo, x1, f1, c1 = x1, x2, f2, c2
                        x2 = lo + GOLDEN * (hi - lo)
                        f2, c2 = f(x2)
                fb, cb = (f1, c1) if f1 <= f2 else (f2, c2)
                if fb < best:
                    best, mat = fb, cb
    return mat, best


def project_hmm(x, states: int, depth: int, em: EMConfig = EMConfig(), alphabet: int = 2,
                polish: RefineConfig | None = None) -> ProjectionResult:
    """Project a sample onto hidden Markov processes with ``<= states`` states.

    Baum-Welch is run from ``em.restarts`` seeded random starts; the
    candidate with the smallest empirical distance is the witness.  With
    ``em.polish`` (or an explicit ``polish`` config) the witness is refined by
    golden-section search on its transition and emission rows.
    """
    x = as_sample(x, alphabet)
    if x.size < 2:
        raise DomainError("HMM projection needs a sample of length >= 2")
    if states < 1:
        raise DomainError("states must be >= 1")
    a = alphabet
    freqs = _frequencies(batch_counts(x[None, :], depth, a), x.size)
    obs = x.astype(np.int64)
    candidates = []
    for r in range(em.restarts):
        g = rng(derive_seed(em.seed, "em-restart", r))
        t0 = g.dirichlet(np.ones(states), size=states)
        e0 = g.dirichlet(np.ones(a), size=states)
        p0 = np.full(states, 1.0 / states)
        t, e, _, loglik, iters = _kernels.baum_welch(obs, t0, e0, p0, em.max_iter, em.tol)
        if not np.isfinite(loglik):
            continue
        model, unique = _safe_hmm(t, e)
        value = float(weighted_l1(freqs, model.marginal_tables(depth), a)[0])
        candidates.append((value, r, t, e, loglik, iters, unique))
    diagnostics = {"restarts": em.restarts, "valid_restarts": len(candidates), "degenerate": False}
    if not candidates:
        # every restart hit a zero-likelihood state; fall back to the one-state fit
        diagnostics["degenerate"] = True
        p = freqs[0][0] if x.size else np.full(a, 1.0 / a)
        t = np.full((states, states), 1.0 / states)
        e = np.tile(p, (states, 1))
        candidates.append((_hmm_objective(t, e, freqs, depth, a), -1, t, e, -np.inf, 0, True))
    value, r, t, e, loglik, iters, unique = min(candidates, key=lambda c: (c[0], c[1]))
    diagnostics.update({"best_restart": r, "loglik": float(loglik), "iterations": int(iters),
                        "converged": bool(iters < em.max_iter), "candidate_distances":
                        sorted(c[0] for c in candidates)})
    cfg = polish if polish is not None else (RefineConfig(enabled=True) if em.polish else None)
    if cfg is not None and cfg.enabled:
        t, value = _polish_rows(t, e, True, freqs, depth, a, value, cfg)
        e, value = _polish_rows(e, t, False, freqs, depth, a, value, cfg)
        diagnostics["polished"] = True
    witness, unique = _safe_hmm(t, e)
    diagnostics["unique_law"] = unique
    # recompute so the reported value is exactly the witness's distance
    value = float(weighted_l1(freqs, witness.marginal_tables(depth), a)[0])
    return ProjectionResult(_truncated(value, a, depth), witness, diagnostics)


# -- families -----------------------------------------------------------------


def distance_to_family(x, family: HypothesisFamily, depth: int) -> ProjectionResult:
    """Statistic ``inf_{rho in H} d(x, rho)`` with a witness member."""
    a = family.alphabet
    if isinstance(family, MarkovOrder):
        return project_markov(x, family.order, depth, family.refine, a)
    if isinstance(family, HMMOrder):
        return project_hmm(x, family.states, depth, family.em, a)
    if family.enumerable:
        x = _batch(as_sample(x, a), a)
        members = family.members
        values = [batch_empirical_distance(x, m, depth)[0] for m in members]
        best = int(np.argmin(values))
        return ProjectionResult(_truncated(values[best], a, depth), members[best],
                                {"member_distances": [float(v) for v in values], "best_member": best})
    raise DomainError(f"cannot project onto {family!r}")


def family_statistics(samples: np.ndarray, family: HypothesisFamily, depth: int) -> np.ndarray:
    """``distance_to_family(...).distance.value`` for every row of ``samples``."""
    a = family.alphabet
    samples = _batch(samples, a)
    if isinstance(family, MarkovOrder):
        return batch_project_markov(samples, family.order, a, depth, family.refine)[0]
    if isinstance(family, HMMOrder):
        return np.array([project_hmm(row, family.states, depth, family.em, a).distance.value
                         for row in samples])
    if family.enumerable:
        values = np.stack([batch_empirical_distance(samples, m, depth) for m in family.members])
        return values.min(axis=0)
    raise DomainError(f"cannot project onto {family!r}")
