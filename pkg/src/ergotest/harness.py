"""Reproducible error-rate and convergence experiments with CSV output."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ._seeds import derive_seed
from .distance import batch_empirical_distance, exact_distance
from .errors import SpecError
from .hypotheses import HypothesisFamily, MemberDesign
from .processes import ProcessModel
from .testing import CalibrationTable, PhiTest, PsiTest, calibrate_many

CSV_COLUMNS = ("test", "n", "alpha", "model_id", "replicates", "reject_rate", "std_err", "seed")


@dataclass
class ExperimentPlan:
    test: str
    h0: HypothesisFamily
    models: dict
    n_grid: Sequence[int]
    replicates: int
    seed: int = 0
    depth: int = 8
    alphas: Sequence[float] = (0.05,)
    h1: HypothesisFamily | None = None
    design: MemberDesign = field(default_factory=MemberDesign)
    calibration_replicates: int = 1000
    output: str | None = None

    def __post_init__(self):
        if self.test not in ("psi", "phi"):
            raise SpecError(f"unknown test kind {self.test!r}")
        if self.test == "phi" and self.h1 is None:
            raise SpecError("the phi test needs an alternative family h1")
        grid = list(self.n_grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise SpecError("n grid must be non-empty and strictly increasing")
        if self.replicates < 1:
            raise SpecError("replicates must be >= 1")
        if not self.models:
            raise SpecError("plan has no data-generating models")


@dataclass(frozen=True)
class CurveRow:
    test: str
    n: int
    alpha: float | None
    model_id: str
    replicates: int
    reject_rate: float
    std_err: float
    seed: int


def binomial_std_err(successes: int, trials: int) -> float:
    """Normal-approximation standard error of a proportion; below five
    successes, the half-width of the one-sigma Wilson interval."""
    p = successes / trials
    if successes >= 5:
        return math.sqrt(p * (1.0 - p) / trials)
    z = 1.0
    return z / (1.0 + z * z / trials) * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials**2))


def _tests_for(plan: ExperimentPlan, n: int, workers: int):
    if plan.test == "phi":
        return [(None, PhiTest(plan.h0, plan.h1, plan.depth))]
    tables = calibrate_many(plan.h0, n, list(plan.alphas), plan.depth, plan.design,
                            plan.calibration_replicates, derive_seed(plan.seed, "calibrate", n),
                            workers=workers)
    return [(t.alpha, PsiTest(t, plan.h0)) for t in tables]


def error_curve(plan: ExperimentPlan, workers: int = 1) -> list[CurveRow]:
    """One row per (n, alpha, model): empirical rejection rate over
    ``plan.replicates`` fresh paths, in plan order."""
    rows = []
    for n in plan.n_grid:
        tests = _tests_for(plan, n, workers)
        for model_id, model in plan.models.items():
            seed = derive_seed(plan.seed, "trial", model_id, n)
            samples = model.sample_paths(n, plan.replicates, seed)
            for alpha, test in tests:
                k = int(np.count_nonzero(test.rejects(samples)))
                rows.append(CurveRow(plan.test, int(n), alpha, model_id, plan.replicates,
                                     k / plan.replicates, binomial_std_err(k, plan.replicates), seed))
    if plan.output:
        write_curve_csv(rows, plan.output)
    return rows


def curve_csv(rows: Sequence[CurveRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow([r.test, r.n, "" if r.alpha is None else repr(r.alpha), r.model_id,
                         r.replicates, repr(r.reject_rate), repr(r.std_err), r.seed])
    return buf.getvalue()


def write_curve_csv(rows: Sequence[CurveRow], path: str | os.PathLike) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(curve_csv(rows))
    os.replace(tmp, path)


def monotone_after_crossing(rates: Sequence[float], level: float = 0.5) -> bool:
    """True when the sequence never decreases after first reaching ``level``."""
    rates = list(rates)
    start = next((i for i, r in enumerate(rates) if r >= level), None)
    if start is None:
        return True
    return all(b >= a for a, b in zip(rates[start:], rates[start + 1:]))


@dataclass(frozen=True)
class TrajectorySummary:
    n: int
    reject_fraction: float
    settled_fraction: float


def trajectory_experiment(plan: ExperimentPlan, model_id: str, paths: int = 100,
                          workers: int = 1) -> tuple[np.ndarray, list[TrajectorySummary]]:
    """Per-path version of the Type II statement.

    Draws ``paths`` long paths of ``plan.models[model_id]`` and tests each
    prefix at every checkpoint of the n grid (first alpha for psi).  Returns
    the decision matrix ``(paths, len(n_grid))`` and, per checkpoint, the
    fraction rejecting there and the fraction rejecting at every later
    checkpoint as well.
    """
    model = plan.models[model_id]
    grid = list(plan.n_grid)
    long = model.sample_paths(grid[-1], paths, derive_seed(plan.seed, "trajectory", model_id))
    decisions = np.zeros((paths, len(grid)), dtype=np.int8)
    for j, n in enumerate(grid):
        _, test = _tests_for(plan, n, workers)[0]
        decisions[:, j] = test.rejects(np.ascontiguousarray(long[:, :n]))
    settled = np.flip(np.cumprod(np.flip(decisions, axis=1), axis=1), axis=1)
    summary = [TrajectorySummary(int(n), float(decisions[:, j].mean()), float(settled[:, j].mean()))
               for j, n in enumerate(grid)]
    return decisions, summary


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    estimate: float
    exact: float
    error: float


def convergence_experiment(rho: ProcessModel, xi: ProcessModel, n_grid: Sequence[int],
                           depth: int, seed: int) -> list[ConvergenceRow]:
    """Empirical distance of growing prefixes of one ``rho`` path to ``xi``,
    against the exact distance between the two processes."""
    grid = list(n_grid)
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise SpecError("n grid must be strictly increasing")
    exact = exact_distance(rho, xi, depth).value
    path = rho.sample_path(grid[-1], seed)
    rows = []
    for n in grid:
        est = float(batch_empirical_distance(path[None, :n], xi, depth)[0])
        rows.append(ConvergenceRow(int(n), est, exact, abs(est - exact)))
    return rows
