"""Command-line entry point.

Every subcommand reads a JSON config (``--config``); ``--seed``,
``--threads`` and ``--output`` override the corresponding config fields.
Structured results go to stdout (or ``--output``), a short human summary to
stderr.  Exit status: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._seeds import derive_seed
from .distance import distance_to_family, empirical_distance
from .errors import CacheMismatchError, DomainError, SpecError
from .harness import ExperimentPlan, convergence_experiment, curve_csv, error_curve
from .hypotheses import design_from_spec, family_from_spec
from .processes import model_from_spec
from .stats import as_sample, format_sample, read_samples
from .testing import (CalibrationTable, PhiTest, PsiTest, cached_calibration, calibrate_gamma,
                      epsilon_grid, request_key, verify_smoothing_bounds)


class UsageError(Exception):
    pass


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise SpecError(f"config lacks required field {key!r}")
    return cfg[key]


def _depth(cfg: dict, default: int) -> int:
    depth = int(cfg.get("depth", default))
    if depth < 1:
        raise SpecError(f"depth must be >= 1, got {depth}")
    return depth


def _write_output(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _samples(cfg: dict, alphabet: int) -> list[np.ndarray]:
    if "sample" in cfg:
        return [as_sample(cfg["sample"], alphabet)]
    path = _require(cfg, "samples")
    if not Path(path).is_file():
        raise UsageError(f"sample file not found: {path}")
    samples = read_samples(path, alphabet)
    if not samples:
        raise SpecError(f"sample file {path} holds no samples")
    return samples


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


# -- subcommands --------------------------------------------------------------


def cmd_simulate(cfg, args):
    model = model_from_spec(_require(cfg, "model"))
    n = int(_require(cfg, "n"))
    count = int(cfg.get("count", 1))
    if n < 0 or count < 1:
        raise SpecError("n must be >= 0 and count >= 1")
    paths = model.sample_paths(n, count, derive_seed(cfg.get("seed", 0), "simulate"))
    text = "".join(format_sample(p, model.alphabet) + "\n" for p in paths)
    _write_output(text, args.output)
    _log(f"simulated {count} path(s) of length {n} from {model!r}")


def cmd_distance(cfg, args):
    depth = _depth(cfg, 8)
    if "family" in cfg:
        family = family_from_spec(cfg["family"])
        out = []
        for x in _samples(cfg, family.alphabet):
            res = distance_to_family(x, family, depth)
            out.append({"value": res.distance.value, "tail_bound": res.distance.tail_bound,
                        "depth": depth, "witness": res.witness.to_spec()})
    else:
        model = model_from_spec(_require(cfg, "model"))
        out = []
        for x in _samples(cfg, model.alphabet):
            d = empirical_distance(x, model, depth)
            out.append({"value": d.value, "tail_bound": d.tail_bound, "depth": depth})
    _write_output(_dump(out), args.output)
    _log(f"computed {len(out)} distance(s) at depth {depth}")


def _calibration_request(cfg):
    family = family_from_spec(_require(cfg, "family"))
    design = design_from_spec(cfg.get("design"))
    return (family, design, int(_require(cfg, "n")), float(_require(cfg, "alpha")),
            _depth(cfg, 8), int(cfg.get("replicates", 1000)), int(cfg.get("seed", 0)))


def cmd_calibrate(cfg, args):
    family, design, n, alpha, depth, reps, seed = _calibration_request(cfg)
    if "cache_dir" in cfg:
        table, hit = cached_calibration(cfg["cache_dir"], family, n, alpha, depth, design, reps,
                                        seed, args.threads)
        _log(f"cache {'hit' if hit else 'miss'}: {table.key}")
    else:
        table = calibrate_gamma(family, n, alpha, depth, design, reps, seed, args.threads)
    _write_output(table.to_json() + "\n", args.output)
    _log(f"threshold {table.threshold:.6g} over {len(table.member_quantiles)} member(s)")


def _psi_table(cfg, args, n):
    cfg = dict(cfg)
    cfg.setdefault("n", n)
    family, design, n, alpha, depth, reps, seed = _calibration_request(cfg)
    if "table" in cfg:
        path = Path(cfg["table"])
        if not path.is_file():
            raise UsageError(f"calibration table not found: {path}")
        table = CalibrationTable.load(path)
        if table.key != request_key(family, design, n, alpha, depth, reps, seed):
            raise CacheMismatchError(f"table {path} was calibrated for a different request")
        return family, table
    if "cache_dir" in cfg:
        return family, cached_calibration(cfg["cache_dir"], family, n, alpha, depth, design,
                                          reps, seed, args.threads)[0]
    return family, calibrate_gamma(family, n, alpha, depth, design, reps, seed, args.threads)


def cmd_test_psi(cfg, args):
    alphabet = family_from_spec(_require(cfg, "family")).alphabet
    samples = _samples(cfg, alphabet)
    lengths = {x.size for x in samples}
    if len(lengths) != 1:
        raise SpecError("all samples must share one length")
    family, table = _psi_table(cfg, args, lengths.pop())
    test = PsiTest(table, family)
    reports = [test.report(x).to_dict() for x in samples]
    _write_output(_dump(reports), args.output)
    _log(f"psi: {sum(r['decision'] for r in reports)}/{len(reports)} rejected "
         f"(threshold {table.threshold:.6g})")


def cmd_test_phi(cfg, args):
    h0 = family_from_spec(_require(cfg, "h0"))
    h1 = family_from_spec(_require(cfg, "h1"))
    test = PhiTest(h0, h1, _depth(cfg, 8))
    reports = [test.report(x).to_dict() for x in _samples(cfg, h0.alphabet)]
    _write_output(_dump(reports), args.output)
    _log(f"phi: {sum(r['decision'] for r in reports)}/{len(reports)} decided for H1")


def cmd_verify_lemma2(cfg, args):
    model = model_from_spec(_require(cfg, "model"))
    family = family_from_spec(_require(cfg, "family"))
    rows = verify_smoothing_bounds(model, family, int(_require(cfg, "m")), int(_require(cfg, "k")),
                                   epsilon_grid(cfg.get("epsilon_step", 0.02)),
                                   _depth(cfg, 6), int(cfg.get("cap", 2**20)))
    violations = sum(not r.holds for r in rows)
    _write_output(_dump({"violations": violations, "rows": [r.__dict__ for r in rows]}), args.output)
    _log(f"{len(rows)} rows, {violations} violation(s)")
    return 1 if violations else 0


def cmd_experiment(cfg, args):
    kind = cfg.get("kind", "error_curve")
    if kind == "convergence":
        rho = model_from_spec(_require(cfg, "rho"))
        xi = model_from_spec(_require(cfg, "xi"))
        seeds = cfg.get("seeds", [cfg.get("seed", 0)])
        lines = ["seed,n,estimate,exact,error\n"]
        for s in seeds:
            for r in convergence_experiment(rho, xi, _require(cfg, "n_grid"), _depth(cfg, 6), int(s)):
                lines.append(f"{s},{r.n},{r.estimate!r},{r.exact!r},{r.error!r}\n")
        _write_output("".join(lines), args.output)
        _log(f"convergence rows: {len(lines) - 1}")
        return 0
    if kind != "error_curve":
        raise SpecError(f"unknown experiment kind {kind!r}")
    models = {str(k): model_from_spec(v) for k, v in _require(cfg, "models").items()}
    plan = ExperimentPlan(
        test=_require(cfg, "test"), h0=family_from_spec(_require(cfg, "h0")), models=models,
        n_grid=[int(n) for n in _require(cfg, "n_grid")], replicates=int(_require(cfg, "replicates")),
        seed=int(cfg.get("seed", 0)), depth=_depth(cfg, 8),
        alphas=[float(a) for a in cfg.get("alphas", [0.05])],
        h1=family_from_spec(cfg["h1"]) if "h1" in cfg else None,
        design=design_from_spec(cfg.get("design")),
        calibration_replicates=int(cfg.get("calibration_replicates", 1000)),
    )
    rows = error_curve(plan, workers=args.threads)
    _write_output(curve_csv(rows), args.output)
    _log(f"experiment rows: {len(rows)}")


COMMANDS = {
    "simulate": cmd_simulate,
    "distance": cmd_distance,
    "calibrate": cmd_calibrate,
    "test-psi": cmd_test_psi,
    "test-phi": cmd_test_phi,
    "verify-lemma2": cmd_verify_lemma2,
    "experiment": cmd_experiment,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ergotest", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--threads", type=int, default=1, help="worker processes for calibration")
        p.add_argument("--output", help="output path (default: stdout)")
    return parser


def execute(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            cfg = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        return COMMANDS[args.command](cfg, args) or 0
    except UsageError as exc:
        _log(f"usage error: {exc}")
        return 2
    except DomainError as exc:
        _log(f"error ({type(exc).__name__}): {exc}")
        return 1
    except (TypeError, ValueError) as exc:
        _log(f"error (invalid config value): {exc}")
        return 1


def main():
    sys.exit(execute())


if __name__ == "__main__":
    main()
