"""Command-line interface.

Subcommands:
  simulate     run policies on a market and write efficiency/profile CSVs
  optimize     compute a performance ranking for a market instance
  asymptotics  print the limit purchase probabilities report
  reduce2cl    solve a two-segment logit assortment problem by reduction
  scheme       emit a generated benchmark market as JSON

All diagnostics go to stderr; result data goes to files (simulate) or
stdout as JSON (the other subcommands).  Exit codes: 2 invalid input,
3 degenerate instance, 4 unsupported solver request, 5 oversize exact
reduction.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import asymptotic_report
from .engine import monte_carlo, write_efficiency_csv, write_profile_csv
from .model import (
    DegenerateInstanceError,
    InvalidInstanceError,
    MarketConfig,
    PopularitySignal,
    purchase_probability_next,
)
from .policies import (
    EXPERIMENT_POLICIES,
    MAX_BRUTE_FORCE_ITEMS,
    SizeLimitError,
    UnsupportedSolverError,
    performance_ranking_bruteforce,
    performance_ranking_k1,
    performance_ranking_swap_heuristic,
)
from .reduction import TwoClassLogitInstance, brute_force_two_class_logit, solve_two_class_logit
from .experiments import (
    DEFAULT_VISIBILITY_EXPONENT,
    ExperimentScale,
    SchemeSpec,
    generate_scheme,
    run_figure_experiment,
)

EXIT_INVALID_INPUT = 2
EXIT_DEGENERATE = 3
EXIT_UNSUPPORTED_SOLVER = 4
EXIT_OVERSIZE_EXACT = 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read JSON file {path}: {exc}", EXIT_INVALID_INPUT) from exc


def _load_config(path: str) -> MarketConfig:
    doc = _read_json(path)
    try:
        return MarketConfig.from_json_dict(doc)
    except InvalidInstanceError as exc:
        raise CliError(f"invalid market config: {exc}", EXIT_INVALID_INPUT) from exc


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def cmd_simulate(args: argparse.Namespace) -> int:
    sources = [args.scheme is not None, args.config is not None, args.experiment is not None]
    if sum(sources) != 1:
        raise CliError("simulate needs exactly one of --scheme, --config, --experiment", EXIT_INVALID_INPUT)

    if args.experiment is not None:
        doc = _read_json(args.experiment)
        scale = ExperimentScale(
            num_items=int(doc.get("num_items", args.items)),
            horizon=int(doc.get("horizon", args.horizon)),
            replications=int(doc.get("replications", args.reps)),
        )
        seed = int(doc.get("seed", args.seed))
        z = float(doc.get("z", args.z))
        exponent = float(doc.get("visibility_profile", args.visibility_exponent))
        if "figure" in doc:
            manifest = run_figure_experiment(
                doc["figure"],
                scale,
                seed,
                args.out,
                threads=args.threads,
                visibility_exponent=exponent,
                no_trial_mass=z,
            )
            print(json.dumps({"manifest": manifest["outputs"]}), file=sys.stderr)
            return 0
        if "scheme" not in doc:
            raise CliError("experiment file needs a 'scheme' or 'figure' field", EXIT_INVALID_INPUT)
        config = generate_scheme(
            SchemeSpec(
                scheme=int(doc["scheme"]),
                num_items=scale.num_items,
                seed=seed,
                visibility_exponent=exponent,
                no_trial_mass=z,
            )
        )
    elif args.scheme is not None:
        scale = ExperimentScale(num_items=args.items, horizon=args.horizon, replications=args.reps)
        seed = args.seed
        config = generate_scheme(
            SchemeSpec(
                scheme=args.scheme,
                num_items=args.items,
                seed=seed,
                visibility_exponent=args.visibility_exponent,
                no_trial_mass=args.z,
            )
        )
    else:
        scale = ExperimentScale(num_items=0, horizon=args.horizon, replications=args.reps)
        seed = args.seed
        config = _load_config(args.config)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    policies = list(EXPERIMENT_POLICIES)
    result = monte_carlo(
        config,
        policies,
        horizon=scale.horizon,
        replications=scale.replications,
        base_seed=seed,
        threads=args.threads,
    )
    efficiency_path = out / "efficiency.csv"
    profile_path = out / "profile.csv"
    write_efficiency_csv(efficiency_path, result.curves)
    write_profile_csv(profile_path, result.profiles, config)
    manifest = {
        "command": "simulate",
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "seed": seed,
        "horizon": scale.horizon,
        "replications": scale.replications,
        "threads": args.threads,
        "policies": [p.label for p in policies],
        "config": config.to_json_dict(),
        "outputs": {"efficiency": str(efficiency_path), "profile": str(profile_path)},
        "checksums": {
            "efficiency": _sha256(efficiency_path),
            "profile": _sha256(profile_path),
        },
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    print(f"wrote {efficiency_path} and {profile_path}", file=sys.stderr)
    return 0


def cmd_optimize(args: argparse.Namespace) -> int:
    doc = _read_json(args.instance)
    try:
        config = MarketConfig.from_json_dict(doc)
    except InvalidInstanceError as exc:
        raise CliError(f"invalid market config: {exc}", EXIT_INVALID_INPUT) from exc
    counts = np.asarray(doc.get("counts", np.zeros(config.num_items)), dtype=np.int64)
    if counts.shape != (config.num_items,) or counts.min() < 0:
        raise CliError("counts must be a non-negative vector of length N", EXIT_INVALID_INPUT)
    signal = PopularitySignal.global_counts(counts)

    solver = args.solver
    if solver == "auto":
        if config.num_classes == 1:
            solver = "exact1"
        elif config.num_items <= MAX_BRUTE_FORCE_ITEMS:
            solver = "bruteforce"
        else:
            solver = "swap"
    try:
        if solver == "exact1":
            ranking = performance_ranking_k1(config, counts)
            objective = purchase_probability_next(config, ranking, signal)
        elif solver == "bruteforce":
            ranking, objective = performance_ranking_bruteforce(config, signal)
        else:
            ranking, objective = performance_ranking_swap_heuristic(config, signal)
    except UnsupportedSolverError as exc:
        raise CliError(str(exc), EXIT_UNSUPPORTED_SOLVER) from exc
    except SizeLimitError as exc:
        raise CliError(str(exc), EXIT_UNSUPPORTED_SOLVER) from exc

    result = {
        "solver": solver,
        "heuristic": solver == "swap",
        "items_by_position": [int(i) for i in ranking.items_by_position()],
        "objective": objective,
    }
    if solver != "bruteforce" and config.num_items <= MAX_BRUTE_FORCE_ITEMS:
        _, best = performance_ranking_bruteforce(config, signal)
        result["optimality_gap"] = best - objective
    print(json.dumps(result))
    return 0


def cmd_asymptotics(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    print(asymptotic_report(config).to_json(indent=2))
    return 0


def cmd_reduce2cl(args: argparse.Namespace) -> int:
    doc = _read_json(args.instance)
    try:
        instance = TwoClassLogitInstance.from_json_dict(doc)
    except (KeyError, ValueError) as exc:
        raise CliError(f"invalid two-class logit instance: {exc}", EXIT_INVALID_INPUT) from exc
    if args.oracle == "bruteforce" and instance.num_products > MAX_BRUTE_FORCE_ITEMS:
        raise CliError(
            f"exact reduction limited to N <= {MAX_BRUTE_FORCE_ITEMS}; use --oracle swap",
            EXIT_OVERSIZE_EXACT,
        )
    solved = solve_two_class_logit(instance, oracle=args.oracle)
    result = {
        "assortment": list(solved.assortment),
        "value": solved.value,
        "exact": solved.exact,
    }
    if instance.num_products <= 20:
        check_set, check_value = brute_force_two_class_logit(instance)
        result["cross_check"] = {"assortment": list(check_set), "value": check_value}
    print(json.dumps(result))
    return 0


def cmd_scheme(args: argparse.Namespace) -> int:
    config = generate_scheme(
        SchemeSpec(
            scheme=args.scheme,
            num_items=args.items,
            seed=args.seed,
            visibility_exponent=args.visibility_exponent,
            no_trial_mass=args.z,
        )
    )
    text = config.to_json(indent=2)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trialmarket", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run ranking policies on a market")
    sim.add_argument("--scheme", type=int, choices=(1, 2, 3, 4))
    sim.add_argument("--config", help="market config JSON file")
    sim.add_argument("--experiment", help="experiment description JSON file")
    sim.add_argument("--items", type=int, default=20)
    sim.add_argument("--horizon", type=int, default=5000)
    sim.add_argument("--reps", type=int, default=1000)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--z", type=float, default=0.0)
    sim.add_argument("--visibility-exponent", type=float, default=DEFAULT_VISIBILITY_EXPONENT)
    sim.add_argument("--threads", type=int, default=None)
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=cmd_simulate)

    opt = sub.add_parser("optimize", help="compute a performance ranking")
    opt.add_argument("--instance", required=True, help="market config JSON, optional 'counts' field")
    opt.add_argument("--solver", choices=("auto", "exact1", "bruteforce", "swap"), default="auto")
    opt.set_defaults(func=cmd_optimize)

    asym = sub.add_parser("asymptotics", help="limit purchase probabilities report")
    asym.add_argument("--config", required=True)
    asym.set_defaults(func=cmd_asymptotics)

    red = sub.add_parser("reduce2cl", help="two-segment logit assortment via reduction")
    red.add_argument("--instance", required=True)
    red.add_argument("--oracle", choices=("bruteforce", "swap"), default="bruteforce")
    red.set_defaults(func=cmd_reduce2cl)

    sch = sub.add_parser("scheme", help="emit a generated benchmark market")
    sch.add_argument("--scheme", type=int, choices=(1, 2, 3, 4), required=True)
    sch.add_argument("--items", type=int, default=50)
    sch.add_argument("--seed", type=int, default=0)
    sch.add_argument("--z", type=float, default=0.0)
    sch.add_argument("--visibility-exponent", type=float, default=DEFAULT_VISIBILITY_EXPONENT)
    sch.add_argument("--out")
    sch.set_defaults(func=cmd_scheme)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except DegenerateInstanceError as exc:
        print(f"degenerate instance: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except InvalidInstanceError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT


if __name__ == "__main__":
    sys.exit(main())
