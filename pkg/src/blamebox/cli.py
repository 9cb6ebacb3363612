"""Command line entry point.

Subcommands: ``simulate`` (run a built-in or file-described scenario),
``train-mom`` / ``eval-mom`` (observation model over a stored database),
``localize`` (testing loop over a stored study with replayed executions),
``report`` (re-emit the CSV bundle from a trace.json).

Exit codes: 0 success, 1 validation or configuration problem, 2 I/O problem.
Nothing is ever written outside --out.
"""
from __future__ import annotations

import argparse
import json
import sys

from .errors import BlameboxError, StoreError
from .fpf import BlameConfig, fit_fpf
from .harness import BUILT_IN_SCENARIOS, load_scenario, run_scenario
from .mom import MomConfig, detect_failure_time, error_series, fit_error_stats, train
from .planner import PlannerConfig, run_testing_loop
from .reports import (trace_to_dict, write_mom_eval, write_run_info,
                      write_trace_files)
from .store import MomBundle, ReplayExecutor, load_db, load_model, load_study, save_model

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2


def _cmd_simulate(args) -> int:
    config = load_scenario(args.scenario, seed=args.seed)
    run_scenario(config, out_dir=args.out)
    return EXIT_OK


def _cmd_train_mom(args) -> int:
    db = load_db(args.db)
    config = MomConfig(bottleneck=args.bottleneck, epochs=args.epochs, seed=args.seed)
    sequences = [o.sensors for o in db.observations]
    model = train(sequences, config)
    stats = fit_error_stats(model, sequences)
    save_model(MomBundle(model=model, error_stats=stats), args.out)
    return EXIT_OK


def _cmd_eval_mom(args) -> int:
    bundle = load_model(args.model, expect="mom")
    if bundle.error_stats is None:
        raise BlameboxError(f"{args.model} has no error statistics; retrain first")
    db = load_db(args.db)
    config = MomConfig()
    names, liks, flags = [], [], []
    for i, obs in enumerate(db.observations):
        errors = error_series(bundle.model, obs.sensors)
        lik, t_fail = detect_failure_time(bundle.error_stats, errors, config)
        names.append(f"obs_{i:04d}")
        liks.append(lik)
        flags.append(t_fail)
    write_mom_eval(args.out, names, liks, flags)
    write_run_info(args.out, "eval-mom",
                   {"model": args.model, "db": args.db,
                    "smoothing_window": config.smoothing_window,
                    "z_threshold": config.z_threshold})
    return EXIT_OK


def _cmd_localize(args) -> int:
    study = load_study(args.study)
    if not study.replay:
        raise BlameboxError(f"study {args.study} holds no recorded executions to replay")
    blame = BlameConfig.for_sampling(study.dt)
    planner = PlannerConfig(seed=args.seed)
    fpfs = {s: fit_fpf(study.dbs[s], blame) for s in study.skills}
    executor = ReplayExecutor(study.replay)
    _, trace = run_testing_loop(executor, study.skills, study.dbs, fpfs, None,
                                planner, blame)
    write_trace_files(args.out, trace_to_dict(trace, study.registry.names))
    write_run_info(args.out, "localize",
                   {"study": args.study, "executor": args.executor, "seed": args.seed,
                    "planner": {"samples_per_observation": planner.samples_per_observation,
                                "convergence_epsilon": planner.convergence_epsilon,
                                "convergence_patience": planner.convergence_patience,
                                "max_iterations": planner.max_iterations,
                                "seed": planner.seed},
                    "blame": {"alpha": blame.alpha, "window_steps": blame.window_steps,
                              "epsilon_floor": blame.epsilon_floor,
                              "var_floor": blame.var_floor,
                              "success_deviation_weight": blame.success_deviation_weight}})
    return EXIT_OK


def _cmd_report(args) -> int:
    with open(args.trace, "r", encoding="utf-8") as fh:
        try:
            trace_dict = json.load(fh)
        except json.JSONDecodeError as exc:
            raise StoreError(f"{args.trace} is not valid JSON: {exc}") from exc
    for key in ("skills", "functions", "steps"):
        if key not in trace_dict:
            raise StoreError(f"{args.trace} is not a trace file (missing {key!r})")
    write_trace_files(args.out, trace_dict)
    write_run_info(args.out, "report", {"trace": args.trace})
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blamebox",
        description="Bayesian fault localization over skill executions")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario and write its report bundle")
    p.add_argument("--scenario", required=True,
                   help=f"built-in name ({', '.join(BUILT_IN_SCENARIOS)}) or JSON file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("train-mom", help="train the observation model on a database")
    p.add_argument("--db", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=MomConfig.epochs)
    p.add_argument("--bottleneck", type=int, default=MomConfig.bottleneck)
    p.add_argument("--seed", type=int, default=MomConfig.seed)
    p.set_defaults(func=_cmd_train_mom)

    p = sub.add_parser("eval-mom", help="per-timestep likelihoods of stored executions")
    p.add_argument("--model", required=True)
    p.add_argument("--db", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval_mom)

    p = sub.add_parser("localize", help="run the testing loop over recorded executions")
    p.add_argument("--study", required=True)
    p.add_argument("--executor", choices=["replay"], default="replay")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_localize)

    p = sub.add_parser("report", help="re-emit the CSV bundle from a trace.json")
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (BlameboxError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
