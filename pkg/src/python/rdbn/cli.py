"""
rdbn Command Line

``rdbn <command> [options]``. Every command writes its artifacts and a
``manifest.json`` into ``--out``; ``rdbn replay <manifest>`` reruns it.

Exit codes: 0 success, 2 input or validation error, 3 numerical or search
failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Callable, Dict, List, Optional, Sequence

from rdbn._version import __version__
from rdbn.config import (
    DEFAULT_SUBJECT,
    DEFAULT_THRESHOLD,
    MAX_OUTCOME_THRESHOLD,
    BootstrapConfig,
    ImputationConfig,
    SearchConfig,
    default_output_dir,
    validate_threshold,
)
from rdbn.exceptions import RDBNError, ValidationError
from rdbn.persistence import read_dag, read_dataset, read_json, read_strengths
from rdbn.study import RunManifest, Study, draw_seed
from rdbn.synthetic import ScenarioSpec, study_mimic_scenario

logger = logging.getLogger("rdbn")

LOG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"

BUILTIN_SCENARIOS = {"study-mimic": study_mimic_scenario}


def configure_logging(verbose: int = 0, quiet: bool = False) -> None:
    """Console logging for the ``rdbn`` logger tree: WARNING with -q, DEBUG with -v."""
    if quiet:
        level = logging.WARNING
    elif verbose:
        level = logging.DEBUG
    else:
        level = logging.INFO
    root = logging.getLogger("rdbn")
    for handler in root.handlers[:]:
        root.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(level)
    root.propagate = False


def _threshold(value: str):
    if value == MAX_OUTCOME_THRESHOLD:
        return value
    try:
        return validate_threshold(float(value))
    except (ValueError, ValidationError) as e:
        raise argparse.ArgumentTypeError(str(e))


def _positive(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {number}")
    return number


def _nonnegative(value: str) -> int:
    number = int(value)
    if number < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {number}")
    return number


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------


def _search_config(args: argparse.Namespace, seed: int) -> SearchConfig:
    return SearchConfig(
        restarts=args.restarts,
        perturbation=args.perturbation,
        max_iterations=args.max_iter,
        seed=seed,
        max_parents=args.max_parents,
    )


def _inner_search_config(args: argparse.Namespace) -> SearchConfig:
    return SearchConfig(restarts=args.restarts, perturbation=args.perturbation)


def _imputation_config(args: argparse.Namespace) -> ImputationConfig:
    return ImputationConfig(
        iterations=args.iters,
        mask_size=args.mask_size,
        k=args.k,
        mode=args.mode,
        seed=args.seed,
        search=_inner_search_config(args),
    )


def _bootstrap_config(args: argparse.Namespace) -> BootstrapConfig:
    return BootstrapConfig(
        replicates=args.replicates,
        threshold=args.threshold,
        seed=args.seed,
        jobs=args.jobs,
        search=_inner_search_config(args),
    )


def cmd_ingest(study: Study, args: argparse.Namespace) -> None:
    dataset = study.ingest(args.scores, args.indicators, args.subject)
    print(f"Merged {dataset.n} countries, {dataset.n_missing} of {dataset.s_t_size} cells missing")


def cmd_impute(study: Study, args: argparse.Namespace) -> None:
    study.record_inputs(args.data)
    dataset = read_dataset(args.data)
    _, trace = study.impute(dataset, _imputation_config(args))
    summary = trace.summary()
    print(f"Imputed {dataset.n_missing} cells; best D={summary['best_gap']} at iteration {summary['best_iteration']}")


def cmd_learn(study: Study, args: argparse.Namespace) -> None:
    study.record_inputs(args.data)
    dataset = read_dataset(args.data)
    result, _ = study.learn(dataset, _search_config(args, args.seed), trace=args.trace)
    print(f"Learned {len(result.dag.edges)} edges, BIC {result.score:.4f}")


def cmd_bootstrap(study: Study, args: argparse.Namespace) -> None:
    study.record_inputs(args.data)
    dataset = read_dataset(args.data)
    strengths, consensus = study.bootstrap(dataset, _bootstrap_config(args))
    print(f"{strengths.replicates} replicates; consensus has {len(consensus.edges)} edges")


def cmd_analyze(study: Study, args: argparse.Namespace) -> None:
    study.record_inputs(args.data, args.consensus, args.strengths)
    dataset = read_dataset(args.data)
    consensus = read_dag(args.consensus)
    strengths = read_strengths(args.strengths)
    report, _ = study.analyze(dataset, consensus, strengths)
    low, high = report.contribution_range
    print(
        f"{len(report.rows)} countries: contribution {low:.3f}..{high:.3f}, "
        f"{report.negative_efficiency_count} negative efficiencies"
    )


def cmd_simulate(study: Study, args: argparse.Namespace) -> None:
    if args.scenario:
        study.record_inputs(args.scenario)
        data = read_json(args.scenario)
        spec = ScenarioSpec.from_dict(data.get("scenario", data))
        spec = ScenarioSpec(
            spec.truth,
            args.n if args.n is not None else spec.n,
            args.missing_rate if args.missing_rate is not None else spec.missing_rate,
            args.seed,
        )
    else:
        spec = BUILTIN_SCENARIOS[args.builtin](
            n=args.n if args.n is not None else 57,
            missing_rate=args.missing_rate or 0.0,
            seed=args.seed,
        )
    _, dataset = study.simulate(spec)
    print(f"Simulated {dataset.n} rows, {dataset.n_missing} cells masked")


def cmd_pipeline(study: Study, args: argparse.Namespace) -> None:
    report = study.pipeline(
        args.scores, args.indicators, args.subject, _imputation_config(args), _bootstrap_config(args)
    )
    strongest = report.strongest
    if strongest is not None:
        print(f"Strongest edge into the outcome: {strongest.parent} ({strongest.strength:.2f})")
    print(f"{report.negative_efficiency_count} of {len(report.rows)} countries below prediction")


# ----------------------------------------------------------------------
# Parser
# ----------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-v", "--verbose", action="count", default=0, help="Debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="Warnings and errors only")
    parser.add_argument("--jobs", type=_positive, default=1, help="Worker cap (default: 1)")
    parser.add_argument("--out", default=None, help="Output directory (default: $RDBN_OUTPUT_DIR or ./rdbn_output)")


def _add_seed(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="Master seed (drawn and recorded when omitted)")


def _add_inputs(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scores", required=True, help="Score CSV (country,subject,score)")
    parser.add_argument("--indicators", required=True, help="Indicator CSV (country,year,expend,numbrd,gdp,pop)")
    parser.add_argument("--subject", default=DEFAULT_SUBJECT, help=f"Outcome subject (default: {DEFAULT_SUBJECT})")


def _add_inner_search_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--restarts", type=_nonnegative, default=0,
        help="Random restarts of each inner hill climb (default: 0)",
    )
    parser.add_argument(
        "--perturbation", type=_nonnegative, default=4,
        help="Edges toggled per restart (default: 4)",
    )


def _add_impute_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mode", choices=ImputationConfig.VALID_MODES, default="sweep")
    parser.add_argument("--iters", type=_nonnegative, default=500, help="Iterations N (default: 500)")
    parser.add_argument("--mask-size", type=_nonnegative, default=50, help="Cells hidden per iteration (default: 50)")
    parser.add_argument("--k", type=_positive, default=10, help="KNN neighbours (default: 10)")


def _add_bootstrap_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--replicates", type=_positive, default=500, help="Bootstrap replicates R (default: 500)")
    parser.add_argument(
        "--threshold", type=_threshold, default=DEFAULT_THRESHOLD,
        help=f"Consensus threshold in (0, 1] or '{MAX_OUTCOME_THRESHOLD}' (default: {DEFAULT_THRESHOLD})",
    )


COMMANDS: Dict[str, Callable[[Study, argparse.Namespace], None]] = {
    "ingest": cmd_ingest,
    "impute": cmd_impute,
    "learn": cmd_learn,
    "bootstrap": cmd_bootstrap,
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "pipeline": cmd_pipeline,
}

SEEDED = {"impute", "learn", "bootstrap", "simulate", "pipeline"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rdbn",
        description="Gaussian Bayesian networks linking R&D investment to education scores",
    )
    parser.add_argument("--version", action="version", version=f"rdbn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="Merge score and indicator CSVs")
    _add_inputs(p)

    p = sub.add_parser("impute", help="KNN seed plus iterative BN imputation")
    p.add_argument("--data", required=True, help="Merged dataset CSV")
    _add_impute_flags(p)
    _add_inner_search_flags(p)
    _add_seed(p)

    p = sub.add_parser("learn", help="Hill-climbing structure search on complete data")
    p.add_argument("--data", required=True, help="Completed dataset CSV")
    p.add_argument("--restarts", type=_nonnegative, default=10)
    p.add_argument("--perturbation", type=_nonnegative, default=4)
    p.add_argument("--max-iter", type=_nonnegative, default=10_000)
    p.add_argument("--max-parents", type=_nonnegative, default=None)
    p.add_argument("--trace", action="store_true", help="Write the JSON-lines move log")
    _add_seed(p)

    p = sub.add_parser("bootstrap", help="Bootstrap edge strengths and consensus network")
    p.add_argument("--data", required=True, help="Completed dataset CSV")
    _add_bootstrap_flags(p)
    _add_inner_search_flags(p)
    _add_seed(p)

    p = sub.add_parser("analyze", help="Regression table, indexes and correlations")
    p.add_argument("--data", required=True, help="Completed dataset CSV")
    p.add_argument("--consensus", required=True, help="Consensus DAG JSON")
    p.add_argument("--strengths", required=True, help="Edge strengths JSON")

    p = sub.add_parser("simulate", help="Sample a synthetic dataset with known truth")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--scenario", help="Scenario JSON")
    source.add_argument("--builtin", choices=sorted(BUILTIN_SCENARIOS))
    p.add_argument("--n", type=_positive, default=None)
    p.add_argument("--missing-rate", type=float, default=None)
    _add_seed(p)

    p = sub.add_parser("pipeline", help="ingest, impute, bootstrap and analyze")
    _add_inputs(p)
    _add_impute_flags(p)
    _add_bootstrap_flags(p)
    _add_inner_search_flags(p)
    _add_seed(p)

    p = sub.add_parser("replay", help="Rerun the command recorded in a manifest")
    p.add_argument("manifest", help="manifest.json of an earlier run")

    for name, action in sub.choices.items():
        _add_common(action)
    return parser


def _replay_argv(args: argparse.Namespace) -> List[str]:
    manifest = RunManifest.from_dict(read_json(args.manifest))
    changed = manifest.changed_inputs()
    if changed:
        logger.warning("Inputs changed since the recorded run: %s", ", ".join(changed))
    argv = list(manifest.argv)
    if args.out:
        argv += ["--out", args.out]
    logger.info("Replaying: rdbn %s", " ".join(argv))
    return argv


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose, args.quiet)

    try:
        if args.command == "replay":
            return main(_replay_argv(args))

        resolved = list(argv)
        if args.command in SEEDED and args.seed is None:
            args.seed = draw_seed()
            resolved += ["--seed", str(args.seed)]
            logger.info("No seed given; using %d", args.seed)

        flags = {k: v for k, v in vars(args).items() if k not in ("command",)}
        manifest = RunManifest(
            command=args.command, argv=resolved, flags=flags, seed=getattr(args, "seed", None)
        )
        with Study(args.out or default_output_dir(), jobs=args.jobs) as study:
            study.begin(manifest)
            COMMANDS[args.command](study, args)
        return 0
    except RDBNError as e:
        logger.error("%s: %s", type(e).__name__, e.message)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
