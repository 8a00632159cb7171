"""Command line entry points.

Subcommands: ``repair`` applies high-confidence updates and writes the
repaired table; ``simulate`` runs scripted sessions against ground
truth and writes JSON and CSV reports; ``rank`` prints the initial
group ranking; ``inject`` corrupts a clean table for experiments;
``serve`` starts the HTTP session service.

Exit codes: 0 on success, 1 for parse or IO problems, 2 when datasets
do not line up (schema mismatch, missing ground truth).  The ``GDR_LOG``
environment variable sets the log level.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .evaluation import ErrorSpec, inject_errors, reports_to_csv
from .model import DataError, Dataset
from .ranking import group_budget
from .rules import RuleParseError, RuleSet, parse_rules_file
from .session import (
    SIMULATED_STRATEGIES,
    STRATEGIES,
    SchemaMismatch,
    Session,
    SessionConfig,
    run_auto,
    run_session,
)

EXIT_OK = 0
EXIT_IO = 1
EXIT_SCHEMA = 2

log = logging.getLogger(__name__)


def _configure_logging() -> None:
    level_name = os.environ.get("GDR_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _add_io_flags(sub: argparse.ArgumentParser, truth: bool = False) -> None:
    sub.add_argument("--data", required=True, help="CSV file with the working data")
    sub.add_argument("--rules", required=True, help="rule file")
    if truth:
        sub.add_argument("--truth", help="CSV file with the repaired reference data")


def _load(args, truth: bool = False):
    dataset = Dataset.from_csv(args.data)
    rules = parse_rules_file(args.rules, dataset.schema)
    truth_ds = None
    if truth and getattr(args, "truth", None):
        truth_ds = Dataset.from_csv(args.truth)
    return dataset, rules, truth_ds


def _parse_seeds(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(part) for part in text.split(",") if part]


def _config_from_args(args, strategy: str, seed: int) -> SessionConfig:
    return SessionConfig(
        strategy=strategy,
        budget=args.budget,
        batch_size=args.batch_size,
        seed=seed,
        threshold=args.threshold,
        k_reveal=args.k_reveal,
    )


def _cmd_repair(args) -> int:
    dataset, rules, _ = _load(args)
    config = SessionConfig(strategy="auto", threshold=args.threshold, seed=args.seed)
    session = Session(dataset, rules, config=config, learning=False)
    applied = run_auto(session)
    session.state.dataset.to_csv(args.out)
    metrics = session.metrics()
    print(
        f"applied {applied} updates, {int(metrics['violations'])} violation(s) remain; "
        f"wrote {args.out}"
    )
    return EXIT_OK


def _cmd_simulate(args) -> int:
    dataset, rules, truth = _load(args, truth=True)
    strategies = list(STRATEGIES) if args.strategy == "all" else [args.strategy]
    seeds = _parse_seeds(args.seeds) if args.seeds else [args.seed]
    for strategy in strategies:
        if strategy in SIMULATED_STRATEGIES and truth is None:
            print(
                f"error: --truth is required to simulate user feedback for "
                f"strategy {strategy!r}",
                file=sys.stderr,
            )
            return EXIT_SCHEMA
    reports = []
    for strategy in strategies:
        for seed in seeds:
            config = _config_from_args(args, strategy, seed)
            report = run_session(config, dataset, rules, truth)
            reports.append(report)
            log.info(
                "strategy=%s seed=%d improvement=%.4f labels=%d",
                strategy,
                seed,
                report.final["improvement"],
                report.final["user_labels"],
            )
    out = Path(args.out)
    if len(reports) == 1:
        out.write_text(reports[0].to_json())
    else:
        doc = {"version": 1, "runs": [r.to_document() for r in reports]}
        out.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    csv_path = out.with_suffix(".csv") if out.suffix == ".json" else Path(str(out) + ".csv")
    csv_path.write_text(reports_to_csv(reports))
    print(f"wrote {out} and {csv_path} ({len(reports)} run(s))")
    return EXIT_OK


def _cmd_rank(args) -> int:
    dataset, rules, _ = _load(args)
    session = Session(dataset, rules, config=SessionConfig(seed=args.seed), learning=False)
    groups = session.ranker.ranked()
    g_max = groups[0].gain if groups else 0.0
    effort = session.initial_dirty
    doc = {
        "version": 1,
        "dirty_tuples": session.initial_dirty,
        "pending": session.initial_pending,
        "groups": [
            {
                "rank": i + 1,
                "attribute": g.attribute,
                "value": g.value,
                "size": g.size,
                "gain": g.gain,
                "budget": group_budget(g, effort, g_max),
                "members": [session.wire_id(c) for c in g.members],
            }
            for i, g in enumerate(groups)
        ],
    }
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out} ({len(groups)} group(s))")
    else:
        print(text, end="")
    return EXIT_OK


def _cmd_inject(args) -> int:
    dataset = Dataset.from_csv(args.data)
    rules = parse_rules_file(args.rules, dataset.schema) if args.rules else None
    dirty, _ = inject_errors(dataset, ErrorSpec(tuple_rate=args.rate, seed=args.seed), rules)
    dirty.to_csv(args.out)
    print(f"wrote {args.out} (rate {args.rate}, seed {args.seed})")
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    dataset, rules, truth = _load(args, truth=True)
    config = SessionConfig(
        strategy="gdr",
        batch_size=args.batch_size,
        seed=args.seed,
        threshold=args.threshold,
        k_reveal=args.k_reveal,
    )
    session = Session(dataset, rules, truth, config, learning=True)
    app = create_app(session)
    print(f"serving repair session on http://{args.host}:{args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfdrepair",
        description="Rule-based interactive data repair.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    repair = sub.add_parser("repair", help="apply high-confidence updates")
    _add_io_flags(repair)
    repair.add_argument("--out", required=True, help="path for the repaired CSV")
    repair.add_argument("--threshold", type=float, default=0.8)
    repair.add_argument("--seed", type=int, default=0)
    repair.set_defaults(func=_cmd_repair)

    simulate = sub.add_parser("simulate", help="run sessions with a simulated user")
    _add_io_flags(simulate, truth=True)
    simulate.add_argument("--strategy", default="gdr", choices=list(STRATEGIES) + ["all"])
    simulate.add_argument("--budget", type=int, default=None)
    simulate.add_argument("--batch-size", type=int, default=5, dest="batch_size")
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--seeds", help="seed list, e.g. 1..5 or 1,3,7")
    simulate.add_argument("--threshold", type=float, default=0.8)
    simulate.add_argument("--k-reveal", type=int, default=3, dest="k_reveal")
    simulate.add_argument("--out", required=True, help="path for the JSON report")
    simulate.set_defaults(func=_cmd_simulate)

    rank = sub.add_parser("rank", help="print the initial group ranking")
    _add_io_flags(rank)
    rank.add_argument("--seed", type=int, default=0)
    rank.add_argument("--out", help="path for the JSON ranking (default stdout)")
    rank.set_defaults(func=_cmd_rank)

    inject = sub.add_parser("inject", help="corrupt a clean table for experiments")
    inject.add_argument("--data", required=True, help="CSV file with clean data")
    inject.add_argument("--rules", help="rule file, to warn if the input is not clean")
    inject.add_argument("--rate", type=float, default=0.30)
    inject.add_argument("--seed", type=int, default=0)
    inject.add_argument("--out", required=True, help="path for the corrupted CSV")
    inject.set_defaults(func=_cmd_inject)

    serve = sub.add_parser("serve", help="start the HTTP session service")
    _add_io_flags(serve, truth=True)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8400)
    serve.add_argument("--batch-size", type=int, default=5, dest="batch_size")
    serve.add_argument("--seed", type=int, default=0)
    serve.add_argument("--threshold", type=float, default=0.8)
    serve.add_argument("--k-reveal", type=int, default=3, dest="k_reveal")
    serve.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SchemaMismatch as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_SCHEMA
    except (RuleParseError, DataError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
