"""``tsn5g-syncsim`` command line.

    tsn5g-syncsim run --config scenario.ini [--scenario S] [--seed N] [--duration SEC] [--out-dir DIR]
    tsn5g-syncsim summarize runs/sfn_anchored-seed1/offsets.csv
    tsn5g-syncsim compare runs/*/summary.csv [--assert-requirements]

Exit codes: 0 success, 1 malformed input, 2 config error, 3 a scenario missed
the 1 ms requirement while ``--assert-requirements`` was given.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from fractions import Fraction
from pathlib import Path

from tsn5g_syncsim.harness.config import SCENARIOS, ConfigError, ScenarioConfig, load_config
from tsn5g_syncsim.harness.scenarios import run_scenario
from tsn5g_syncsim.harness.summary import MalformedTrace, RunSummary, compare, summarize

OUT_DIR_ENV = "TSN5G_SYNCSIM_OUT_DIR"
DEFAULT_OUT_DIR = "runs"

log = logging.getLogger("tsn5g_syncsim")


def _duration_ns(raw: str) -> int:
    try:
        value = Fraction(raw) * 1_000_000_000
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {raw!r}") from None
    if value <= 0 or value.denominator != 1:
        raise argparse.ArgumentTypeError("duration must be a positive whole number of ns")
    return int(value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsn5g-syncsim", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario and write traces + summary")
    run.add_argument("--config", type=Path, help="INI scenario file (defaults are used if omitted)")
    run.add_argument("--scenario", choices=SCENARIOS)
    run.add_argument("--seed", type=int)
    run.add_argument("--duration", type=_duration_ns, metavar="SECONDS")
    run.add_argument("--out-dir", type=Path)
    run.add_argument("--assert-requirements", action="store_true", help="exit 3 if max offset >= 1 ms")

    summ = sub.add_parser("summarize", help="recompute a summary from a trace CSV or run directory")
    summ.add_argument("trace", type=Path)

    comp = sub.add_parser("compare", help="tabulate two or more summary.csv files")
    comp.add_argument("summaries", type=Path, nargs="+")
    comp.add_argument("--csv", type=Path, help="also write the table as CSV")
    comp.add_argument("--assert-requirements", action="store_true")
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    cfg = cfg.with_overrides(scenario=args.scenario, seed=args.seed, duration_ns=args.duration)
    out_root = args.out_dir or os.environ.get(OUT_DIR_ENV) or cfg.out_dir or DEFAULT_OUT_DIR
    run_dir = Path(out_root) / f"{cfg.scenario}-seed{cfg.seed}"
    run_dir.mkdir(parents=True, exist_ok=True)

    log.info("running %s (seed %d, %d ns)", cfg.scenario, cfg.seed, cfg.duration_ns)
    result = run_scenario(cfg)
    for name, text in result.traces.items():
        (run_dir / name).write_text(text)
    (run_dir / "summary.csv").write_text(result.summary.to_csv())
    print(result.summary.to_csv(), end="")
    print(f"wrote {run_dir}", file=sys.stderr)
    if args.assert_requirements and not result.summary.meets_requirement:
        return 3
    return 0


def _cmd_summarize(args: argparse.Namespace) -> int:
    print(summarize(args.trace).to_csv(), end="")
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    if len(args.summaries) < 2:
        print("compare needs at least two summary files", file=sys.stderr)
        return 1
    summaries = []
    for p in args.summaries:
        try:
            summaries.append(RunSummary.from_csv(p.read_text()))
        except OSError as exc:
            raise MalformedTrace(f"{p}: {exc.strerror}") from None
    table = compare(*summaries)
    print(table.to_text(), end="")
    if args.csv:
        args.csv.write_text(table.to_csv())
    if args.assert_requirements and not table.all_pass:
        return 3
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handlers = {"run": _cmd_run, "summarize": _cmd_summarize, "compare": _cmd_compare}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except MalformedTrace as exc:
        print(f"malformed trace: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
