"""Command-line entry point: ``invfor <subcommand> [flags]``.

Subcommands: simulate, cv, estimate, forecast, backtest, report.  Every
failure exits with status 1 and a single ``error: <Kind>: <message>`` line on
stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path


from . import experiment
from .data import TimeSeriesTable, format_timestamp, parse_timestamp
from .errors import ConfigError, InvforError
from .estimation import InverseModel

log = logging.getLogger("invfor")


def _config(args) -> experiment.ExperimentConfig:
    overrides = {"seed": args.seed, "blocks": args.blocks, "k": args.k}
    if getattr(args, "out", None) and args.command == "simulate":
        overrides["out"] = args.out
    return experiment.ExperimentConfig.load(args.config, overrides=overrides)


def _dataset(args) -> TimeSeriesTable:
    if not args.dataset:
        raise ConfigError("--dataset is required")
    return TimeSeriesTable.from_csv(args.dataset)


def _write(path: str | None, text: str) -> None:
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_simulate(args) -> None:
    cfg = _config(args)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for mode, table in experiment.simulate_datasets(cfg).items():
        path = out / f"{mode}.csv"
        table.to_csv(path)
        log.info("wrote %s (%d rows)", path, len(table))


def cmd_cv(args) -> None:
    cfg = _config(args)
    table = _dataset(args)
    grid = (args.k,) if args.k is not None else None
    result = experiment.run_cv(cfg, table, grid)
    _write(args.out, result.to_csv())
    print(f"best_k={result.best_k!r}", file=sys.stderr)


def _choose_k(cfg, table) -> float:
    if cfg.k is not None:
        return cfg.k
    return experiment.run_cv(cfg, table).best_k


def cmd_estimate(args) -> None:
    cfg = _config(args)
    table = _dataset(args)
    model = experiment.estimate(cfg, table, _choose_k(cfg, table))
    _write(args.out, model.dumps())


def cmd_forecast(args) -> None:
    if not args.model:
        raise ConfigError("--model is required")
    model = InverseModel.load(args.model)
    table = _dataset(args)
    if args.at:
        when = parse_timestamp(args.at)
        try:
            row = table.timestamps.index(when)
        except ValueError:
            raise ConfigError(f"timestamp {args.at} not in dataset") from None
    else:
        row = len(table) - 1
    fc = experiment.forecast_row(model, table, row)
    _write(args.out, "timestamp,forecast,pmin,pmax\n"
                     f"{format_timestamp(table.timestamps[row])},{float(fc.load[0])!r},"
                     f"{float(fc.pmin[0])!r},{float(fc.pmax[0])!r}\n")


def cmd_backtest(args) -> None:
    cfg = _config(args)
    table = _dataset(args)
    K = _choose_k(cfg, table)
    name = args.name or Path(args.dataset).stem
    report = experiment.run_backtest(cfg, table, K, name)
    _write(args.out, report.to_csv())


def cmd_report(args) -> None:
    if not args.reports:
        raise ConfigError("report needs at least one backtest CSV")
    reports = [experiment.BacktestReport.from_csv(p) for p in args.reports]
    _write(args.out, experiment.summary_csv(reports))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value experiment file")
    common.add_argument("--dataset", help="dataset CSV")
    common.add_argument("--out", help="output file (directory for simulate)")
    common.add_argument("--seed", type=int)
    common.add_argument("--k", type=float, help="fixed penalty K (skips cross-validation)")
    common.add_argument("--blocks", type=int, help="number of utility blocks")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="invfor", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="simulate flex and no-flex datasets")
    sub.add_parser("cv", parents=[common], help="cross-validate K; writes the (K, RMSE) curve")
    sub.add_parser("estimate", parents=[common], help="fit a model on the last training window")
    p = sub.add_parser("forecast", parents=[common], help="one-step forecast of a dataset row")
    p.add_argument("--model", help="model document from `estimate`")
    p.add_argument("--at", help="timestamp of the row to forecast (default: last row)")
    p = sub.add_parser("backtest", parents=[common], help="rolling one-step backtest")
    p.add_argument("--name", help="dataset label in the report (default: file stem)")
    p = sub.add_parser("report", parents=[common], help="Table-style metrics summary")
    p.add_argument("reports", nargs="*", help="backtest CSVs")
    return parser


COMMANDS = {
    "simulate": cmd_simulate,
    "cv": cmd_cv,
    "estimate": cmd_estimate,
    "forecast": cmd_forecast,
    "backtest": cmd_backtest,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        COMMANDS[args.command](args)
    except InvforError as exc:
        print(f"error: {type(exc).__name__}: {' '.join(str(exc).split())}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {' '.join(str(exc).split())}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
