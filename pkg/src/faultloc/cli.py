"""Command-line entry point: ``faultloc {generate,train,place,evaluate,report}``.

Every subcommand reads one YAML config (``--config``), accepts ``--seed`` to
override the master seed, and writes into ``--out``. Exit status is 0 on
success, 1 for invalid input (config, case or data files) and 2 when a
computation fails.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from .dataset import save_dataset
from .errors import ConfigError
from .experiment import (EvalReport, ExperimentConfig, build_datasets, error_kind, load_grid,
                         run_experiment, run_placement)
from .report import emit_report

log = logging.getLogger("faultloc")

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="faultloc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "generate": "generate (or load) train/test datasets",
        "train": "train a classifier and save it",
        "place": "select the measured bus set",
        "evaluate": "run the full pipeline and write report.json",
        "report": "turn report.json files into CSV tables / charts",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--seed", type=_seed, default=None)
        p.add_argument("--out", type=Path, default=Path("out"))
    return parser


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    return cfg.with_seed(args.seed) if args.seed is not None else cfg


def cmd_generate(args) -> int:
    cfg = _load_config(args)
    spec = load_grid(cfg)
    train, test = build_datasets(cfg, spec)
    save_dataset(train, args.out / "train.csv")
    save_dataset(test, args.out / "test.csv")
    print(f"wrote {len(train)} training and {len(test)} test scenarios to {args.out}")
    return EXIT_OK


def _finish(report: EvalReport, out: Path) -> int:
    report.save(out / "report.json")
    if report.failed:
        print(f"{report.failed_stage} failed: {report.error}", file=sys.stderr)
        return EXIT_INVALID if report.error_kind == "validation" else EXIT_FAILED
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config(args)
    out = args.out
    report = run_experiment(cfg, model_out=out / "model.bin", placement_out=out / "placement.json",
                            history_out=out / "history.csv", evaluate=False)
    code = _finish(report, out)
    if code == EXIT_OK:
        print(f"model written to {out / 'model.bin'}")
    return code


def cmd_place(args) -> int:
    cfg = _load_config(args)
    placement = run_placement(cfg)
    placement.save(args.out / "placement.json")
    print(f"{placement.algorithm}: {len(placement.buses)}/{placement.K} buses {list(placement.buses)}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    report = run_experiment(cfg, placement_out=args.out / "placement.json")
    code = _finish(report, args.out)
    if code == EXIT_OK:
        print(f"LAR {report.lar:.4f}  ARC {report.arc:.3f}")
    return code


def cmd_report(args) -> int:
    raw = yaml.safe_load(args.config.read_text(encoding="utf-8")) or {}
    if not isinstance(raw, dict) or not isinstance(raw.get("reports", []), list):
        raise ConfigError("report config needs a 'reports' list")
    base = args.config.parent
    reports = [EvalReport.load(p if Path(p).is_absolute() else base / p) for p in raw.get("reports", [])]
    formats = raw.get("formats", ["csv"])
    for path in emit_report(reports, args.out, formats):
        print(path)
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "place": cmd_place,
            "evaluate": cmd_evaluate, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except Exception as exc:
        kind = error_kind(exc)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        log.debug("traceback", exc_info=True)
        return EXIT_INVALID if kind == "validation" else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
