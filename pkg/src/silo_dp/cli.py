"""Command line entry point: ``silo-dp <command> --config FILE --seed N --out DIR``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import traceback

from .errors import SiloDPError
from .experiments import (
    Harness,
    load_config,
    run_audit,
    run_baselines,
    run_experiment1,
    run_experiment2,
    run_experiment3,
    run_generate,
)

# commands that run on the prepared partner datasets
HARNESS_COMMANDS = {
    "baseline": run_baselines,
    "exp1": run_experiment1,
    "exp2": run_experiment2,
    "exp3": run_experiment3,
}
COMMANDS = ("generate", *HARNESS_COMMANDS, "audit")

EXIT_USAGE = 2
EXIT_FAILURE = 1


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="silo-dp", description="Private model aggregation experiments.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="YAML or JSON file with ExperimentConfig fields")
    p.add_argument("--seed", type=int, required=True, help="root seed (overrides the config's seed)")
    p.add_argument("--out", required=True, help="output directory for CSV tables and summary.json")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _error_record(kind: str, message: str, command: str | None, **extra) -> dict:
    rec = {"status": "error", "kind": kind, "message": message, "command": command}
    rec.update(extra)
    return rec


def _emit_error(record: dict, out_dir: str | None) -> None:
    text = json.dumps(record, sort_keys=True)
    print(text, file=sys.stderr)
    if out_dir:
        try:
            os.makedirs(out_dir, exist_ok=True)
            with open(os.path.join(out_dir, "error.json"), "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        except OSError:
            pass


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        _emit_error(_error_record("usage", str(exc), None), None)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = dataclasses.replace(load_config(args.config), seed=args.seed)
        if args.command == "generate":
            report = run_generate(cfg, args.out)
        elif args.command == "audit":
            report = run_audit(cfg)
        else:
            report = HARNESS_COMMANDS[args.command](cfg, Harness(cfg))
        report.write(args.out)
    except SiloDPError as exc:
        extra = {"row": exc.row} if getattr(exc, "row", None) is not None else {}
        _emit_error(_error_record(exc.kind, str(exc), args.command, **extra), args.out)
        return EXIT_USAGE if exc.kind == "configuration" else EXIT_FAILURE
    except OSError as exc:
        _emit_error(_error_record("io", str(exc), args.command), args.out)
        return EXIT_FAILURE
    except Exception as exc:  # noqa: BLE001 - last-resort record for unexpected failures
        _emit_error(_error_record("internal", f"{type(exc).__name__}: {exc}", args.command,
                                  traceback=traceback.format_exc().splitlines()[-3:]), args.out)
        return EXIT_FAILURE
    return 0


if __name__ == "__main__":
    sys.exit(main())
