"""``genlab run|validate|report``. Exit codes: 0 ok, 1 experiment assertion failed, 2 config error."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from .expcli import ConfigError, load_config, output_dir, run_experiment, write_artifacts

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="genlab", description="Generalization-measurement experiments.")
    sub = p.add_subparsers(dest="verb", required=True)
    run = sub.add_parser("run", help="run an experiment config and write artifacts")
    run.add_argument("config")
    run.add_argument("--seed", type=int, default=None, help="override the config's seed")
    run.add_argument("--threads", type=int, default=1, help="worker processes for sweep points")
    run.add_argument("--deterministic", action="store_true",
                     help="run sweep points serially in canonical order")
    run.add_argument("--out", default=None, help="output directory (GENLAB_OUT takes precedence)")
    val = sub.add_parser("validate", help="check a config against the schema")
    val.add_argument("config")
    rep = sub.add_parser("report", help="print the summary of a finished run")
    rep.add_argument("dir")
    return p


def _run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be nonnegative")
        cfg = replace(cfg, seed=args.seed)
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    threads = 1 if args.deterministic else args.threads
    res = run_experiment(cfg, threads=threads)
    out = Path(args.out) if args.out and not os.environ.get("GENLAB_OUT") else output_dir(cfg)
    for p in write_artifacts(res, out):
        print(p)
    for a in res.assertions:
        print(f"{'PASS' if a['passed'] else 'FAIL'} {a['metric']} {a['op']} {a['value']} (observed {a['observed']})")
    return EXIT_OK if res.passed else EXIT_ASSERT


def _report(args) -> int:
    path = Path(args.dir) / "report.json"
    if not path.is_file():
        raise ConfigError(f"{path}: no report found")
    rep = json.loads(path.read_text())
    print(f"experiment {rep['experiment']}  seed {rep['seed']}  config {rep['config_hash']}")
    print(json.dumps(rep["summary"], indent=2, sort_keys=True))
    for a in rep.get("assertions", []):
        print(f"{'PASS' if a['passed'] else 'FAIL'} {a['metric']} {a['op']} {a['value']} (observed {a['observed']})")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.verb == "validate":
            load_config(args.config)
            print(f"{args.config}: ok")
            return EXIT_OK
        if args.verb == "report":
            return _report(args)
        return _run(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
