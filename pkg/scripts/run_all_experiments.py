"""Run every config in configs/ through the genlab CLI and print one status line per run.

    python scripts/run_all_experiments.py [--only gde_smoke ucfail_linear] [--out out] [--threads N]

Each run writes into <out>/<config name>/. Exit status is the largest one seen.
"""

import argparse
import os
import sys
import time
from pathlib import Path

from genlab.cli import main as genlab_main

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--only", nargs="*", help="config stems to run (default: all)")
    ap.add_argument("--out", default=str(ROOT / "out"))
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    configs = sorted((ROOT / "configs").glob("*.json"))
    if args.only:
        configs = [c for c in configs if c.stem in args.only]
    worst = 0
    for cfg in configs:
        os.environ["GENLAB_OUT"] = str(Path(args.out) / cfg.stem)
        t = time.perf_counter()
        rc = genlab_main(["run", str(cfg), "--threads", str(args.threads)])
        print(f"[{cfg.stem}] exit {rc} in {time.perf_counter() - t:.0f}s", flush=True)
        worst = max(worst, rc)
    return worst


if __name__ == "__main__":
    sys.exit(main())
