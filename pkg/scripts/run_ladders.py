"""Run every ladder config in configs/ and write results under out/<config name>/.

Usage: python3 scripts/run_ladders.py [--out DIR] [--workers N] [CONFIG ...]
"""

import argparse
import sys
from pathlib import Path

from finslab.cli import dispatch

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("configs", nargs="*", type=Path)
    ap.add_argument("--out", type=Path, default=ROOT / "out")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    configs = args.configs or sorted((ROOT / "configs").glob("*.cfg"))
    status = {}
    for cfg in configs:
        print(f"== {cfg.name}", flush=True)
        status[cfg.name] = dispatch(["rates", "--config", str(cfg), "--out",
                                     str(args.out / cfg.stem), "--workers", str(args.workers)])
    print()
    for name, code in status.items():
        print(f"{'ok  ' if code == 0 else 'FAIL'} {name} (exit {code})")
    sys.exit(max(status.values(), default=0))


if __name__ == "__main__":
    main()
