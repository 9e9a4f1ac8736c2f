#!/usr/bin/env python3
"""Run the bundled invariant battery and print the pass/fail table."""

import argparse

from czlab.cli import run
from czlab.config import parse_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/invariants")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--N", type=int, default=6)
    ap.add_argument("--samples", type=int, default=100)
    args = ap.parse_args()

    cfg = parse_config(
        {
            "verb": "invariant-suite",
            "grid": {"d": 1, "N": args.N},
            "seed": args.seed,
            "params": {"samples": args.samples},
            "output": {"format": "csv"},
        }
    )
    run(cfg, args.out)
    with open(f"{args.out}/invariants.csv", "r", encoding="utf-8") as fh:
        print(fh.read())


if __name__ == "__main__":
    main()
