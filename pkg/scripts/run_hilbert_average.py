#!/usr/bin/env python3
"""Average Petermichl pairings over random translated grids and fit the
proportionality constant against the quadrature Hilbert pairing."""

import argparse
import json

from czlab.cli import run
from czlab.config import parse_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/hilbert")
    ap.add_argument("--seed", type=int, default=424242)
    ap.add_argument("--N", type=int, default=10)
    ap.add_argument("--count", type=int, default=10000)
    args = ap.parse_args()

    cfg = parse_config(
        {
            "verb": "hilbert-approx",
            "grid": {"d": 1, "N": args.N},
            "seed": args.seed,
            "params": {"count": args.count},
            "output": {"format": "csv"},
        }
    )
    manifest = run(cfg, args.out)
    print(json.dumps(manifest["constants"], indent=2))
    print(f"per-pair table written to {args.out}/hilbert_approx.csv")


if __name__ == "__main__":
    main()
