#!/usr/bin/env python3
"""Cost function x RV stage sweep over seeded noisy synthetic scenes."""
import argparse
import json

from bevtrack.config import load_config
from bevtrack.experiments import ablation_rows, ablation_specs, format_rows
from bevtrack.geometry import COST_KINDS


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=50, help="number of scenes (seeds 0..N-1)")
    parser.add_argument("--config", help="tracker config JSON")
    parser.add_argument("--bev-only", action="store_true", help="skip the RV-enabled rows")
    parser.add_argument("--out", help="also write the rows as JSON")
    args = parser.parse_args()

    rv = (False,) if args.bev_only else (False, True)
    rows = ablation_rows(ablation_specs(range(args.seeds)), load_config(args.config), COST_KINDS, rv)
    print(format_rows(rows))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump({"rows": rows}, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
