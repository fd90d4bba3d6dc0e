#!/usr/bin/env python3
"""Motion metrics of three velocity estimators on braking scenes."""
import argparse

from bevtrack.config import load_config
from bevtrack.experiments import VELOCITY_METHODS, motion_spec, motion_table

COLUMNS = (("vae", "VAE deg"), ("vne", "VNE m/s"), ("vse", "VSE m/s"), ("vde_frames", "VDE frm"), ("vde_seconds", "VDE s"), ("vaie", "VAIE deg"), ("vir", "VIR"))


def fmt(value) -> str:
    return f"{'-':>9}" if value is None else f"{value:>9.3f}"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=100)
    parser.add_argument("--config", help="tracker config JSON")
    args = parser.parse_args()

    table = motion_table([motion_spec(s) for s in range(args.seeds)], load_config(args.config))
    print(f"{'method':<16}" + "".join(f"{title:>9}" for _, title in COLUMNS))
    for method in VELOCITY_METHODS:
        print(f"{method:<16}" + "".join(fmt(table[method][key]) for key, _ in COLUMNS))


if __name__ == "__main__":
    main()
