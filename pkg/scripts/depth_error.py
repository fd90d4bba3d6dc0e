#!/usr/bin/env python3
"""Depth error along the camera ray, tracked with and without the RV stage."""
import argparse

from bevtrack.config import TrackerConfig
from bevtrack.experiments import depth_error_spec, no_coast_config, track_and_count


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--meters", type=float, default=8.0)
    parser.add_argument("--max-frames", type=int, default=6, help="longest run of pushed detections to try")
    args = parser.parse_args()

    print(f"{'lifecycle':<10} {'pushed':>6} {'RV':>3} {'IDSW':>5} {'FP':>4} {'FN':>4}")
    for name, cfg in (("no-coast", no_coast_config()), ("default", TrackerConfig())):
        for n in range(1, args.max_frames + 1):
            spec = depth_error_spec(n_frames=n, meters=args.meters)
            for rv in (False, True):
                c = track_and_count(spec, cfg.with_overrides(rv_enabled=rv))
                print(f"{name:<10} {n:>6} {'y' if rv else 'n':>3} {c.idsw:>5} {c.fp:>4} {c.fn:>4}")


if __name__ == "__main__":
    main()
