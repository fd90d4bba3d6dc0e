#!/usr/bin/env python3
"""Time the tracking loop on a large synthetic scene."""
import argparse

from bevtrack.config import load_config
from bevtrack.experiments import throughput_spec, time_tracking


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--frames", type=int, default=1000)
    parser.add_argument("--objects", type=int, default=50)
    parser.add_argument("--config", help="tracker config JSON")
    args = parser.parse_args()

    elapsed = time_tracking(throughput_spec(args.frames, args.objects), load_config(args.config))
    print(f"{args.frames} frames x {args.objects} objects: {elapsed:.2f} s ({args.frames / elapsed:.0f} frames/s)")


if __name__ == "__main__":
    main()
