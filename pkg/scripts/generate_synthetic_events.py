#!/usr/bin/env python3
"""
Write a synthetic event log for the session benchmark.

Usage:
    uv run python scripts/generate_synthetic_events.py --out events.csv --users 5 --seed 0

Users share topics and words but differ in weekday, hour of day, label
names and sign-off tag, so CRF-MLP self models should separate users while
the linear CRF-PRCPT largely cannot.
"""

# Local helper script: not part of the package.

from __future__ import annotations

import argparse
import sys

from neurocrf_cog.sessions import save_event_log
from neurocrf_cog.synthetic_events import generate_synthetic_event_log


def _parse_args(argv: list[str]) -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Generate a synthetic event log CSV.")
    parser.add_argument("--out", default="events.csv")
    parser.add_argument("--users", type=int, default=5)
    parser.add_argument("--sessions", type=int, default=40, help="sessions per user")
    parser.add_argument("--seed", type=int, default=0)
    return parser.parse_args(argv)


if __name__ == "__main__":
    args = _parse_args(sys.argv[1:])
    events = generate_synthetic_event_log(
        args.users, args.seed, sessions_per_user=args.sessions
    )
    path = save_event_log(events, args.out)
    print(f"wrote {len(events)} events to {path}")
