#!/usr/bin/env python3
"""Run one of the test suites: quick (default), bounds, or slow."""

from __future__ import annotations

import argparse
import subprocess
import sys

SUITES = {
    "quick": ["tests"],
    "bounds": ["tests/bounds", "tests/unit/test_uncertainty.py"],
    "slow": ["tests", "-m", "slow"],
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--bounds", dest="suite", action="store_const", const="bounds",
                       help="sample-size and scenario-bound reference cases only")
    group.add_argument("--slow", dest="suite", action="store_const", const="slow",
                       help="full-scale runs (hundreds of seeds)")
    parser.set_defaults(suite="quick")
    args, passthrough = parser.parse_known_args(argv)
    cmd = [sys.executable, "-m", "pytest", *SUITES[args.suite], *passthrough]
    return subprocess.call(cmd)


if __name__ == "__main__":
    raise SystemExit(main())
