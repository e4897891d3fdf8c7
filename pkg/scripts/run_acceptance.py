"""Run the full verification suite and write one JSON report per criterion.

    python scripts/run_acceptance.py [--out results/acceptance]
"""

import argparse
import sys

from sepergy import cli

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results/acceptance")
    args = ap.parse_args()
    sys.exit(cli.main(["verify", "all", "--out", args.out]))
