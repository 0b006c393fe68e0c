"""Entry script for the smoothed dynamic programming tools (run from the tools/ directory)."""

import sys

from smoothed_dp.cli import main

if __name__ == "__main__":
    sys.exit(main())
