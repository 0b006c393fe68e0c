"""CLI for the smoothed dynamic programming tools."""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
