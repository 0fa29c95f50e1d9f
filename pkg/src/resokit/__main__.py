"""Entry point for python -m resokit."""

import sys

from .cli import run

if __name__ == "__main__":
    sys.exit(run())
