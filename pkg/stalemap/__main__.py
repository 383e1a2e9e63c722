"""Stalemap module / main support."""

import sys
from signal import SIGINT, signal

from stalemap.cli import run_cli


def handler_exit(*_):
    """Signal handler."""
    sys.exit(1)


def main():
    """Standard main function."""
    signal(SIGINT, handler_exit)
    return run_cli(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
