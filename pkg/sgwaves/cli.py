"""
CLI entry point for the sg-waves command.
"""

import sys
from typing import List, Optional

from sgwaves.runner import app


def parse_and_dispatch(argv: Optional[List[str]] = None) -> int:
    """Run one sg-waves command and return its exit status."""
    try:
        app(args=argv, prog_name="sg-waves")
    except SystemExit as e:
        if e.code is None:
            return 0
        return e.code if isinstance(e.code, int) else 1
    return 0


def main():
    """Main entry point for the sg-waves CLI."""
    sys.exit(parse_and_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
