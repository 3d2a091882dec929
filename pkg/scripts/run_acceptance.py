"""Run the acceptance suite and print one line per criterion.

    python scripts/run_acceptance.py [extra pytest args]

Exit status is pytest's: 0 when every criterion passes.
"""

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    sys.exit(pytest.main([str(ROOT / "tests" / "test_acceptance.py"), "-q", "-p", "no:cacheprovider",
                          *sys.argv[1:]]))
