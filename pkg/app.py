"""
Entry point for the frugal splitting command line.

Usage:
    python app.py validate --scheme ryu:6
    python app.py run --scheme minimal:5 --problem consensus:1,2,3,4,5
    python app.py simulate --graph petersen --problem random:10,2 --audit --check
    python app.py graph-info petersen
"""

import sys
from pathlib import Path

# Make the splitting package importable when run from any directory
sys.path.insert(0, str(Path(__file__).parent.absolute()))

from splitting.cli import main

if __name__ == "__main__":
    sys.exit(main())
