#!/usr/bin/env python3
"""
Command-line runner

    python run_cli.py propagator --mass 1 --beta 2 --format csv
    python run_cli.py cluster --powers 2,2 --beta inf --radii 5,6,7,8,9,10
    python run_cli.py kms correct --obs phi4 --int phi4 --order 1 --vanhove 2..5
    python run_cli.py verify --epsilon 1 --depth 2
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
