# scripts/profiles.py
"""
CLI script for simulating, translating, fitting, assigning and benchmarking.
"""

import sys
from pathlib import Path

# Add parent directory to path
sys.path.append(str(Path(__file__).parent.parent))

from careprofiles.cli import cli


if __name__ == '__main__':
    cli()
