#!/usr/bin/env python3
"""
Cantorlab command-line entry point.

Usage:
    python run_lab.py [--config PATH] <command> [options]

Commands:
    eval-p      exact P(I x [cyl]) for the strip measure
    eval-phat   raw and normalized mass of {k} x [cyl] for the c.e.-density measure
    converge    finite-depth conditionals along a prefix of beta (CSV)
    trim-demo   trim a test level and verify the trimming conditions
    decode      recover set membership from certified conditionals
    sample      draw prefixes of beta from the marginal
    selftest    run every property suite

Environment Variables:
    LOG_LEVEL: Logging level (default: INFO)
    CANTORLAB_CONFIG: Lab configuration used when --config is not given
    CANTORLAB_WORKERS: Threads used by selftest (default: 4)
"""

import sys
from pathlib import Path

# Add the app directory to Python path
app_dir = Path(__file__).parent / "app"
sys.path.insert(0, str(app_dir.parent))

# Import after path setup
from app.cli import main

if __name__ == "__main__":
    main()
