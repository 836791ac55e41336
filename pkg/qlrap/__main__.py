"""
qlrap/__main__.py

Allows `python -m qlrap ...`.
"""

import sys

from qlrap.cli import main

if __name__ == "__main__":
    sys.exit(main())
