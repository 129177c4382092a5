"""
Main entry point for the bone-length attack toolkit.
"""

import sys

from cli import main

if __name__ == "__main__":
    sys.exit(main())
