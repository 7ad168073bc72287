#!/usr/bin/env python3
"""Main entry point for the stochastic NLS simulator"""
import sys

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
