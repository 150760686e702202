#!/usr/bin/python3

import multiprocessing
import sys

from entrolim.cli import main

if __name__ == "__main__":
    multiprocessing.freeze_support()
    sys.exit(main())
