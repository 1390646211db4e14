#!/usr/bin/env python
"""hybridkernels command-line entry point.

Equivalent to the installed ``hybridkernels`` console script.
"""

from hybridkernels.cli import run

if __name__ == "__main__":
    run()
