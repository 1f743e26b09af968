"""
``python -m src.cli`` runs the same command line as the ``replaylab``
console script, e.g. ``python -m src.cli repro fig1``. The exit code of
the subcommand (0 ok, 2 config error, 3 runtime error) is passed on.
"""

import sys

from .main import main

sys.exit(main())
