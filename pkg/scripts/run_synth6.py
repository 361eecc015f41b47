"""Run the synth6 benchmark and print the condition table."""

import sys

from parrom.cli import main

if __name__ == "__main__":
    sys.exit(main(["bench", "synth6", "--format", "table"] + sys.argv[1:]))
