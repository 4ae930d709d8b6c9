"""Runs the surface phase-field study command line interface."""
import pathlib
import sys


FOLDER = pathlib.Path(__file__).parent / "src"

sys.path.insert(0, str(FOLDER / "cli"))

from main import main


if __name__ == "__main__":
    sys.exit(main())
