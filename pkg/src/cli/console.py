"""Console utilities for the command line interface."""
import logging
import pathlib
import sys
from typing import TextIO


CLI_FOLDER = pathlib.Path(__file__).parent
CONFIG_FOLDER = CLI_FOLDER / "configs"

GREEN = "\033[32m"
RED = "\033[31m"
RESET = "\033[0m"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def format_seconds(seconds: float) -> str:
    """Converts seconds to HH:MM:SS"""
    seconds = int(seconds)
    hours = str(seconds // 3600).zfill(2)
    minutes = str(seconds % 3600 // 60).zfill(2)
    seconds = str(seconds % 60).zfill(2)
    return f"{hours}:{minutes}:{seconds}"


def configure_logging(verbose: bool) -> None:
    """Routes library logging to stderr, DEBUG if verbose else WARNING."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format=LOG_FORMAT, stream=sys.stderr, force=True)


class ConsoleLogger:
    """Console logging for good, neutral and bad messages."""

    def __init__(
        self, stream: TextIO | None = None,
        error_stream: TextIO | None = None, colour: bool | None = None
    ) -> None:
        self.stream = stream or sys.stdout
        self.error_stream = error_stream or sys.stderr
        if colour is None:
            colour = hasattr(self.stream, "isatty") and self.stream.isatty()
        self.colour = colour

    def _log(self, text: str, colour: str, stream: TextIO) -> None:
        if self.colour and colour:
            text = f"{colour}{text}{RESET}"
        print(text, file=stream, flush=True)

    def log_good(self, text: str) -> None:
        """Logs a positive message, including successes."""
        self._log(text, GREEN, self.stream)

    def log_neutral(self, text: str) -> None:
        """Logs a neutral message (general information)."""
        self._log(text, "", self.stream)

    def log_bad(self, text: str) -> None:
        """Logs a negative message, including errors."""
        self._log(text, RED, self.error_stream)
