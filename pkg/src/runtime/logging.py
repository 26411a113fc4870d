"""Logging configuration for perplab."""

import logging

from rich.console import Console
from rich.logging import RichHandler

_HANDLER_NAME = "perplab-rich"

LEVELS = {0: logging.WARNING, 1: logging.INFO}


def configure_logging(verbosity: int = 0, console: Console = None) -> logging.Logger:
    """
    Install a rich handler on the root logger.

    Calling it again replaces the previously installed handler, so the CLI
    and tests can reconfigure freely.

    Args:
        verbosity: 0 = WARNING, 1 = INFO, 2 or more = DEBUG
        console: Console to log to (defaults to stderr)

    Returns:
        The root logger
    """
    root = logging.getLogger()
    for handler in list(root.handlers):
        if handler.get_name() == _HANDLER_NAME:
            root.removeHandler(handler)

    handler = RichHandler(
        console=console or Console(stderr=True),
        show_path=verbosity >= 2,
        rich_tracebacks=verbosity >= 2,
        markup=False,
    )
    handler.set_name(_HANDLER_NAME)
    handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
    root.addHandler(handler)
    root.setLevel(LEVELS.get(verbosity, logging.DEBUG))
    return root
