"""Unit tests for logging setup and the worker pool."""

import io
import logging
import math

from rich.console import Console
from rich.logging import RichHandler

from src.runtime.logging import configure_logging
from src.runtime.parallel import map_jobs


def _rich_handlers(logger):
    return [h for h in logger.handlers if isinstance(h, RichHandler)]


class TestConfigureLogging:
    """Test cases for configure_logging."""

    def test_levels(self):
        """Test the verbosity to level mapping."""
        console = Console(file=io.StringIO())
        assert configure_logging(0, console).level == logging.WARNING
        assert configure_logging(1, console).level == logging.INFO
        assert configure_logging(2, console).level == logging.DEBUG
        assert configure_logging(5, console).level == logging.DEBUG

    def test_reconfigure_replaces_handler(self):
        """Test that repeated calls keep a single rich handler."""
        console = Console(file=io.StringIO())
        configure_logging(0, console)
        root = configure_logging(1, console)
        assert len([h for h in _rich_handlers(root) if h.get_name() == "perplab-rich"]) == 1

    def test_messages_reach_console(self):
        """Test that records at the configured level are rendered."""
        buffer = io.StringIO()
        configure_logging(1, Console(file=buffer, width=200, color_system=None))
        logging.getLogger("perplab.test").info("fitted %d orders", 12)
        logging.getLogger("perplab.test").debug("hidden detail")
        text = buffer.getvalue()
        assert "fitted 12 orders" in text
        assert "hidden detail" not in text
        configure_logging(0, Console(file=io.StringIO()))


class TestMapJobs:
    """Test cases for map_jobs."""

    def test_in_process(self):
        """Test sequential execution keeps order."""
        assert map_jobs(lambda x: x * x, [3, 1, 2]) == [9, 1, 4]

    def test_empty(self):
        """Test that no items give no results."""
        assert map_jobs(math.sqrt, [], jobs=4) == []

    def test_process_pool_preserves_order(self):
        """Test that pooled results come back in input order."""
        items = [float(i) for i in range(12)]
        assert map_jobs(math.sqrt, items, jobs=3) == [math.sqrt(x) for x in items]
