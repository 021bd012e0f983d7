"""Structured logging setup for hgcnet components."""

import logging
import sys
from pathlib import Path
from typing import Any, List, Optional, TextIO

import structlog

from .config import LoggingConfig


class LogManager:
    """Manage logging configuration and setup."""

    def __init__(self, config: Optional[LoggingConfig] = None, stream: Optional[TextIO] = None):
        self.config = config or LoggingConfig()
        self.stream = stream
        self._setup_logging()

    def _processors(self) -> List[Any]:
        processors: List[Any] = [
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.CallsiteParameterAdder(
                {structlog.processors.CallsiteParameter.MODULE}
            ),
            structlog.processors.TimeStamper(fmt="iso", utc=True),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
        ]
        if self.config.format == "json":
            processors.append(structlog.processors.JSONRenderer(sort_keys=True))
        else:
            processors.append(structlog.dev.ConsoleRenderer(colors=False))
        return processors

    def _setup_logging(self) -> None:
        """Set up structlog for the whole process."""
        level = getattr(logging, self.config.level.upper(), logging.INFO)

        if self.config.file:
            path = Path(self.config.file)
            path.parent.mkdir(parents=True, exist_ok=True)
            # Kept open for the process lifetime; structlog writes through it.
            target: TextIO = path.open("a", encoding="utf-8")
        else:
            target = self.stream or sys.stderr

        structlog.configure(
            processors=self._processors(),
            wrapper_class=structlog.make_filtering_bound_logger(level),
            logger_factory=structlog.PrintLoggerFactory(file=target),
            cache_logger_on_first_use=False,
        )

    def get_logger(self, name: str) -> Any:
        """Get a logger with the specified name."""
        return structlog.get_logger(name)


def setup_logging(config: Optional[LoggingConfig] = None, stream: Optional[TextIO] = None) -> None:
    """Set up logging configuration."""
    LogManager(config, stream=stream).get_logger(__name__).debug(
        "logging_configured", level=(config or LoggingConfig()).level
    )
