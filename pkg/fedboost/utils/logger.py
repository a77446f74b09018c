"""Logging helper functions."""

from __future__ import annotations

import logging
from typing import Any, Type

import structlog

from ..exceptions import FedBoostError

LOGGER = structlog.get_logger()


def configure_logging(level: str = "INFO") -> None:
    """
    Configure structlog to drop events below the given level.

    Args:
        level: stdlib level name, e.g. "DEBUG", "INFO" or "WARNING".

    Raises:
        ValueError: Unknown level name.
    """
    numeric_level = logging.getLevelName(level.upper())
    if not isinstance(numeric_level, int):
        raise ValueError(f"Unknown log level: {level}")
    structlog.configure(wrapper_class=structlog.make_filtering_bound_logger(numeric_level))


def log(message: str, **fields: Any) -> None:
    """Log a response.

    Args:
         message: plain text message.
         fields: structured key/values attached to the event.
    """
    LOGGER.info(message, **fields)


def log_debug(message: str, **fields: Any) -> None:
    """Log a debug event.

    Args:
         message: plain text message.
         fields: structured key/values attached to the event.
    """
    LOGGER.debug(message, **fields)


def log_and_raise_error(message: str, error: Type[FedBoostError] = FedBoostError):
    """Log a response and raise an error.

    Args:
         message: plain error text message.
         error: exception class to raise.

    Raises:
        FedBoostError: Reraise with the error message.
    """
    LOGGER.error(message)
    raise error(message)


if not structlog.is_configured():
    configure_logging()
