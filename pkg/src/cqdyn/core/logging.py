"""Structured logging for numerical runs.

Records are rendered by structlog and routed through the standard library
to stderr. Numpy scalars and arrays passed as event fields are turned into
plain Python values before rendering, so JSON output never sees them.
"""

import logging
import sys
from typing import Any, cast

import numpy as np
import structlog
from structlog.types import EventDict, Processor

from cqdyn.core.config import settings

ROOT_LOGGER = "cqdyn"
# Arrays longer than this are logged by shape only.
MAX_LOGGED_ELEMENTS = 16


def _plain(value: Any) -> Any:
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, complex):
        return value.real if value.imag == 0 else {"re": value.real, "im": value.imag}
    if isinstance(value, np.ndarray):
        if value.size > MAX_LOGGED_ELEMENTS:
            return {"shape": list(value.shape), "dtype": str(value.dtype)}
        return [_plain(item) for item in value.tolist()] if value.ndim else _plain(value.item())
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    return value


def numpy_to_builtin(logger: Any, method_name: str, event_dict: EventDict) -> EventDict:
    """Replace numpy values in the event with builtins the renderers accept."""
    for key, value in event_dict.items():
        event_dict[key] = _plain(value)
    return event_dict


def add_run_context(logger: Any, method_name: str, event_dict: EventDict) -> EventDict:
    """Tag every record with the run settings."""
    event_dict.setdefault("toolkit", f"{settings.app_name}/{settings.app_version}")
    event_dict.setdefault("environment", settings.environment)
    event_dict.setdefault("threads", settings.threads)
    return event_dict


def build_processors(log_format: str) -> list[Processor]:
    """Processor chain for ``json`` or ``console`` rendering."""
    processors: list[Processor] = [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.add_logger_name,
        structlog.stdlib.add_log_level,
        structlog.processors.TimeStamper(fmt="iso", utc=True),
        add_run_context,
        numpy_to_builtin,
    ]
    if log_format == "json":
        processors += [structlog.processors.format_exc_info, structlog.processors.JSONRenderer(sort_keys=True)]
    else:
        processors += [structlog.processors.ExceptionPrettyPrinter(), structlog.dev.ConsoleRenderer(colors=False)]
    return processors


def setup_logging() -> None:
    """Configure structlog; stdout is left to the command line tools."""
    logging.basicConfig(format="%(message)s", stream=sys.stderr, level=settings.log_level.upper())
    logging.getLogger(ROOT_LOGGER).setLevel(settings.log_level.upper())

    structlog.configure(
        processors=build_processors(settings.log_format),
        wrapper_class=structlog.stdlib.BoundLogger,
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )


def get_logger(name: str | None = None) -> structlog.stdlib.BoundLogger:
    """Logger under the ``cqdyn`` hierarchy.

    Args:
        name: Module name; defaults to the package root logger.

    Returns:
        Bound structlog logger.
    """
    return cast("structlog.stdlib.BoundLogger", structlog.get_logger(name or ROOT_LOGGER))
