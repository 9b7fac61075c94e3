"""Core functionality for the toolkit."""

from cqdyn.core.config import settings
from cqdyn.core.exceptions import CQDynError, ConfigError, MonitorAbortError

__all__ = ["CQDynError", "ConfigError", "MonitorAbortError", "settings"]
