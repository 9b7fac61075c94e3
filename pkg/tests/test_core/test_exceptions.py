"""Tests for toolkit exceptions and exit-code handlers."""

import logging

import pytest

from cqdyn.core.exceptions import (
    EXIT_CAPACITY,
    EXIT_CONFIG,
    EXIT_INTERNAL,
    EXIT_MONITOR_ABORT,
    CapacityError,
    ConfigError,
    CQDynError,
    DomainError,
    MonitorAbortError,
    handle_toolkit_error,
    handle_unexpected_error,
)


def test_config_error_names_its_key() -> None:
    """Test the message prefix and the key in the details."""
    exc = ConfigError("must be positive", key="integration.dt")

    assert str(exc) == "integration.dt: must be positive"
    assert exc.key == "integration.dt"
    assert exc.details == {"key": "integration.dt"}
    assert exc.exit_code == EXIT_CONFIG


def test_exit_codes() -> None:
    """Test the exit code carried by each error family."""
    assert MonitorAbortError("trace drift", time=0.5).exit_code == EXIT_MONITOR_ABORT
    assert MonitorAbortError("trace drift", time=0.5).details == {"time": 0.5}
    assert CapacityError().exit_code == EXIT_CAPACITY
    assert DomainError("bad").exit_code == EXIT_INTERNAL
    assert isinstance(DomainError("bad"), CQDynError)


def test_handle_toolkit_error(caplog: pytest.LogCaptureFixture) -> None:
    """Test that the handler logs the error and returns its exit code.

    Args:
        caplog: Pytest log capture fixture
    """
    with caplog.at_level(logging.ERROR):
        code = handle_toolkit_error(ConfigError("missing", key="model.name"))

    assert code == EXIT_CONFIG
    assert "model.name" in caplog.text


def test_handle_unexpected_error(caplog: pytest.LogCaptureFixture) -> None:
    """Test that unexpected errors map to the internal exit code.

    Args:
        caplog: Pytest log capture fixture
    """
    with caplog.at_level(logging.ERROR):
        code = handle_unexpected_error(RuntimeError("boom"))

    assert code == EXIT_INTERNAL
    assert "Unexpected exception occurred" in caplog.text
