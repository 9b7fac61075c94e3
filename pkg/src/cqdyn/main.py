"""Command line entry point."""

import sys
from collections.abc import Sequence

import structlog

from cqdyn.cli.router import dispatch, parse_args
from cqdyn.core.config import settings
from cqdyn.core.exceptions import CQDynError, handle_toolkit_error, handle_unexpected_error
from cqdyn.core.logging import get_logger, setup_logging

logger = get_logger(__name__)


def main(argv: Sequence[str] | None = None) -> int:
    """Run one sub-command.

    Args:
        argv: Arguments without the program name; defaults to ``sys.argv[1:]``

    Returns:
        Exit code: 0 ok, 1 internal error, 2 monitor abort, 3 configuration error, 4 capacity error
    """
    setup_logging()
    try:
        args = parse_args(argv)
        structlog.contextvars.bind_contextvars(command=args.command, seed=args.seed)
        logger.info("Starting run", app_name=settings.app_name, version=settings.app_version,
                    threads=settings.threads)
        code = dispatch(args)
        logger.info("Run finished", exit_code=code)
        return code
    except CQDynError as exc:
        return handle_toolkit_error(exc)
    except Exception as exc:
        return handle_unexpected_error(exc)
    finally:
        structlog.contextvars.clear_contextvars()


if __name__ == "__main__":
    sys.exit(main())
