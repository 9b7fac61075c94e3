"""Sub-command table and argument parsing."""

import argparse
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import NoReturn

from cqdyn.cli.commands import audit, check_dd, simulate, spectrum, toy
from cqdyn.cli.context import RunContext, load_context
from cqdyn.core.config import settings
from cqdyn.core.exceptions import ConfigError

type Command = Callable[[RunContext], int]

COMMANDS: dict[str, tuple[Command, str]] = {
    "simulate": (simulate.run, "Integrate a scenario and write trajectory.csv and summary.json"),
    "spectrum": (spectrum.run, "Classify the Liouvillian spectrum and write spectrum.json"),
    "audit": (audit.run, "Audit symmetry and conservation; write audit.json and consistency.json"),
    "check-dd": (check_dd.run, "Check the diffusion-decoherence trade-off; write dd_check.json"),
    "toy": (toy.run, "Reproduce the symmetric but non-conserving qubit model end to end"),
}


class ArgumentParser(argparse.ArgumentParser):
    """Parser whose usage errors surface as configuration errors."""

    def error(self, message: str) -> NoReturn:
        raise ConfigError(message, key="argv")


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="cqdyn", description="Completely positive classical-quantum hybrid dynamics")
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.app_version}")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)
    for name, (_, summary) in COMMANDS.items():
        sub = subparsers.add_parser(name, help=summary, description=summary)
        sub.add_argument("--config", type=Path, default=None,
                         help="Scenario JSON file (default: the built-in toy scenario)")
        sub.add_argument("--out", type=Path, default=None, help="Output directory (overrides output_dir)")
        sub.add_argument("--seed", type=int, default=None, help="Seed for randomized checks (overrides seed)")
    return parser


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    return build_parser().parse_args(argv)


def dispatch(args: argparse.Namespace) -> int:
    """Resolve the scenario and run the selected sub-command.

    Returns:
        Process exit code
    """
    command, _ = COMMANDS[args.command]
    context = load_context(args.config, out=args.out, seed=args.seed)
    return command(context)
