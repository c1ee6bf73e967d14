"""Command-line parser that aggregates all subcommands."""
import argparse

from smectic.cli import commands

COMMANDS = {
    "run": (commands.cmd_run, "integrate one trajectory"),
    "converge": (commands.cmd_converge, "temporal convergence study against a fine benchmark"),
    "sweep": (commands.cmd_sweep, "energy and max-bound audit across time steps and stabilizers"),
    "check": (commands.cmd_check, "randomized invariant battery"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smectic", description="Smectic-A exponential SAV solver")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (handler, help_text) in COMMANDS.items():
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("config", nargs="?", default=None, help="JSON run configuration")
        cmd.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="override one configuration value (repeatable)",
        )
        cmd.set_defaults(handler=handler)
    return parser
