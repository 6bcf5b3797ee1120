"""
Shared base for the PyDIFS management commands.

Every command accepts --config, --seed, --threads and --out; subclasses
add their own flags and map them onto dotted config keys.
"""

import logging

from django.core.management.base import BaseCommand

from PyDIFS.exceptions import command_error_for
from runs.services import execute, parse_config

logger = logging.getLogger(__name__)


def add_shared_arguments(parser):
    parser.add_argument(
        '--config',
        type=str,
        help='Path to a JSON run configuration',
    )
    parser.add_argument(
        '--seed',
        type=int,
        help='Top-level random seed (overrides the config)',
    )
    parser.add_argument(
        '--threads',
        type=int,
        help='Worker pool size, -1 for all cores (default: available parallelism)',
    )
    parser.add_argument(
        '--out',
        type=str,
        help='Output directory (default: DIFS_OUTPUT_ROOT/<command>)',
    )


class RunCommand(BaseCommand):
    run_command = None

    def add_arguments(self, parser):
        add_shared_arguments(parser)
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        """Hook for command-specific flags."""

    def command_name(self, options) -> str:
        return self.run_command

    def overrides(self, options) -> dict:
        """Dotted config keys set from command-specific flags."""
        return {}

    def handle(self, *args, **options):
        command = self.command_name(options)
        try:
            overrides = {
                'seed': options.get('seed'),
                'threads': options.get('threads'),
                'out': options.get('out'),
            }
            overrides.update(self.overrides(options))
            cfg = parse_config(options.get('config'), overrides, command)
            ctx = execute(cfg)
        except Exception as exc:
            raise command_error_for(exc) from exc

        for line in ctx.summary:
            self.stdout.write(f"  {line}")
        self.stdout.write(
            self.style.SUCCESS(f"{command} finished: {len(ctx.artifacts)} artifacts in {ctx.out}")
        )
