import sys

import click

from api.endpoints import experiments, presets, reports
from core.config import settings
from core.exceptions import RVSeriesException
from core.logging import setup_logging


class ToolkitGroup(click.Group):
    """
    Click group with the toolkit's exit codes: 0 success, 1 usage or config
    error, 2 runtime or statistical-precondition failure.
    """

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            result = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
            code = result if isinstance(result, int) else 0
        except click.ClickException as exc:
            exc.show()
            code = 1
        except click.Abort:
            click.echo("Aborted!", err=True)
            code = 1
        except RVSeriesException as exc:
            click.echo(f"Error: {exc}", err=True)
            code = exc.exit_code
        if standalone_mode:
            sys.exit(code)
        return code


@click.group(cls=ToolkitGroup)
@click.version_option(settings.VERSION, prog_name=settings.PROJECT_NAME)
@click.option("-v", "--verbose", is_flag=True, help="Log at DEBUG level")
def cli(verbose: bool):
    """Simulate heavy-tailed cadlag series and verify their regular variation."""
    setup_logging("DEBUG" if verbose else settings.LOG_LEVEL)


# Register all command modules
cli.add_command(experiments.simulate)
cli.add_command(experiments.verify)
cli.add_command(presets.list_presets)
cli.add_command(reports.report)
