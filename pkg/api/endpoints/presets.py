import click

from api.deps import get_experiment_service


@click.command("presets")
def list_presets():
    """List the checked-in acceptance experiments."""
    service = get_experiment_service()
    for name in service.list_presets():
        config = service.preset(name)
        click.echo(f"{name}\t{config.run.pipeline.value}\tn={config.run.n}")
