from pathlib import Path
from typing import Optional

import click

from api.deps import get_experiment_service
from api.endpoints.reports import render_report
from services.experiment_service import panel_frame, with_overrides

seed_option = click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1), help="Override the [run] seed")
workers_option = click.option("--workers", type=click.IntRange(min=1), help="Size of the process pool")


@click.command("simulate")
@click.argument("config")
@seed_option
@workers_option
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), help="Write the panel to this file")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.option(
    "--coefficients",
    type=click.Path(dir_okay=False, path_type=Path),
    help="Also write Psi_1..Psi_J of replicate 0 as a j,t,value CSV",
)
@click.option("--terms", type=click.IntRange(min=1), default=10, show_default=True, help="J for --coefficients")
def simulate(
    config: str,
    seed: Optional[int],
    workers: Optional[int],
    out: Optional[Path],
    fmt: str,
    coefficients: Optional[Path],
    terms: int,
):
    """
    Draw the replicate panel of CONFIG (a config file or preset name).

    One row per replicate: replicate, sup_norm, J_used, residual_bound, status.
    """
    service = get_experiment_service()
    experiment = with_overrides(service.load_config(config), seed=seed, workers=workers)
    frame = panel_frame(service.simulate(experiment))
    if fmt == "csv":
        text = frame.to_csv(index=False, lineterminator="\n")
    else:
        text = frame.to_json(orient="records", indent=2) + "\n"
    if out is None:
        click.echo(text, nl=False)
    else:
        out.write_text(text, encoding="utf-8")
        click.echo(f"Wrote {len(frame)} replicates to {out}", err=True)
    if coefficients is not None:
        service.coefficient_frame(experiment, 0, terms).to_csv(coefficients, index=False, lineterminator="\n")


@click.command("verify")
@click.argument("source")
@seed_option
@workers_option
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), help="Parent directory of the run directory")
def verify(source: str, seed: Optional[int], workers: Optional[int], out: Optional[Path]):
    """
    Run the full pipeline of SOURCE (a config file or preset name) and publish
    report.json, the CSV side files and manifest.json.
    """
    service = get_experiment_service()
    experiment = with_overrides(service.load_config(source), seed=seed, workers=workers)
    report, manifest, target = service.run_experiment(experiment, out)
    render_report(report, manifest)
    click.echo(str(target))
