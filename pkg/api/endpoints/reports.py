from pathlib import Path
from typing import Optional

import click
from rich.console import Console
from rich.table import Table

from api.deps import get_experiment_service
from schemas.report import RunManifest, TailReport


def _fmt(value: Optional[float], digits: int = 4) -> str:
    return "-" if value is None else f"{value:.{digits}g}"


def _verdict(flag: Optional[bool]) -> str:
    if flag is None:
        return "n/a"
    return "pass" if flag else "FAIL"


def render_report(report: TailReport, manifest: RunManifest, console: Optional[Console] = None) -> None:
    """Human-readable summary of a tail report as rich tables."""
    console = console or Console()

    header = Table(title=f"{report.experiment} ({report.pipeline})", show_header=False)
    header.add_column("Field", style="bold")
    header.add_column("Value")
    header.add_row("seed", str(report.seed))
    header.add_row("sample size", str(report.sample_size))
    header.add_row("innovation", report.innovation_model)
    header.add_row("coefficients", report.coefficient_variant)
    header.add_row("version", manifest.version)
    for stage, seconds in manifest.timings.items():
        header.add_row(f"{stage} time", f"{seconds:.2f}s")
    console.print(header)

    checks = Table(title="Checks")
    checks.add_column("Check", style="cyan")
    checks.add_column("Estimate", justify="right")
    checks.add_column("Target", justify="right")
    checks.add_column("Verdict", justify="center")
    if report.hill:
        checks.add_row(
            f"Hill alpha (k={report.hill.k})",
            f"{_fmt(report.hill.alpha)} ± {_fmt(report.hill.alpha_se, 2)}",
            "-",
            "-",
        )
    for estimate in report.hill_sensitivity:
        checks.add_row(f"  sensitivity k={estimate.k}", _fmt(estimate.alpha), "-", "-")
    if report.scaling:
        checks.add_row(
            f"scaling s={report.scaling.s:g}",
            _fmt(report.scaling.ratio),
            _fmt(report.scaling.expected),
            _verdict(report.scaling.agrees),
        )
    if report.additivity:
        checks.add_row("sum of two copies", _fmt(report.additivity.ratio), _fmt(report.additivity.expected), "-")
    if report.breiman:
        checks.add_row(
            "Breiman ratio",
            _fmt(report.breiman.mean_ratio),
            _fmt(report.breiman.limit),
            _verdict(report.breiman.passed),
        )
    if report.marginal:
        checks.add_row(
            f"marginal ratio t={report.marginal.evaluation_point:g}",
            _fmt(report.marginal.mean_ratio),
            _fmt(report.marginal.predicted.value),
            _verdict(report.marginal.passed),
        )
    if report.norm_constant:
        checks.add_row("norm tail constant", "-", _fmt(report.norm_constant.value), "-")
    if report.spectral:
        checks.add_row("argmax KS vs uniform", _fmt(report.spectral.argmax_ks_uniform), "-", "-")
        checks.add_row(
            "positive sign at max",
            _fmt(report.spectral.positive_sign_fraction.estimate),
            "-",
            "-",
        )
    if report.modulus:
        checks.add_row("modulus condition on w''", "-", "-", _verdict(report.modulus.passed))
        edges = "decay" if report.modulus.edges_decay else "no decay"
        checks.add_row("edge oscillations (informational)", "-", "-", edges)
    if report.moments:
        checks.add_row(f"moments ({report.moments.regime})", _fmt(report.moments.decay_ratio), "< 0.99",
                       _verdict(report.moments.passed))
    if report.nonzero:
        checks.add_row("nonzero coefficients", "-", "-", _verdict(report.nonzero.passed))
    if report.truncation:
        summary = report.truncation
        checks.add_row(
            "truncation",
            f"{summary.failures} failed / {summary.draws}",
            f"{summary.soundness_violations} bound violations",
            _verdict(summary.soundness_violations == 0),
        )
    console.print(checks)

    if report.modulus:
        modulus = Table(title=f"Modulus estimates (a_n={report.modulus.a_n:.4g})")
        for column in ("delta", "epsilon", "c1", "c2", "c3"):
            modulus.add_column(column, justify="right")
        for row in report.modulus.rows:
            modulus.add_row(*(f"{value:g}" for value in (row.delta, row.epsilon, row.c1, row.c2, row.c3)))
        console.print(modulus)

    for note in report.notes:
        console.print(f"[yellow]note:[/yellow] {note}")


@click.command("report")
@click.argument("directory", type=click.Path(exists=True, file_okay=False, path_type=Path))
def report(directory: Path):
    """Re-render the summary of a published run DIRECTORY."""
    service = get_experiment_service()
    tail_report, manifest = service.load_report(directory)
    render_report(tail_report, manifest)
