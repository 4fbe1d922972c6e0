import hashlib
import logging
import platform
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional, Union

import numpy as np
import pandas as pd

from core.config import settings
from core.exceptions import (
    InsufficientDataException,
    RVSeriesException,
    StageException,
    UnknownPresetException,
    ValidationException,
)
from models.cadlag import add, sup_norm
from models.series import DrawStatus, MarginalPanel, PanelRecord
from models.stream import StreamKey
from repositories.artifact_repository import ArtifactRepository
from repositories.frame_repository import coefficients_to_frame
from repositories.preset_repository import PresetRepository
from repositories.report_repository import JsonRepository
from schemas.coefficients import MomentCheckSpec
from schemas.experiment import ExperimentConfig, Pipeline
from schemas.innovation import InnovationKind
from schemas.report import RunManifest, TailReport, TruncationSummary
from services.coefficient_service import CoefficientService
from services.config_service import ConfigService
from services.innovation_service import InnovationService
from services.series_service import SeriesService
from services.tail_service import TailService, default_hill_k

logger = logging.getLogger(__name__)

# Lineages under the experiment key: replicate panels and every other stream
PANEL_LINEAGE = 0
ORACLE_LINEAGE = 1

# Oracle sub-streams
MOMENT_STREAM = 1
NONZERO_STREAM = 2
NORM_CONSTANT_STREAM = 3
TAIL_CONSTANT_STREAM = 4
BOOTSTRAP_STREAM = 5

REPORT_FILE = "report"
MANIFEST_FILE = "manifest"
TAIL_CURVE_FILE = "tail_curve"
MODULUS_FILE = "modulus"
PANEL_FILE = "panel"

# Coefficient diagnostics never look past this many terms
_DIAGNOSTIC_TERMS = 100


def experiment_key(config: ExperimentConfig) -> StreamKey:
    """Master seed plus a lineage id hashed from the experiment name."""
    digest = hashlib.sha256(config.run.name.encode("utf-8")).digest()
    return StreamKey(config.run.seed, (int.from_bytes(digest[:4], "big"),))


def with_overrides(
    config: ExperimentConfig,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
    output_dir: Optional[Path] = None,
) -> ExperimentConfig:
    """Copy of the config with [run] values replaced from the command line."""
    update = {
        key: value
        for key, value in (("seed", seed), ("workers", workers), ("output_dir", output_dir))
        if value is not None
    }
    if not update:
        return config
    run = config.run.model_validate({**config.run.model_dump(), **update})
    return config.model_copy(update={"run": run})


def panel_frame(records: list[PanelRecord]) -> pd.DataFrame:
    """One row per replicate: replicate, sup_norm, J_used, residual_bound, status."""
    rows = []
    for record in records:
        draw = record.draw
        rows.append({
            "replicate": record.replicate,
            "sup_norm": sup_norm(draw.x) if draw else np.nan,
            "J_used": draw.j_used if draw else np.nan,
            "residual_bound": draw.residual_bound if draw else np.nan,
            "status": record.status.value,
        })
    return pd.DataFrame(rows, columns=["replicate", "sup_norm", "J_used", "residual_bound", "status"])


def marginal_frame(panel: MarginalPanel) -> pd.DataFrame:
    return pd.DataFrame({
        "replicate": np.arange(panel.values.size),
        "value": panel.values,
        "J_used": panel.j_used,
        "residual_bound": panel.residual_bound,
        "status": np.where(panel.ok, DrawStatus.OK.value, DrawStatus.TRUNCATION_FAILURE.value),
    })


@contextmanager
def _stage(name: str, timings: dict[str, float]) -> Iterator[None]:
    started = time.perf_counter()
    logger.info("Stage %s started", name)
    try:
        yield
    except StageException:
        raise
    except (RVSeriesException, OSError, ValueError) as exc:
        raise StageException(name, exc) from exc
    finally:
        timings[name] = round(time.perf_counter() - started, 3)
    logger.info("Stage %s finished in %.2fs", name, timings[name])


class ExperimentService:
    """
    Runs configured experiments end to end: draw, estimate, publish.

    The payload (report and CSV side files) is a pure function of the config
    and seed; worker counts and timings only reach the manifest.
    """

    def __init__(
        self,
        presets: Optional[PresetRepository] = None,
        configs: Optional[ConfigService] = None,
    ):
        self.presets = presets or PresetRepository()
        self.configs = configs or ConfigService()
        self.innovations = InnovationService()
        self.coefficients = CoefficientService(self.innovations)
        self.series = SeriesService(self.innovations, self.coefficients)
        self.tails = TailService(self.innovations, self.coefficients)

    # ========== CONFIGS ==========

    def list_presets(self) -> list[str]:
        return self.presets.get_all()

    def preset(self, name: str) -> ExperimentConfig:
        """
        Checked-in config of an acceptance experiment.

        Raises:
            UnknownPresetException: If no preset has this name
        """
        text = self.presets.get(name)
        if text is None:
            raise UnknownPresetException(name, self.list_presets())
        return self.configs.parse_config(text)

    def load_config(self, source: Union[str, Path]) -> ExperimentConfig:
        """Parse a config file, or fall back to the preset of that name."""
        path = Path(source)
        if path.is_file():
            return self.configs.parse_config(path.read_text(encoding="utf-8"))
        return self.preset(str(source))

    # ========== PIPELINES ==========

    def simulate(self, config: ExperimentConfig) -> list[PanelRecord]:
        """Draw the replicate panel of a config without estimating anything."""
        key = experiment_key(config).child(PANEL_LINEAGE)
        return self.series.draw_panel(key, config.series_spec(), config.run.n, config.run.workers)

    def coefficient_frame(self, config: ExperimentConfig, replicate: int = 0, terms: int = 10) -> pd.DataFrame:
        """Psi_1..Psi_terms of one replicate as a j, t, value table."""
        key = experiment_key(config).child(PANEL_LINEAGE, replicate)
        panel = self.coefficients.generate_coefficients(
            key, config.coefficient_family(), terms, config.innovation_spec()
        )
        return coefficients_to_frame(panel)

    def run_experiment(
        self,
        config: ExperimentConfig,
        output_dir: Optional[Path] = None,
    ) -> tuple[TailReport, RunManifest, Path]:
        """
        Draw, estimate and atomically publish one experiment.

        Args:
            config: Validated experiment config
            output_dir: Parent of the run directory; defaults to [run] output_dir,
                then settings.RVSERIES_OUTPUT_DIR

        Returns:
            The report, the manifest and the published run directory

        Raises:
            StageException: Wrapping the failure of the draw, estimate or publish
                stage; nothing is left behind in the output directory
        """
        output_dir = Path(output_dir or config.run.output_dir or settings.RVSERIES_OUTPUT_DIR)
        timings: dict[str, float] = {}
        key = experiment_key(config)
        logger.info(
            "Running %s (%s pipeline, n=%d, seed=%d)",
            config.run.name, config.run.pipeline.value, config.run.n, config.run.seed,
        )

        if config.run.pipeline == Pipeline.PATH:
            with _stage("draw", timings):
                records = self.series.draw_panel(
                    key.child(PANEL_LINEAGE), config.series_spec(), config.run.n, config.run.workers
                )
            with _stage("estimate", timings):
                report, frames = self._estimate_paths(config, key, records)
        elif config.run.pipeline == Pipeline.MARGINAL:
            with _stage("draw", timings):
                spec = config.series_spec()
                panel = self.series.draw_marginal_panel(
                    key.child(PANEL_LINEAGE), spec, config.run.n, spec.evaluation_point, config.run.workers
                )
            with _stage("estimate", timings):
                report, frames = self._estimate_marginal(config, key, panel)
        else:
            timings["draw"] = 0.0
            with _stage("estimate", timings):
                report, frames = self._estimate_breiman(config, key)

        artifacts = ArtifactRepository(output_dir, config.run.name)
        try:
            with _stage("publish", timings):
                artifacts.stage()
                artifacts.write_document(REPORT_FILE, report)
                for name, frame in frames.items():
                    artifacts.write_frame(name, frame)
                manifest = RunManifest(
                    config=self.configs.render_config(config),
                    version=settings.VERSION,
                    platform=f"{platform.platform()} python-{platform.python_version()}",
                    checksums=artifacts.checksums(),
                    timings=dict(timings),
                )
                artifacts.write_document(MANIFEST_FILE, manifest)
                target = artifacts.publish()
        except BaseException:
            artifacts.discard()
            raise
        return report, manifest, target

    def load_report(self, directory: Path) -> tuple[TailReport, RunManifest]:
        """Read back a published run directory."""
        report = JsonRepository(TailReport, directory).get(REPORT_FILE)
        manifest = JsonRepository(RunManifest, directory).get(MANIFEST_FILE)
        if report is None or manifest is None:
            raise ValidationException(f"No published run in {directory}")
        return report, manifest

    # ========== ESTIMATION ==========

    def _report(self, config: ExperimentConfig, sample_size: int) -> TailReport:
        return TailReport(
            experiment=config.run.name,
            pipeline=config.run.pipeline.value,
            seed=config.run.seed,
            sample_size=sample_size,
            innovation_model=config.innovation.kind.value,
            coefficient_variant=config.coefficients.variant,
        )

    def _estimate_paths(
        self,
        config: ExperimentConfig,
        key: StreamKey,
        records: list[PanelRecord],
    ) -> tuple[TailReport, dict[str, pd.DataFrame]]:
        est = config.estimators
        spec = config.series_spec()
        oracle = key.child(ORACLE_LINEAGE)
        paths = [record.draw.x for record in records if record.ok]
        norms = np.array([sup_norm(path) for path in paths])
        if norms.size < 2:
            raise InsufficientDataException(2, norms.size, "completed replicates")
        report = self._report(config, norms.size)

        k = est.hill_k or default_hill_k(norms.size)
        report.hill = self.tails.hill_estimate(norms, k)
        report.hill_sensitivity = self.tails.hill_sensitivity(norms, k)
        n_target = est.n_target or max(2, norms.size // 100)
        a_n = self.tails.normalizer_a_n(norms, n_target)
        report.tail_curve = self.tails.tail_curve(norms, a_n, n_target, est.r_grid, report.hill)
        x0 = float(np.quantile(norms, est.scaling_quantile))
        report.scaling = self.tails.scaling_check(norms, est.scaling_s, x0, report.hill)
        if len(paths) >= 4:
            half = len(paths) // 2
            summed = [sup_norm(add(paths[2 * i], paths[2 * i + 1])) for i in range(half)]
            report.additivity = self.tails.additivity_check(norms, summed, x0)

        if est.spectral_k is not None:
            samples = self.tails.spectral_estimate(paths, est.spectral_k)
            report.spectral = self.tails.spectral_summary(
                samples, est.angle_points, oracle.child(BOOTSTRAP_STREAM), est.bootstrap
            )
        report.pizza_slices = self.tails.pizza_slice_check(
            paths, a_n, n_target, est.r_grid, est.pizza_bins, report.hill.alpha
        )
        report.modulus = self.tails.modulus_diagnostic(
            paths, a_n, n_target, est.epsilon_grid, est.delta_grid, est.modulus_fraction, est.modulus_floor
        )
        self._coefficient_diagnostics(config, oracle, report)
        if spec.innovation.kind == InnovationKind.SINGLE_JUMP:
            report.norm_constant = self.tails.norm_tail_constant(
                spec.coefficients, spec.innovation.alpha, oracle.child(NORM_CONSTANT_STREAM),
                est.moment_samples, min(spec.term_cap, _DIAGNOSTIC_TERMS), spec.innovation,
            )

        report.truncation = self._truncation_summary(records)
        frames = {
            PANEL_FILE: panel_frame(records),
            TAIL_CURVE_FILE: pd.DataFrame([point.model_dump() for point in report.tail_curve.points]),
            MODULUS_FILE: pd.DataFrame([row.model_dump() for row in report.modulus.rows]),
        }
        return report, frames

    def _estimate_marginal(
        self,
        config: ExperimentConfig,
        key: StreamKey,
        panel: MarginalPanel,
    ) -> tuple[TailReport, dict[str, pd.DataFrame]]:
        est = config.estimators
        spec = config.series_spec()
        oracle = key.child(ORACLE_LINEAGE)
        values = panel.values[panel.ok]
        if values.size < 2:
            raise InsufficientDataException(2, values.size, "completed replicates")
        report = self._report(config, int(values.size))
        magnitudes = np.abs(values)
        k = est.hill_k or default_hill_k(values.size)
        report.hill = self.tails.hill_estimate(magnitudes, k)
        report.hill_sensitivity = self.tails.hill_sensitivity(magnitudes, k)

        tail = spec.innovation.tail
        if spec.innovation.kind == InnovationKind.PARETO_SCALAR:
            predicted = self.tails.series_tail_constant(
                spec.coefficients, panel.evaluation_point, tail.alpha, oracle.child(TAIL_CONSTANT_STREAM),
                samples=est.moment_samples, terms=min(spec.term_cap, _DIAGNOSTIC_TERMS),
                innovation=spec.innovation,
            )
            x_grid = sorted((tail.c / level) ** (1.0 / tail.alpha) for level in est.marginal_levels)
            report.marginal = self.tails.marginal_ratio(
                values, tail, x_grid, predicted, panel.evaluation_point, est.marginal_tolerance
            )
        else:
            report.notes.append("marginal tail ratio needs pareto-scalar innovations; skipped")
        self._coefficient_diagnostics(config, oracle, report)

        report.truncation = TruncationSummary(
            draws=int(panel.values.size),
            failures=panel.failures,
            errors=0,
            mean_terms=float(panel.j_used.mean()),
            max_terms=int(panel.j_used.max()),
            max_residual_bound=float(panel.residual_bound[panel.ok].max()) if panel.ok.any() else None,
            soundness_checked=int(np.count_nonzero(panel.ok)),
            soundness_violations=int(np.count_nonzero(panel.ok & ~panel.sound)),
        )
        if report.truncation.soundness_violations:
            logger.warning(
                "Truncation bound violated in %d marginal replicates", report.truncation.soundness_violations
            )
        return report, {PANEL_FILE: marginal_frame(panel)}

    def _estimate_breiman(
        self,
        config: ExperimentConfig,
        key: StreamKey,
    ) -> tuple[TailReport, dict[str, pd.DataFrame]]:
        report = self._report(config, config.run.n)
        report.breiman = self.tails.breiman_check(
            key.child(PANEL_LINEAGE),
            config.coefficients.multiplier,
            config.innovation.tail,
            config.run.n,
            config.estimators.x_grid,
            config.estimators.breiman_tolerance,
        )
        frame = pd.DataFrame([point.model_dump() for point in report.breiman.points])
        return report, {"breiman": frame}

    def _coefficient_diagnostics(self, config: ExperimentConfig, oracle: StreamKey, report: TailReport) -> None:
        est = config.estimators
        family = config.coefficient_family()
        innovation = config.innovation_spec()
        alpha = innovation.alpha
        terms = min(config.series.term_cap, _DIAGNOSTIC_TERMS)
        moment_spec = MomentCheckSpec(
            alpha=alpha,
            gamma=est.moment_gamma or alpha / 4,
            head=min(est.moment_head, terms),
            samples=est.moment_samples,
            max_terms=terms,
        )
        report.moments = self.coefficients.moment_regime_check(
            family, moment_spec, oracle.child(MOMENT_STREAM), innovation
        )
        report.nonzero = self.coefficients.nonzero_condition_check(
            family, moment_spec.head, oracle.child(NONZERO_STREAM), min(est.moment_samples, 100), innovation
        )

    def _truncation_summary(self, records: list[PanelRecord]) -> TruncationSummary:
        completed = [record.draw for record in records if record.ok]
        violations = sum(1 for draw in completed if not draw.sound)
        if violations:
            logger.warning("Truncation bound violated in %d of %d completed draws", violations, len(completed))
        return TruncationSummary(
            draws=len(records),
            failures=sum(1 for record in records if record.status == DrawStatus.TRUNCATION_FAILURE),
            errors=sum(1 for record in records if record.status == DrawStatus.ERROR),
            mean_terms=float(np.mean([draw.j_used for draw in completed])) if completed else None,
            max_terms=max((draw.j_used for draw in completed), default=None),
            max_residual_bound=max((draw.residual_bound for draw in completed), default=None),
            soundness_checked=len(completed),
            soundness_violations=violations,
        )
