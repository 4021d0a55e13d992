# evaluation_service/services/pipeline_service.py
"""
Batch pipeline over a run directory.

Stages read their inputs from the run directory (ingest/, backtest/, score/)
so every management command can run a single stage against an earlier run.
``manifest.json`` is updated after each stage with output hashes and
timings; ``manifest_hash`` excludes timings and timestamps so identical
inputs, configuration and seed give an identical hash.
"""
import logging
import platform
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from django.utils import timezone

from evaluation_service.services.backtest_service import backtest_service
from evaluation_service.services.monitor_service import PRESSURE_SPAN, monitor_service
from evaluation_service.services.record_service import record_service
from evaluation_service.services.report_service import report_service
from evaluation_service.services.scorecard_service import scorecard_service
from evaluation_service.types import BacktestPlan
from evaluation_service.utils.exceptions import MissingStageOutputException
from model_service.types import ForecastRecord
from series_service.services.factor_service import factor_service
from series_service.services.io_service import series_io_service
from series_service.services.synth_service import SynthConfig, synth_service
from series_service.services.window_service import window_service
from series_service.types import DataBundle
from shared.logging_context import LoggingContext, log_audit_event, log_performance_event
from shared.utils.artifacts import read_json, sha256_file, sha256_json, write_json
from shared.utils.exceptions import BaseServiceException, ConfigurationException
from shared.utils.run_config import PIPELINE_STAGES, RunConfig

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

MANIFEST = 'manifest.json'
VERSIONED_PACKAGES = ('numpy', 'scipy', 'pandas', 'django', 'celery')
DIAGNOSTIC_FACTORS = 3
CONTRIBUTION_MA = 3


def package_versions() -> Dict[str, str]:
    versions = {'python': platform.python_version()}
    for name in VERSIONED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = 'unknown'
    return versions


def output_hashes(run_dir: Path, stage: str) -> Dict[str, str]:
    """relative path -> sha256 for every file a stage wrote"""
    stage_dir = run_dir / stage
    if not stage_dir.is_dir():
        return {}
    return {
        path.relative_to(run_dir).as_posix(): sha256_file(path)
        for path in sorted(stage_dir.rglob('*'))
        if path.is_file()
    }


@dataclass
class PipelineRun:
    """State shared by the stages of one invocation"""
    config: RunConfig
    out: Path
    bundle: Optional[DataBundle] = None
    plan: Optional[BacktestPlan] = None
    records: Optional[List[ForecastRecord]] = None
    timings: Dict[str, float] = field(default_factory=dict)


class PipelineService:
    """
    Stages: ingest -> interpolate -> factors -> backtest -> score ->
    monitor -> report. Each stage writes a subdirectory of the run
    directory named after it.
    """

    def __init__(self):
        self._stages = {
            'ingest': self._run_ingest_stage,
            'interpolate': self._run_interpolate_stage,
            'factors': self._run_factors_stage,
            'backtest': self._run_backtest_stage,
            'score': self._run_score_stage,
            'monitor': self._run_monitor_stage,
            'report': self._run_report_stage,
        }

    # ------------------------------------------------------------------
    # Entry points
    # ------------------------------------------------------------------
    def run(self, config: RunConfig, out: PathLike, stages: Optional[Sequence[str]] = None) -> Path:
        """Run ``stages`` (default PIPELINE__STAGES) in pipeline order and update the manifest"""
        requested = list(stages) if stages is not None else list(config.pipeline.stages)
        unknown = [s for s in requested if s not in PIPELINE_STAGES]
        if unknown:
            raise ConfigurationException(
                f"Unknown pipeline stage(s): {', '.join(unknown)}",
                context={'module': 'cli', 'op': 'run_pipeline'},
            )
        ordered = [s for s in PIPELINE_STAGES if s in requested]

        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        LoggingContext.set_run_id(config.config_hash[:12])
        run = PipelineRun(config=config, out=out)
        logger.info(f"Pipeline {config.config_hash[:12]}: stages {', '.join(ordered)} -> {out}")

        for stage in ordered:
            LoggingContext.set_stage(stage)
            log_audit_event(logger, 'stage_started', stage, 'running')
            try:
                self._stages[stage](run)
            except BaseServiceException:
                log_audit_event(logger, 'stage_finished', stage, 'failed')
                raise
            run.timings[stage] = LoggingContext.get_stage_duration()
            log_performance_event(logger, f"stage:{stage}", run.timings[stage])
            log_audit_event(logger, 'stage_finished', stage, 'success')
            self.update_manifest(run, stage)
        return out

    def synthesize(self, config: RunConfig, out: PathLike) -> Path:
        """Write a synthetic bundle (SYNTH__* keys) plus its ledger to ``out``"""
        synth_config = SynthConfig.from_mapping(config.synth, seed=config.pipeline.seed)
        result = synth_service.generate_bundle(synth_config)
        out = series_io_service.save_bundle(result.bundle, out)
        write_json(out / 'ledger.json', result.ledger)
        logger.info(f"Synthetic bundle written to {out}")
        return out

    # ------------------------------------------------------------------
    # Manifest
    # ------------------------------------------------------------------
    def update_manifest(self, run: PipelineRun, stage: str) -> Path:
        path = run.out / MANIFEST
        stages: Dict[str, Any] = {}
        timings: Dict[str, float] = {}
        if path.is_file():
            previous = read_json(path)
            if previous.get('config_hash') == run.config.config_hash:
                stages = previous.get('stages', {})
                timings = previous.get('stage_timings_ms', {})
            else:
                logger.warning(f"{path} belongs to another configuration; earlier stage entries dropped")
        stages[stage] = {'outputs': output_hashes(run.out, stage)}
        timings.update({name: round(ms, 3) for name, ms in run.timings.items()})

        manifest = {
            'config_hash': run.config.config_hash,
            'seed': run.config.pipeline.seed,
            'config': run.config.hashed_dict(),
            'versions': package_versions(),
            'stages': dict(sorted(stages.items(), key=lambda item: PIPELINE_STAGES.index(item[0]))),
        }
        manifest['manifest_hash'] = sha256_json(manifest)
        manifest['stage_timings_ms'] = timings
        manifest['created_at'] = timezone.now().isoformat()
        return write_json(path, manifest)

    # ------------------------------------------------------------------
    # Stage inputs
    # ------------------------------------------------------------------
    @staticmethod
    def _require_stage(run: PipelineRun, stage: str, name: str) -> Path:
        path = run.out / stage / name
        if not path.exists():
            raise MissingStageOutputException(
                f"{path} not found; run the '{stage}' stage first",
                context={'module': 'cli', 'op': 'run_pipeline', 'path': str(path)},
            )
        return path

    def _bundle(self, run: PipelineRun) -> DataBundle:
        if run.bundle is None:
            self._require_stage(run, 'ingest', 'price.csv')
            run.bundle = series_io_service.load_bundle(run.out / 'ingest')
        return run.bundle

    def _plan(self, run: PipelineRun) -> BacktestPlan:
        if run.plan is None:
            run.plan = BacktestPlan.from_dict(read_json(self._require_stage(run, 'backtest', 'plan.json')))
        return run.plan

    def _records(self, run: PipelineRun) -> List[ForecastRecord]:
        if run.records is None:
            run.records = record_service.load_records(self._require_stage(run, 'backtest', 'records.json'))
        return run.records

    # ------------------------------------------------------------------
    # Stages
    # ------------------------------------------------------------------
    def _run_ingest_stage(self, run: PipelineRun):
        config = run.config
        stage_dir = run.out / 'ingest'
        if config.data.bundle_dir:
            bundle = series_io_service.load_bundle(config.data.bundle_dir)
            source = {'source': 'files', 'bundle_dir': str(config.data.bundle_dir)}
        elif config.synth:
            synth_config = SynthConfig.from_mapping(config.synth, seed=config.pipeline.seed)
            result = synth_service.generate_bundle(synth_config)
            bundle = result.bundle
            write_json(stage_dir / 'ledger.json', result.ledger)
            source = {'source': 'synth', 'seed': result.ledger['seed']}
        else:
            raise ConfigurationException(
                "Set DATA__BUNDLE_DIR or SYNTH__* keys to name the input data",
                context={'module': 'cli', 'op': 'ingest'},
            )
        series_io_service.save_bundle(bundle, stage_dir)
        write_json(stage_dir / 'source.json', {
            **source,
            'price': [str(bundle.price.start), str(bundle.price.end)],
            'emissions_years': [bundle.emissions_annual.start_year, bundle.emissions_annual.end_year],
            'n_predictors': len(bundle.predictors),
            'n_sectors': len(bundle.ip_sectors),
        })
        run.bundle = bundle

    def _run_interpolate_stage(self, run: PipelineRun):
        bundle = self._bundle(run)
        stage_dir = run.out / 'interpolate'
        result = window_service.interpolate_emissions(bundle, disagg=run.config.disagg)
        monthly = result.monthly.with_values(result.monthly.values, name='emissions')
        series_io_service.write_monthly_csv(stage_dir / 'emissions_monthly.csv', [monthly])
        write_json(stage_dir / 'chow_lin.json', {
            'rho': result.rho,
            'beta': result.beta,
            'fit_loglik': result.fit_loglik,
            'sample': [str(monthly.start), str(monthly.end)],
        })
        logger.info(f"Full-sample interpolation: rho={result.rho:.4f}, {len(monthly)} months")

    def _run_factors_stage(self, run: PipelineRun):
        """Diagnostics of the factors extracted in the first estimation window"""
        bundle = self._bundle(run)
        if run.config.backtest.first_estimation_end is None:
            raise ConfigurationException(
                "BACKTEST__FIRST_ESTIMATION_END is required for the factors stage",
                context={'module': 'factors', 'op': 'run_pipeline'},
            )
        origin = backtest_service.build_plan(run.config, bundle).first_estimation_end
        k = min(DIAGNOSTIC_FACTORS, len(bundle.predictors))
        window = window_service.prepare(
            bundle, origin, n_factors=k, disagg=run.config.disagg, factors=run.config.factors
        )
        model, panel = window.factor_model, window.panel
        stage_dir = run.out / 'factors'
        stage_dir.mkdir(parents=True, exist_ok=True)
        factor_names = [f.name for f in model.factors]
        classes = [panel.class_of[name].value for name in panel.names]

        loadings = pd.DataFrame(model.loadings, columns=factor_names)
        loadings.insert(0, 'class', classes)
        loadings.insert(0, 'predictor', panel.names)
        loadings.to_csv(stage_dir / 'loadings.csv', index=False, float_format='%.10g', lineterminator='\n')

        shares = pd.DataFrame({
            'component': np.arange(1, len(model.eigenvalues) + 1),
            'eigenvalue': model.eigenvalues,
            'share': model.variance_shares,
            'cumulative_share': np.cumsum(model.variance_shares),
        })
        shares.to_csv(stage_dir / 'variance_shares.csv', index=False, float_format='%.10g', lineterminator='\n')

        r2 = pd.DataFrame.from_dict(factor_service.r2_table(model, panel, k), orient='index')
        r2.index.name = 'predictor'
        r2.insert(0, 'class', classes)
        r2.reset_index().to_csv(stage_dir / 'r2.csv', index=False, float_format='%.10g', lineterminator='\n')

        series_io_service.write_monthly_csv(stage_dir / 'factors.csv', list(model.factors))

        columns: Dict[str, pd.Series] = {}
        parts = factor_service.factor_contributions(model, panel, 0)
        for series in [*parts.values(), model.factors[0]]:
            smoothed = factor_service.moving_average(series, CONTRIBUTION_MA, mode='centered')
            columns[series.name] = pd.Series(series.values, index=[str(d) for d in series.dates])
            columns[f"{series.name}_ma{CONTRIBUTION_MA}"] = pd.Series(
                smoothed.values, index=[str(d) for d in smoothed.dates]
            )
        contributions = pd.DataFrame(columns).sort_index()
        contributions.index.name = 'date'
        contributions.to_csv(stage_dir / 'contributions.csv', float_format='%.10g', lineterminator='\n')
        logger.info(
            f"Factor diagnostics at {origin}: {k} factor(s), "
            f"variance shares {np.round(model.variance_shares[:k], 3).tolist()}"
        )

    def _run_backtest_stage(self, run: PipelineRun):
        bundle = self._bundle(run)
        plan = backtest_service.build_plan(run.config, bundle)
        ingest_dir = run.out / 'ingest'
        result = backtest_service.run_expanding_window(
            bundle, plan, run.config, bundle_dir=ingest_dir if ingest_dir.is_dir() else None
        )
        stage_dir = run.out / 'backtest'
        record_service.save_records(result.records, stage_dir, plan.in_evaluation)
        write_json(stage_dir / 'plan.json', plan.to_dict())
        pd.DataFrame(
            [
                {'origin': str(f.origin), 'model_id': f.model_id, 'lag_order': f.lag_order,
                 'chow_lin_rho': f.chow_lin_rho}
                for f in result.fits
            ],
            columns=['origin', 'model_id', 'lag_order', 'chow_lin_rho'],
        ).to_csv(stage_dir / 'fits.csv', index=False, float_format='%.10g', lineterminator='\n')
        run.plan, run.records = plan, list(result.records)

    def _run_score_stage(self, run: PipelineRun):
        plan = self._plan(run)
        benchmark_ids = {target: backtest_service.benchmark_id(run.config, target) for target in plan.targets}
        scorecard = scorecard_service.score(self._records(run), benchmark_ids, run.config.eval, plan.in_evaluation)
        scorecard_service.write(scorecard, run.out / 'score')

    def monitor_model(self, run: PipelineRun, target: str, requested: Optional[str]) -> Optional[str]:
        """Configured model for ``target``, else the first listed non-benchmark model, else the benchmark"""
        plan = self._plan(run)
        candidates = [m.model_id for m in plan.models if m.target == target]
        if requested is not None:
            if requested not in candidates:
                raise ConfigurationException(
                    f"Monitor model '{requested}' is not a {target} model of the backtest",
                    context={'module': 'monitor', 'op': 'run_pipeline'},
                )
            return requested
        benchmark = backtest_service.benchmark_id(run.config, target)
        others = [m for m in candidates if m != benchmark]
        if others:
            return others[0]
        return candidates[0] if candidates else None

    def _run_monitor_stage(self, run: PipelineRun):
        config = run.config.monitor
        plan = self._plan(run)
        records = self._records(run)
        stage_dir = run.out / 'monitor'
        stage_dir.mkdir(parents=True, exist_ok=True)
        report: Dict[str, Any] = {'indices': [], 'smoothing_window': config.smoothing_window}

        if plan.horizon < PRESSURE_SPAN:
            logger.warning(f"Monitoring needs horizon {PRESSURE_SPAN}; backtest horizon is {plan.horizon}")
            write_json(stage_dir / 'monitoring_report.json', {**report, 'skipped': 'horizon'})
            return

        price_model = self.monitor_model(run, 'price', config.price_model)
        emissions_model = self.monitor_model(run, 'emissions', config.emissions_model)
        report.update({'price_model': price_model, 'emissions_model': emissions_model})
        indices = []

        if emissions_model is not None:
            subset = [r for r in records if r.model_id == emissions_model]
            indices.append(monitor_service.demand_pressure(subset))
        else:
            logger.info("No emissions model in the backtest; demand pressure skipped")

        price_records = [r for r in records if r.model_id == price_model]
        history = self._bundle(run).price
        variants = [False]
        if config.density_pressure:
            if plan.density:
                variants.append(True)
            else:
                logger.warning("Density price pressure requested but the backtest stored no densities")
        for density in variants:
            up = monitor_service.price_pressure(price_records, history, 'up', density=density)
            down = monitor_service.price_pressure(price_records, history, 'down', density=density)
            indices.extend([up, down])
            if len(up):
                report['max_pressure_sum' + ('_density' if density else '')] = float(
                    np.max(up.values + down.values)
                )

        for index in indices:
            smoothed = monitor_service.smooth(index, config.smoothing_window)
            monitor_service.write_index(smoothed, stage_dir)
            report['indices'].append(monitor_service.summarize(smoothed))

        if config.external_forecasts:
            external = monitor_service.load_external_forecasts(config.external_forecasts)
            comparison = monitor_service.compare_external_forecasts(external, price_records, history)
            comparison.to_csv(
                stage_dir / 'external_comparison.csv', index=False, float_format='%.10g', lineterminator='\n'
            )
            report['external'] = {
                'n_compared': int(len(comparison)),
                'rmsfe_difference': monitor_service.rmsfe_difference(comparison),
            }
        write_json(stage_dir / 'monitoring_report.json', report)

    def _run_report_stage(self, run: PipelineRun):
        report_service.report(
            run.out, run_info={'config_hash': run.config.config_hash, 'seed': run.config.pipeline.seed}
        )


pipeline_service = PipelineService()
