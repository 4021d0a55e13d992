# evaluation_service/services/backtest_service.py
"""
Expanding-window backtest.

At every estimation origin the window is rebuilt from data dated at or
before the origin (real-time emissions, standardized predictors,
re-extracted factors), every model is re-fitted and forecasts h = 1..H are
issued. Realized values are attached afterwards from the full sample:
prices as observed, emissions from the full-sample interpolation.
"""
import logging
import time
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from django.conf import settings

from evaluation_service.services.record_service import canonical_order, record_service
from evaluation_service.types import BacktestPlan, BacktestResult, FitSummary
from model_service.services.runner_service import model_runner
from model_service.types import ForecastRecord, ModelSpec
from series_service.services.window_service import window_service
from series_service.types import DataBundle, MonthDate, MonthlySeries
from shared.logging_context import log_performance_event
from shared.utils.exceptions import ConfigurationException, InsufficientDataException
from shared.utils.run_config import RunConfig

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def chunk_origins(origins: Sequence[MonthDate], jobs: int) -> List[List[MonthDate]]:
    """Split into at most ``jobs`` contiguous, nearly equal chunks"""
    jobs = max(1, min(jobs, len(origins)))
    size, extra = divmod(len(origins), jobs)
    chunks, start = [], 0
    for j in range(jobs):
        stop = start + size + (1 if j < extra else 0)
        chunks.append(list(origins[start:stop]))
        start = stop
    return [c for c in chunks if c]


class BacktestService:

    # ------------------------------------------------------------------
    # Plan
    # ------------------------------------------------------------------
    def build_plan(self, config: RunConfig, bundle: Optional[DataBundle] = None) -> BacktestPlan:
        """
        Plan from the BACKTEST section. The benchmark is added once per
        forecast target when not already listed. Without an explicit last
        origin, the last month whose H-step target is observed is used.
        """
        backtest = config.backtest
        horizon = config.forecast.horizon
        if backtest.first_estimation_end is None:
            raise ConfigurationException(
                "BACKTEST__FIRST_ESTIMATION_END is required",
                context={'module': 'backtest', 'op': 'build_plan'},
            )
        first = MonthDate.parse(backtest.first_estimation_end)
        if backtest.last_origin is not None:
            last = MonthDate.parse(backtest.last_origin)
        elif bundle is not None:
            last = bundle.last_month.shift(-horizon)
        else:
            raise ConfigurationException(
                "BACKTEST__LAST_ORIGIN is required when no data bundle is given",
                context={'module': 'backtest', 'op': 'build_plan'},
            )

        models = [ModelSpec.parse(text) for text in backtest.models]
        ids = {m.model_id for m in models}
        for target in sorted({m.target for m in models}):
            candidate = ModelSpec.parse(self.benchmark_id(config, target))
            if candidate.model_id not in ids:
                models.append(candidate)
                ids.add(candidate.model_id)

        return BacktestPlan(
            first_estimation_end=first,
            last_origin=last,
            horizon=horizon,
            models=tuple(models),
            density=config.forecast.density,
            seed=config.pipeline.seed,
            align_targets=backtest.align_targets,
        )

    @staticmethod
    def benchmark_id(config: RunConfig, target: str) -> str:
        base = ModelSpec.parse(config.backtest.benchmark).model_id.split('@')[0]
        return ModelSpec.parse(f"{base}@{target}").model_id

    # ------------------------------------------------------------------
    # Realizations
    # ------------------------------------------------------------------
    def realized_series(self, bundle: DataBundle, plan: BacktestPlan, config: RunConfig) -> Dict[str, MonthlySeries]:
        realized = {'price': bundle.price}
        if 'emissions' in plan.targets:
            realized['emissions'] = window_service.interpolate_emissions(bundle, disagg=config.disagg).monthly
        return realized

    @staticmethod
    def attach_realized(records: Iterable[ForecastRecord], realized: Dict[str, MonthlySeries]) -> List[ForecastRecord]:
        attached = []
        for record in records:
            series = realized.get(record.target)
            month = record.target_month
            value = series.value_at(month) if series is not None and series.covers(month) else None
            attached.append(record.with_realized(value))
        return attached

    # ------------------------------------------------------------------
    # Origins
    # ------------------------------------------------------------------
    def run_origins(
        self,
        bundle: DataBundle,
        plan: BacktestPlan,
        config: RunConfig,
        origins: Sequence[MonthDate],
    ) -> Tuple[List[ForecastRecord], List[FitSummary]]:
        """Fit every model at each origin in ``origins``; no realizations attached"""
        records: List[ForecastRecord] = []
        fits: List[FitSummary] = []
        reference = None
        if plan.max_factors > 0 and not config.series.standardize_per_window:
            # every batch derives the same statistics from the first estimation window
            reference = window_service.reference_panel(bundle, plan.estimation_origins[0])
        for origin in origins:
            window = window_service.prepare(
                bundle,
                origin,
                n_factors=plan.max_factors,
                disagg=config.disagg,
                factors=config.factors,
                reference=reference,
            )
            for spec in plan.models:
                outcome = model_runner.run(spec, window, config, plan.seed)
                records.extend(outcome.records)
                fits.append(FitSummary(
                    origin=origin,
                    model_id=spec.model_id,
                    lag_order=outcome.lag_order,
                    chow_lin_rho=window.chow_lin_rho,
                ))
            logger.debug(f"Origin {origin}: fitted {len(plan.models)} model(s)")
        return records, fits

    def _check_coverage(self, bundle: DataBundle, plan: BacktestPlan):
        origins = plan.estimation_origins
        if not bundle.price.covers(origins[0]) or not bundle.price.covers(origins[-1]):
            raise InsufficientDataException(
                f"Price data {bundle.price.start}..{bundle.price.end} do not cover origins "
                f"{origins[0]}..{origins[-1]}",
                context={'module': 'backtest', 'op': 'run_expanding_window'},
            )
        last_target = plan.target_range[1] if plan.align_targets else plan.last_origin.shift(plan.horizon)
        if not bundle.price.covers(last_target):
            logger.warning(
                f"Price data end at {bundle.price.end} before the last target {last_target}; "
                f"later records keep no realized value"
            )

    def run_expanding_window(
        self,
        bundle: DataBundle,
        plan: BacktestPlan,
        config: RunConfig,
        bundle_dir: Optional[PathLike] = None,
    ) -> BacktestResult:
        """
        Run every estimation origin, sequentially or as a Celery group of
        origin batches when ``PIPELINE__JOBS`` > 1 and the bundle is on disk.
        """
        self._check_coverage(bundle, plan)
        started = time.perf_counter()
        origins = plan.estimation_origins
        jobs = config.pipeline.jobs

        if jobs > 1 and bundle_dir is not None and len(origins) > 1:
            records, fits = self._run_parallel(Path(bundle_dir), plan, config, origins, jobs)
        else:
            if jobs > 1:
                logger.info("Parallel backtest needs the bundle on disk; running origins sequentially")
            records, fits = self.run_origins(bundle, plan, config, origins)

        records = self.attach_realized(canonical_order(records), self.realized_series(bundle, plan, config))
        fits = sorted(fits, key=lambda f: (f.origin, f.model_id))
        elapsed_ms = (time.perf_counter() - started) * 1000
        log_performance_event(
            logger, 'backtest', elapsed_ms, origins=len(origins), models=len(plan.models), jobs=jobs
        )
        return BacktestResult(plan=plan, records=tuple(records), fits=tuple(fits))

    def _run_parallel(
        self,
        bundle_dir: Path,
        plan: BacktestPlan,
        config: RunConfig,
        origins: Sequence[MonthDate],
        jobs: int,
    ) -> Tuple[List[ForecastRecord], List[FitSummary]]:
        from celery import group

        from evaluation_service.tasks.backtest_tasks import run_origin_batch_task

        payload = {'bundle_dir': str(bundle_dir), 'config': config.to_dict(), 'plan': plan.to_dict()}
        chunks = chunk_origins(origins, jobs)
        logger.info(f"Dispatching {len(origins)} origins in {len(chunks)} batch(es)")
        job = group(
            run_origin_batch_task.s({**payload, 'origins': [str(o) for o in chunk]}) for chunk in chunks
        )
        results = job.apply_async().get(
            timeout=getattr(settings, 'CELERY_RESULT_TIMEOUT', None),
            disable_sync_subtasks=False,
        )

        records: List[ForecastRecord] = []
        fits: List[FitSummary] = []
        for batch in results:
            records.extend(record_service.record_from_dict(item) for item in batch['records'])
            fits.extend(
                FitSummary(
                    origin=MonthDate.parse(item['origin']),
                    model_id=item['model_id'],
                    lag_order=item['lag_order'],
                    chow_lin_rho=item['chow_lin_rho'],
                )
                for item in batch['fits']
            )
        return records, fits


backtest_service = BacktestService()
