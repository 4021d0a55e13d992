# model_service/services/runner_service.py
"""
Fit one model specification on one prepared origin window and forecast from it.
"""
import logging
import time
from dataclasses import dataclass
from typing import List, Optional

from model_service.services.benchmark_service import benchmark_service
from model_service.services.bvar_service import as_matrix, bvar_service
from model_service.services.forecast_service import forecast_service
from model_service.services.sv_service import sv_service
from model_service.types import ForecastRecord, MinnesotaPrior, ModelPosterior, ModelSpec, TARGETS, VarSpec
from series_service.services.window_service import window_service
from series_service.types import OriginWindow
from shared.logging_context import fit_context, log_performance_event
from shared.utils.rng import derive_rng, derive_seed
from shared.utils.run_config import RunConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FitOutcome:
    spec: ModelSpec
    posterior: ModelPosterior
    records: List[ForecastRecord]
    lag_order: Optional[int]
    elapsed_ms: float


class ModelRunnerService:

    def fit(self, spec: ModelSpec, window: OriginWindow, config: RunConfig, seed: int):
        """Return (posterior, history, target index, chosen lag) for ``spec`` at ``window.origin``"""
        prior = MinnesotaPrior.from_config(config.prior)
        series, _ = window.target(spec.target)

        if spec.family in ('rw', 'rwd'):
            return benchmark_service.fit_rw(series, drift=spec.family == 'rwd', differenced=True), None, 0, None
        if spec.family == 'arima':
            return benchmark_service.fit_arima(series, spec.ar, spec.ma, config.arima), None, 0, None

        if spec.family == 'bar':
            Y = as_matrix(series)
            names = (series.name,)
            target_index = 0
            p = spec.p or bvar_service.select_lag_aic(series, config.prior.aic_pmax)
        else:
            variables = window_service.variable_set(window, n_factors=spec.n_factors)
            Y = as_matrix(variables)
            names = tuple(v.name for v in variables)
            target_index = TARGETS.index(spec.target)
            p = spec.p or bvar_service.select_var_lag_aic(Y, config.prior.aic_pmax)

        var_spec = VarSpec(n=Y.shape[1], p=p, variable_names=names)
        if spec.sv:
            posterior = sv_service.fit_bvar_sv(Y, var_spec, prior, config.sv, seed=seed)
        else:
            posterior = bvar_service.fit(Y, var_spec, prior, strict=config.prior.strict_minnesota)
        return posterior, Y, target_index, p

    def run(self, spec: ModelSpec, window: OriginWindow, config: RunConfig, master_seed: int) -> FitOutcome:
        """Fit and forecast h = 1..H; fit and simulation use separate seeded streams"""
        origin = window.origin
        with fit_context(origin, spec.model_id):
            started = time.perf_counter()
            fit_seed = derive_seed(master_seed, str(origin), spec.model_id, 'fit')
            posterior, history, target_index, lag = self.fit(spec, window, config, fit_seed)
            _, origin_level = window.target(spec.target)
            records = forecast_service.forecast_records(
                posterior,
                history,
                origin,
                origin_level,
                spec.model_id,
                target=spec.target,
                config=config.forecast,
                seed=derive_rng(master_seed, str(origin), spec.model_id, 'predictive'),
                target_index=target_index,
            )
            elapsed_ms = (time.perf_counter() - started) * 1000
            log_performance_event(logger, 'model_fit', elapsed_ms, lag=lag)
        return FitOutcome(spec=spec, posterior=posterior, records=records, lag_order=lag, elapsed_ms=elapsed_ms)


model_runner = ModelRunnerService()
