# evaluation_service/tasks/backtest_tasks.py

import logging
from typing import Any, Dict

from celery import shared_task

logger = logging.getLogger(__name__)


@shared_task(bind=True, max_retries=0)
def run_origin_batch_task(self, payload: Dict[str, Any]) -> Dict[str, Any]:
    """
    Fit every model of the plan at a batch of origins.

    payload: bundle_dir, config (RunConfig.to_dict()), plan
    (BacktestPlan.to_dict()) and origins (YYYY-MM strings). Returns
    JSON-ready records and fit summaries without realized values.
    """
    from evaluation_service.services.backtest_service import backtest_service
    from evaluation_service.services.record_service import record_service
    from evaluation_service.types import BacktestPlan
    from series_service.services.io_service import series_io_service
    from series_service.types import MonthDate
    from shared.utils.run_config import config_from_dict

    origins = [MonthDate.parse(o) for o in payload['origins']]
    logger.info(f"[Task {self.request.id}] Running {len(origins)} origin(s) {origins[0]}..{origins[-1]}")

    config = config_from_dict(payload['config'])
    plan = BacktestPlan.from_dict(payload['plan'])
    bundle = series_io_service.load_bundle(payload['bundle_dir'])
    records, fits = backtest_service.run_origins(bundle, plan, config, origins)

    return {
        'origins': [str(o) for o in origins],
        'records': [record_service.record_to_dict(r) for r in records],
        'fits': [
            {
                'origin': str(f.origin),
                'model_id': f.model_id,
                'lag_order': f.lag_order,
                'chow_lin_rho': float(f.chow_lin_rho),
            }
            for f in fits
        ],
    }
