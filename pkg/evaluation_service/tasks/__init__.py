# evaluation_service/tasks/__init__.py

from .backtest_tasks import run_origin_batch_task

__all__ = [
    'run_origin_batch_task',
]
