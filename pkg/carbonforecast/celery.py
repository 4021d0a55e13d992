# carbonforecast/celery.py
"""
Celery app for the parallel backtest.

With PIPELINE__JOBS above one and the bundle saved on disk the
expanding-window backtest splits its estimation origins into contiguous
batches and dispatches them as a group of ``run_origin_batch_task``. Each
task reloads the saved bundle, fits every model at its origins and returns
serialized records and fit summaries; the backtest merges them in
canonical order. Without CELERY_BROKER_URL tasks run eagerly in-process,
so the group executes sequentially and gives the same records.
"""
import os
from celery import Celery

# Set the default Django settings module for the 'celery' program.
os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'carbonforecast.settings')

app = Celery('carbonforecast')

# Using a string here means the worker doesn't have to serialize
# the configuration object to child processes.
app.config_from_object('django.conf:settings', namespace='CELERY')

app.conf.update(
    imports=(
        'evaluation_service.tasks.backtest_tasks',
    )
)
