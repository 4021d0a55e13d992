# shared/logging_context.py

import contextvars
import logging
import time
import uuid
from contextlib import contextmanager
from typing import Any, Dict, Iterator, Optional


# Global context variables with safe defaults
run_id_var = contextvars.ContextVar("run_id", default="-")
stage_var = contextvars.ContextVar("stage", default="-")
origin_var = contextvars.ContextVar("origin", default="-")
model_id_var = contextvars.ContextVar("model_id", default="-")
stage_start_time_var = contextvars.ContextVar("stage_start_time", default=0.0)

performance_logger = logging.getLogger("performance")


class LoggingContext:
    """Centralized logging context for pipeline runs"""

    @staticmethod
    def set_run_id(run_id: Optional[str] = None) -> str:
        """Set run ID for tracing a pipeline run"""
        if run_id is None:
            run_id = str(uuid.uuid4())[:8]
        run_id_var.set(run_id)
        return run_id

    @staticmethod
    def get_run_id() -> str:
        return run_id_var.get()

    @staticmethod
    def set_stage(stage: str):
        stage_var.set(stage or "-")
        stage_start_time_var.set(time.perf_counter())

    @staticmethod
    def get_stage_duration() -> float:
        """Stage duration in milliseconds"""
        start_time = stage_start_time_var.get()
        if start_time and start_time > 0:
            return (time.perf_counter() - start_time) * 1000
        return 0.0

    @staticmethod
    def set_fit_context(origin: Any = None, model_id: Optional[str] = None):
        origin_var.set(str(origin) if origin is not None else "-")
        model_id_var.set(model_id or "-")

    @staticmethod
    def clear_context():
        """Clear all context variables"""
        run_id_var.set("-")
        stage_var.set("-")
        origin_var.set("-")
        model_id_var.set("-")
        stage_start_time_var.set(0.0)

    @staticmethod
    def get_full_context() -> Dict[str, Any]:
        return {
            'run_id': run_id_var.get(),
            'stage': stage_var.get(),
            'origin': origin_var.get(),
            'model_id': model_id_var.get(),
        }


@contextmanager
def fit_context(origin: Any, model_id: str) -> Iterator[None]:
    """Scope origin/model context to one model fit"""
    origin_token = origin_var.set(str(origin))
    model_token = model_id_var.set(model_id)
    try:
        yield
    finally:
        origin_var.reset(origin_token)
        model_id_var.reset(model_token)


def log_audit_event(logger, action: str, resource: str, outcome: str, **context):
    """Log pipeline audit events (stage started/finished/failed)"""
    extra_context = {
        'action': action,
        'resource': resource,
        'outcome': outcome,
        **LoggingContext.get_full_context(),
        **context,
    }
    logger.info(f"Audit: {action} on {resource} - {outcome}", extra=extra_context)


def log_performance_event(logger, operation: str, duration: float, **context):
    """Log performance metrics (milliseconds)"""
    extra_context = {
        'operation': operation,
        'duration': round(duration, 3),
        **LoggingContext.get_full_context(),
        **context,
    }
    logger.info(f"Performance: {operation} took {duration:.1f}ms", extra=extra_context)
    if logger is not performance_logger:
        performance_logger.info(f"{operation} took {duration:.1f}ms", extra=extra_context)
