# shared/logging.py

import logging

from pythonjsonlogger import jsonlogger

from shared.logging_context import (
    run_id_var,
    stage_var,
    origin_var,
    model_id_var,
)


_CONTEXT_DEFAULTS = {
    'run_id': '-',
    'stage': '-',
    'origin': '-',
    'model_id': '-',
    'duration': 0,
    'operation': '-',
    'task_name': '-',
    'task_id': '-',
    'action': 'unknown',
    'outcome': 'unknown',
}


def _context_values() -> dict:
    return {
        'run_id': run_id_var.get(),
        'stage': stage_var.get(),
        'origin': origin_var.get(),
        'model_id': model_id_var.get(),
    }


class SafeFormatter(logging.Formatter):
    """
    Safe formatter that provides default values for missing fields
    """

    def format(self, record):
        context = _context_values()
        for field, default_value in _CONTEXT_DEFAULTS.items():
            if not hasattr(record, field):
                setattr(record, field, context.get(field, default_value))
        return super().format(record)


class RunContextFilter(logging.Filter):
    """Inject run/stage/origin/model context into log records from contextvars"""

    def filter(self, record):
        for field, value in _context_values().items():
            if not hasattr(record, field):
                setattr(record, field, value)
        return True


class PerformanceFilter(logging.Filter):
    """Only pass records that carry a duration"""

    def filter(self, record):
        if not hasattr(record, 'duration'):
            record.duration = 0
        return hasattr(record, 'operation') or record.name == 'performance'


class CeleryTaskFilter(logging.Filter):
    """
    Filter specifically for Celery tasks
    Adds task-specific context
    """

    def filter(self, record):
        if not hasattr(record, 'task_name'):
            record.task_name = getattr(record, 'name', '-')
        if not hasattr(record, 'task_id'):
            record.task_id = '-'
        for field, value in _context_values().items():
            if not hasattr(record, field):
                setattr(record, field, value)
        return True


class SafeJSONFormatter(jsonlogger.JsonFormatter):
    """
    JSON formatter that always emits the run context fields
    """

    def add_fields(self, log_record, record, message_dict):
        super().add_fields(log_record, record, message_dict)
        log_record['level'] = record.levelname
        log_record['logger'] = record.name
        for field, value in _context_values().items():
            log_record.setdefault(field, getattr(record, field, value))
        log_record['module'] = record.module
        log_record['function'] = record.funcName
        log_record['line'] = record.lineno
