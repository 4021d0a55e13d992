"""
Django settings for the carbonforecast project.

The project has no database and no HTTP surface. Django supplies the settings
layer, logging configuration and the management-command CLI that drives the
forecasting pipeline. Every numerical default used by the pipeline is exposed
here as a ``CARBON_*`` setting and can be overridden per run by the run
configuration file (see ``shared.utils.run_config``).
"""

from pathlib import Path
import os
from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# -----------------------------------------
# ENVIRONMENT DETECTION & LOAD .env FILE
# -----------------------------------------
ENVIRONMENT = os.getenv('CARBON_ENVIRONMENT', 'development').lower()
env_file = BASE_DIR / f'.env.{ENVIRONMENT}'
load_dotenv(dotenv_path=env_file)


def _env_bool(name: str, default: str) -> bool:
    return os.getenv(name, default).lower() == 'true'


# -----------------------------------------
# CORE
# -----------------------------------------
SECRET_KEY = os.getenv('SECRET_KEY', 'carbonforecast-batch-only')
DEBUG = _env_bool('DEBUG', 'False')
ALLOWED_HOSTS = []

INSTALLED_APPS = [
    'shared.apps.SharedConfig',
    'series_service.apps.SeriesServiceConfig',
    'model_service.apps.ModelServiceConfig',
    'evaluation_service.apps.EvaluationServiceConfig',
]

# Batch toolkit: nothing is persisted through the ORM.
DATABASES = {}

USE_TZ = True
TIME_ZONE = 'UTC'


# -----------------------------------------
# CELERY (origin-parallel backtests)
# -----------------------------------------
CELERY_BROKER_URL = os.getenv('CELERY_BROKER_URL', '')
CELERY_RESULT_BACKEND = os.getenv('CELERY_RESULT_BACKEND', CELERY_BROKER_URL or None)
CELERY_ACCEPT_CONTENT = ['json']
CELERY_TASK_SERIALIZER = 'json'
CELERY_RESULT_SERIALIZER = 'json'
# Without a broker every group runs in-process.
CELERY_TASK_ALWAYS_EAGER = _env_bool(
    'CELERY_TASK_ALWAYS_EAGER', 'False' if CELERY_BROKER_URL else 'True'
)
CELERY_TASK_EAGER_PROPAGATES = True
CELERY_TASK_ACKS_LATE = True
CELERY_TASK_SOFT_TIME_LIMIT = int(os.getenv('CELERY_TASK_SOFT_TIME_LIMIT', 3600))
CELERY_TASK_TIME_LIMIT = int(os.getenv('CELERY_TASK_TIME_LIMIT', 7200))
CELERY_TASK_DEFAULT_QUEUE = 'backtest'
CELERY_RESULT_TIMEOUT = int(os.getenv('CELERY_RESULT_TIMEOUT', 7200))


# ==========================
# PIPELINE DEFAULTS
# ==========================
CARBON_RUNS_DIR = Path(os.getenv('CARBON_RUNS_DIR', BASE_DIR / 'runs'))
CARBON_DEFAULT_SEED = int(os.getenv('CARBON_DEFAULT_SEED', 20171231))
CARBON_DEFAULT_JOBS = int(os.getenv('CARBON_DEFAULT_JOBS', 1))

# Series screening / transforms
CARBON_OUTLIER_IQR_MULTIPLE = float(os.getenv('CARBON_OUTLIER_IQR_MULTIPLE', 20.0))

# Chow-Lin disaggregation
CARBON_CHOWLIN_CONSTANT = _env_bool('CARBON_CHOWLIN_CONSTANT', 'True')
CARBON_CHOWLIN_RHO_BOUND = float(os.getenv('CARBON_CHOWLIN_RHO_BOUND', 0.99))
CARBON_CHOWLIN_GRID_STEP = float(os.getenv('CARBON_CHOWLIN_GRID_STEP', 0.05))

# Factors
CARBON_STANDARDIZE_FACTORS = _env_bool('CARBON_STANDARDIZE_FACTORS', 'False')
CARBON_STANDARDIZE_PER_WINDOW = _env_bool('CARBON_STANDARDIZE_PER_WINDOW', 'True')

# Minnesota prior
CARBON_LAMBDA_OVERALL = float(os.getenv('CARBON_LAMBDA_OVERALL', 0.2))
CARBON_LAMBDA_CROSS = float(os.getenv('CARBON_LAMBDA_CROSS', 0.5))
CARBON_LAMBDA_LAGDECAY = float(os.getenv('CARBON_LAMBDA_LAGDECAY', 2.0))
CARBON_INTERCEPT_SCALE = float(os.getenv('CARBON_INTERCEPT_SCALE', 100.0))
CARBON_OWN_MEAN_FIRST_LAG = float(os.getenv('CARBON_OWN_MEAN_FIRST_LAG', 0.0))
CARBON_STRICT_MINNESOTA = _env_bool('CARBON_STRICT_MINNESOTA', 'False')
CARBON_AIC_PMAX = int(os.getenv('CARBON_AIC_PMAX', 12))

# Stochastic volatility sampler
CARBON_SV_DRAWS = int(os.getenv('CARBON_SV_DRAWS', 5000))
CARBON_SV_BURN = int(os.getenv('CARBON_SV_BURN', 2000))
CARBON_SV_THIN = int(os.getenv('CARBON_SV_THIN', 1))
CARBON_SV_PHI_MEAN = float(os.getenv('CARBON_SV_PHI_MEAN', 0.95))
CARBON_SV_PHI_SD = float(os.getenv('CARBON_SV_PHI_SD', 0.04))
CARBON_SV_MU_VAR = float(os.getenv('CARBON_SV_MU_VAR', 10.0))
CARBON_SV_SIGMA_SHAPE = float(os.getenv('CARBON_SV_SIGMA_SHAPE', 5.0))
CARBON_SV_SIGMA_SCALE = float(os.getenv('CARBON_SV_SIGMA_SCALE', 0.16))
CARBON_SV_B0_PRIOR_VAR = float(os.getenv('CARBON_SV_B0_PRIOR_VAR', 10.0))
CARBON_SV_LOG_OFFSET = float(os.getenv('CARBON_SV_LOG_OFFSET', 1e-6))
CARBON_SV_STATE_SAMPLER = os.getenv('CARBON_SV_STATE_SAMPLER', 'ffbs')
CARBON_SV_DIVERGENCE_BOUND = float(os.getenv('CARBON_SV_DIVERGENCE_BOUND', 50.0))

# ARIMA estimation
CARBON_ARIMA_INCLUDE_MEAN = _env_bool('CARBON_ARIMA_INCLUDE_MEAN', 'False')
CARBON_ARIMA_MAX_ITER = int(os.getenv('CARBON_ARIMA_MAX_ITER', 500))

# Forecasting
CARBON_HORIZON = int(os.getenv('CARBON_HORIZON', 12))
CARBON_PREDICTIVE_DRAWS = int(os.getenv('CARBON_PREDICTIVE_DRAWS', 5000))
CARBON_QUANTILE_GRID = int(os.getenv('CARBON_QUANTILE_GRID', 20))
CARBON_DRAW_MEAN_POINT = _env_bool('CARBON_DRAW_MEAN_POINT', 'False')
CARBON_BLOWUP_BOUND = float(os.getenv('CARBON_BLOWUP_BOUND', 10.0))

# Backtest / evaluation
CARBON_ALIGN_TARGETS = _env_bool('CARBON_ALIGN_TARGETS', 'True')
CARBON_BENCHMARK_MODEL = os.getenv('CARBON_BENCHMARK_MODEL', 'rw')
CARBON_FLUCTUATION_WINDOW = int(os.getenv('CARBON_FLUCTUATION_WINDOW', 19))
CARBON_WINDOW_SE = _env_bool('CARBON_WINDOW_SE', 'False')

# Monitoring
CARBON_PRESSURE_SMOOTHING = int(os.getenv('CARBON_PRESSURE_SMOOTHING', 3))
CARBON_DENSITY_PRESSURE = _env_bool('CARBON_DENSITY_PRESSURE', 'False')


# -----------------------------------------
# LOGGING
# -----------------------------------------
LOGS_DIR = os.getenv('CARBON_LOGS_DIR', os.path.join(BASE_DIR, 'logs'))
os.makedirs(LOGS_DIR, exist_ok=True)

LOG_LEVEL = os.environ.get('LOG_LEVEL', 'INFO')
ENABLE_JSON_LOGGING = _env_bool('ENABLE_JSON_LOGGING', 'False')

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,

    "formatters": {
        "verbose": {
            "()": "shared.logging.SafeFormatter",
            "format": "[{asctime}] [{levelname:8}] [{name}] [run={run_id}] [stage={stage}] [origin={origin}] [model={model_id}] {message}",
            "style": "{",
            "datefmt": "%Y-%m-%d %H:%M:%S",
        },
        "simple": {
            "()": "shared.logging.SafeFormatter",
            "format": "[{asctime}] [{levelname:8}] [{name}] {message}",
            "style": "{",
            "datefmt": "%Y-%m-%d %H:%M:%S",
        },
        "performance": {
            "()": "shared.logging.SafeFormatter",
            "format": "[{asctime}] [PERFORMANCE] [{name}] [run={run_id}] [duration={duration}ms] {message}",
            "style": "{",
            "datefmt": "%Y-%m-%d %H:%M:%S",
        },
        "celery": {
            "()": "shared.logging.SafeFormatter",
            "format": "[{asctime}] [{levelname:8}] [{name}] [task={task_name}] [run={run_id}] {message}",
            "style": "{",
            "datefmt": "%Y-%m-%d %H:%M:%S",
        },
        "json": {
            "()": "shared.logging.SafeJSONFormatter",
            "format": "%(asctime)s %(levelname)s %(name)s %(message)s",
        },
    },

    "filters": {
        "run_context": {
            "()": "shared.logging.RunContextFilter",
        },
        "performance": {
            "()": "shared.logging.PerformanceFilter",
        },
        "celery_task": {
            "()": "shared.logging.CeleryTaskFilter",
        },
    },

    "handlers": {
        "console": {
            "level": LOG_LEVEL,
            "class": "logging.StreamHandler",
            "formatter": "verbose",
            "stream": "ext://sys.stderr",
            "filters": ["run_context"],
        },
        "app_file": {
            "level": "INFO",
            "class": "logging.handlers.RotatingFileHandler",
            "filename": os.path.join(LOGS_DIR, "carbonforecast.log"),
            "maxBytes": 10 * 1024 * 1024,
            "backupCount": 5,
            "formatter": "json" if ENABLE_JSON_LOGGING else "verbose",
            "filters": ["run_context"],
        },
        "performance_file": {
            "level": "INFO",
            "class": "logging.handlers.RotatingFileHandler",
            "filename": os.path.join(LOGS_DIR, "performance.log"),
            "maxBytes": 5 * 1024 * 1024,
            "backupCount": 3,
            "formatter": "performance",
            "filters": ["run_context", "performance"],
        },
        "celery_file": {
            "level": "INFO",
            "class": "logging.handlers.RotatingFileHandler",
            "filename": os.path.join(LOGS_DIR, "celery.log"),
            "maxBytes": 5 * 1024 * 1024,
            "backupCount": 3,
            "formatter": "celery",
            "filters": ["run_context", "celery_task"],
        },
    },

    "loggers": {
        "shared": {
            "handlers": ["console", "app_file"],
            "level": LOG_LEVEL,
            "propagate": False,
        },
        "series_service": {
            "handlers": ["console", "app_file"],
            "level": LOG_LEVEL,
            "propagate": False,
        },
        "model_service": {
            "handlers": ["console", "app_file"],
            "level": LOG_LEVEL,
            "propagate": False,
        },
        "evaluation_service": {
            "handlers": ["console", "app_file"],
            "level": LOG_LEVEL,
            "propagate": False,
        },
        "evaluation_service.tasks": {
            "handlers": ["celery_file", "console"],
            "level": "INFO",
            "propagate": False,
        },
        "performance": {
            "handlers": ["performance_file"],
            "level": "INFO",
            "propagate": False,
        },
        "celery": {
            "handlers": ["celery_file"],
            "level": "WARNING",
            "propagate": False,
        },
    },

    "root": {
        "handlers": ["console", "app_file"],
        "level": "WARNING",
    },
}

CELERY_WORKER_HIJACK_ROOT_LOGGER = False
