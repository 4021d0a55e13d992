"""
Test-specific Django settings.
Imports the project settings and quiets logging / forces eager Celery.
"""
import tempfile

from carbonforecast.settings import *  # noqa: F401,F403

DEBUG = True
SECRET_KEY = 'test-secret-key-not-for-production-use-only-testing'

# Runs written during tests go to a throwaway directory
CARBON_RUNS_DIR = tempfile.mkdtemp(prefix='carbonforecast-runs-')

# Small draw counts keep unit tests quick; slow tests pass their own.
CARBON_SV_DRAWS = 400
CARBON_SV_BURN = 200
CARBON_PREDICTIVE_DRAWS = 500

# Celery (in-process for tests)
CELERY_BROKER_URL = 'memory://'
CELERY_RESULT_BACKEND = None
CELERY_TASK_ALWAYS_EAGER = True
CELERY_TASK_EAGER_PROPAGATES = True

# Logging (quiet for tests)
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'handlers': {
        'null': {
            'class': 'logging.NullHandler',
        },
    },
    'root': {
        'handlers': ['null'],
        'level': 'DEBUG',
    },
}
