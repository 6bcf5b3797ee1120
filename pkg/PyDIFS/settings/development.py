"""
Development settings for PyDIFS project.

Used for local runs and the test suite. Artifacts go to ./runs_output
unless DIFS_OUTPUT_ROOT is set.
"""

import os

from .base import *

SECRET_KEY = 'django-insecure-pydifs-development-key-not-for-production'

DEBUG = True

ALLOWED_HOSTS = ['localhost', '127.0.0.1', '[::1]']

# Module loggers of the PyDIFS apps log at DEBUG; chatty per-sample
# messages in stats and verify can be silenced with DIFS_LOG_LEVEL=INFO.
LOG_LEVEL = os.environ.get('DIFS_LOG_LEVEL', 'DEBUG')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'run': {
            'format': '{asctime} {levelname:<7} {name}: {message}',
            'datefmt': '%H:%M:%S',
            'style': '{',
        },
    },
    'handlers': {
        'stderr': {
            'class': 'logging.StreamHandler',
            'formatter': 'run',
        },
    },
    'root': {
        'handlers': ['stderr'],
        'level': 'WARNING',
    },
    'loggers': {
        **{
            app: {
                'handlers': ['stderr'],
                'level': LOG_LEVEL,
                'propagate': False,
            }
            for app in PYDIFS_APPS + ['PyDIFS']
        },
    },
}
