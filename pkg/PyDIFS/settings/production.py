"""
Production settings for PyDIFS project.

This file contains settings for batch runs on shared compute hosts.
Budgets can be tightened or relaxed through the DIFS_* environment variables.
"""

import os
from .base import *

SECRET_KEY = os.environ.get('DJANGO_SECRET_KEY', 'pydifs-batch-runs-have-no-web-surface')

DEBUG = False

ALLOWED_HOSTS = []

LOG_LEVEL = os.environ.get('DIFS_LOG_LEVEL', 'INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {name} {process:d} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        app: {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        }
        for app in PYDIFS_APPS + ['PyDIFS']
    },
}
