"""
Base settings for PyDIFS project.

This file contains common settings shared across all environments.
Environment-specific settings should be defined in separate files that import from this base.
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent.parent

# Application definition
PYDIFS_APPS = ['grid', 'affine', 'absorbing', 'stats', 'difs', 'render', 'verify', 'runs']

INSTALLED_APPS = list(PYDIFS_APPS)

# No persistence layer: every artifact is a file under the run output directory
DATABASES = {}

# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Default output directory for CLI runs
DIFS_OUTPUT_ROOT = Path(os.environ.get('DIFS_OUTPUT_ROOT', BASE_DIR / 'runs_output'))

# Numeric budgets and defaults for the DIFS toolkit
DIFS_SETTINGS = {
    # absorbing: refuse trap regions wider than this many lattice units
    'MAX_TRAP_RADIUS_CELLS': float(os.environ.get('DIFS_MAX_TRAP_RADIUS_CELLS', '1e8')),
    # grid: largest ball/box the lattice enumerator will materialize
    'MAX_REGION_POINTS': int(os.environ.get('DIFS_MAX_REGION_POINTS', '20000000')),
    'BASIN_ITERATION_CAP': int(os.environ.get('DIFS_BASIN_ITERATION_CAP', '1000000')),
    # difs: stationary distributions
    'STATIONARY_DIRECT_LIMIT': int(os.environ.get('DIFS_STATIONARY_DIRECT_LIMIT', '100000')),
    'STATIONARY_TOLERANCE': float(os.environ.get('DIFS_STATIONARY_TOLERANCE', '1e-10')),
    'STATIONARY_MAX_ITERATIONS': int(os.environ.get('DIFS_STATIONARY_MAX_ITERATIONS', '1000000')),
    # stats: guard against lambda-conditioning that never accepts
    'MAX_REJECTION_ATTEMPTS': int(os.environ.get('DIFS_MAX_REJECTION_ATTEMPTS', '10000000')),
    # verify: reference attractors and Elton averages
    'REFERENCE_POINT_BUDGET': int(os.environ.get('DIFS_REFERENCE_POINT_BUDGET', '5000000')),
    'REFERENCE_MAX_DEPTH': int(os.environ.get('DIFS_REFERENCE_MAX_DEPTH', '16')),
    'ELTON_STEPS': int(os.environ.get('DIFS_ELTON_STEPS', '10000000')),
    'ELTON_BATCHES': int(os.environ.get('DIFS_ELTON_BATCHES', '100')),
    # render
    'DEFAULT_GAMMA': float(os.environ.get('DIFS_DEFAULT_GAMMA', '0.45')),
    # runs: worker pool size (None = available parallelism)
    'DEFAULT_THREADS': int(os.environ['DIFS_THREADS']) if os.environ.get('DIFS_THREADS') else None,
}
