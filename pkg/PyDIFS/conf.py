"""Access to the DIFS_SETTINGS budget dictionary."""

from django.conf import settings

_DEFAULTS = {
    'MAX_TRAP_RADIUS_CELLS': 1e8,
    'MAX_REGION_POINTS': 20_000_000,
    'BASIN_ITERATION_CAP': 1_000_000,
    'STATIONARY_DIRECT_LIMIT': 100_000,
    'STATIONARY_TOLERANCE': 1e-10,
    'STATIONARY_MAX_ITERATIONS': 1_000_000,
    'MAX_REJECTION_ATTEMPTS': 10_000_000,
    'REFERENCE_POINT_BUDGET': 5_000_000,
    'REFERENCE_MAX_DEPTH': 16,
    'ELTON_STEPS': 10_000_000,
    'ELTON_BATCHES': 100,
    'DEFAULT_GAMMA': 0.45,
    'DEFAULT_THREADS': None,
}


def difs_setting(name: str):
    """Return a DIFS_SETTINGS entry, falling back to the built-in default."""
    configured = getattr(settings, 'DIFS_SETTINGS', {})
    if name in configured:
        return configured[name]
    return _DEFAULTS[name]
