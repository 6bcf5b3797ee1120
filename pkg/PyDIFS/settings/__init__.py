"""
PyDIFS settings.

DJANGO_ENVIRONMENT picks the module: ``development`` (default) for local
runs and the test suite, ``production`` for batch hosts where output goes
to a shared DIFS_OUTPUT_ROOT.
"""

import os
import warnings

ENVIRONMENTS = ('development', 'production')

ENVIRONMENT = os.environ.get('DJANGO_ENVIRONMENT', 'development').strip().lower()
if ENVIRONMENT not in ENVIRONMENTS:
    warnings.warn(
        f"Unknown DJANGO_ENVIRONMENT {ENVIRONMENT!r}, expected one of {', '.join(ENVIRONMENTS)}; "
        f"using development settings."
    )
    ENVIRONMENT = 'development'

if ENVIRONMENT == 'production':
    from .production import *  # noqa: F401,F403
else:
    from .development import *  # noqa: F401,F403
