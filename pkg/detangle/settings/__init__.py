"""
Django settings for the detangle project.

The project has no web surface: Django provides the command line
(management commands), configuration, logging and the test runner.
"""

import os

# DETANGLE_ENV=dev swaps in the debugging profile (solver self-checks, DEBUG logs)
if os.getenv("DETANGLE_ENV") == "dev":
    from .dev import *
else:
    from .prod import *

# Application definition

INSTALLED_APPS = [
    'rasters',
    'semantics',
    'regions',
    'assembly',
    'solver',
    'pipeline',
    'learning',
    'evaluation',
    'synthetic',
]

# No database is used; every artifact is a JSON document or a raw raster.
DATABASES = {}

USE_TZ = True

TIME_ZONE = 'UTC'


# Logging
# https://docs.djangoproject.com/en/5.1/topics/logging/

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {name}: {message}',
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
        app: {'handlers': ['console'], 'level': LOG_LEVEL, 'propagate': False}
        for app in ['detangle', *INSTALLED_APPS]
    },
}


# Method defaults. Every value can be overridden per run with --params /
# --anthro JSON documents.

DETANGLE = {
    'PARAMS': {
        'alpha': 200.0,
        'beta': 100.0,
        'gamma': 100.0,
        'theta': 40.0,
        'xi': 500.0,
        'phi': 1.0,
        'pi': 2e5,
        'tau': 0.2,
        'epsilon': 0.5,
        'delta': 1e-6,
    },
    # 150-px reference person; not published values, see DESIGN.md
    'ANTHROPOMETRY': {
        'reference_height': 150.0,
        'head_radius': 12.0,
        'target_area': {'torso': 2400.0, 'arm': 1200.0, 'leg': 1800.0},
        'max_area': {'torso': 4800.0, 'arm': 3000.0, 'leg': 4200.0},
        'range_radius': {'torso': 85.0, 'arm': 95.0, 'leg': 150.0},
    },
    'SEMANTIC': {
        'nms_window': 7,
        'nms_threshold': 0.2,
        'unary_weight': 1.0,
        'pairwise_weight': 0.2,
        'range_penalty': 1.0,
        'capacity_scale': 1000,
        'expansion_iterations': 20,
    },
    'POOL': {
        'min_area': 25,
        'max_regions': 1000,
        'histogram_bins': 8,
    },
    'SOLVER': {
        'iterations': 500,
        'step': 1e-6,
        'schedule': 'constant',
        'node_iterations': 100,
        'node_schedule': 'polyak',
        'node_budget': 20000,
        'tolerance': 1e-6,
        'exhaustive_limit': 20,
        # subtrees with at most this many completions are enumerated
        'leaf_size': 64,
        'lp_method': 'auto',
        'threads': THREADS,
    },
    'LEARNING': {
        'negatives': 20,
        'attempts': 10000,
        # share of a region that must lie inside a ground-truth part
        'containment': 0.8,
        'negative_iou': 0.5,
        'tau_grid': [0.1, 0.2, 0.3],
        'epsilon_percentile': 95.0,
    },
}
