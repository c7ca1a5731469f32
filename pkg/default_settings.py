# SPDX-License-Identifier: AGPL-3.0-or-later


"""
Per-environment settings for realroot (production, development, test).

Classes:
========
    Config: Defaults shared by every environment.
    DevelopmentConfig: Chatty logging, otherwise the defaults.
    ProductionConfig: Warnings on the console, errors in a rotating errors.log.
    TestConfig: A short precision ladder and a single worker, for the unit tests.
    ConsoleFilter: Pass LogRecords up to and including WARNING.
    FileFilter: Pass LogRecords from ERROR upwards.

Functions:
==========
    logging_config: Build a logging.config.dictConfig dictionary.

Notes
=====
    * realroot.create_config() picks the class named by REALROOT_ENV ('production', 'development'
        or 'test'), falling back to ProductionConfig. The test package forces 'test'.
    * REALROOT_THREADS caps the number of campaign worker processes.
    * Settings are read once. Layers on top of the class defaults, in order:
        instance/settings.py, a key=value file (--config), then realroot.create_config() overrides.

Local overrides
===============
    instance/settings.py (next to this module, ignored by git) may redefine any UPPERCASE name,
        e.g. PRECISION_LADDER = (40, 128, 512, 4096, 16384).

Miscellaneous objects:
======================
    Except for the public objects exported by this module and their public APIs (if applicable),
        everything else is an implementation detail, and shouldn't be relied upon as it may change
        over time.
"""

# Standard library
import logging
import os

LOG_FORMAT = '[%(asctime)s] %(levelname)s in %(module)s, line %(lineno)d: %(message)s'


def _worker_count():
    """Read the worker cap from REALROOT_THREADS, falling back to a single worker."""
    raw_value = os.environ.get('REALROOT_THREADS', '1')
    try:
        workers = int(raw_value)
    except ValueError:
        return 1
    return max(1, workers)


class ConsoleFilter:
    """Keep DEBUG, INFO and WARNING records on the console."""

    def __call__(self, log):
        return log.levelno <= logging.WARNING


class FileFilter:
    """Keep ERROR and CRITICAL records for the error file."""

    def __call__(self, log):
        return log.levelno > logging.WARNING


def logging_config(package_level, root_level, error_file=None):
    """
    Build a dictConfig dictionary with a console handler and, optionally, an error file.

    :param package_level: level of the 'realroot' logger.
    :param root_level: level of the root logger.
    :param error_file: if given, ERROR and above go to this rotating file instead of the console.
    :rtype: dict
    """
    handlers = {'default': {'class': 'logging.StreamHandler', 'formatter': 'default'}}
    config = {
        'version': 1,
        'formatters': {'default': {'format': LOG_FORMAT}},
        'handlers': handlers,
        # Loggers not named here (3rd party) are disabled when the config loads.
        'loggers': {
            'realroot': {'level': package_level},
            'sqlalchemy': {'level': 'WARNING'},
        },
        'root': {'level': root_level, 'handlers': ['default']},
    }
    if error_file:
        config['filters'] = {
            'file_filter': {'()': FileFilter},
            'console_filter': {'()': ConsoleFilter},
        }
        handlers['default']['filters'] = ['console_filter']
        handlers['file'] = {
            'class': 'logging.handlers.RotatingFileHandler',
            'formatter': 'default',
            'filename': error_file,
            'filters': ['file_filter'],
            'maxBytes': 500 * 1024 * 1024,
            'backupCount': 1,
            'delay': True,
        }
        config['root']['handlers'].append('file')
    return config


class Config:
    """Defaults shared by every environment."""

    # SQLite file holding campaign trials, created inside the output directory.
    DATABASE_NAME = 'campaign.db'

    # Mantissa widths (bits) tried in order whenever a certified sign comes out indeterminate.
    PRECISION_LADDER = (40, 128, 512, 4096)

    # Recursion budget for certified bisection, per axis.
    MAX_BISECTION_DEPTH = 200

    # Fraction of the block leader kept against its competitors in dominance certificates.
    LEADER_FACTOR = 0.5

    # Transition roots are refined to a width of 2**-REFINE_EXPONENT times the transition length.
    REFINE_EXPONENT = 20

    # Working precision (bits) of the independent root-count oracle, and its degree cap.
    ORACLE_PRECISION = 256
    ORACLE_MAX_DEGREE = 2000

    # Campaign statistics. Groups with fewer exact counts than MIN_CLT_RECORDS get no histogram.
    CONCENTRATION_DELTA = 0.1
    MIN_CLT_RECORDS = 500
    HISTOGRAM_BINS = 20

    WORKERS = _worker_count()

    LOGGING_CONFIG = logging_config('DEBUG', 'DEBUG')


class ProductionConfig(Config):
    """Warnings on the console, errors in errors.log (working directory)."""

    LOGGING_CONFIG = logging_config('WARNING', 'WARNING', error_file='errors.log')


class DevelopmentConfig(Config):
    """Progress of campaigns and counts at INFO level."""

    LOGGING_CONFIG = logging_config('INFO', 'DEBUG')


class TestConfig(Config):
    """Unit-test settings."""

    # Unit tests stop escalating at 512 bits; 4096-bit reference values are computed separately.
    PRECISION_LADDER = (40, 128, 512)
    MAX_BISECTION_DEPTH = 120
    WORKERS = 1
    MIN_CLT_RECORDS = 20
    LOGGING_CONFIG = logging_config('WARNING', 'WARNING')
