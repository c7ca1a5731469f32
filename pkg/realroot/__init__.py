# SPDX-License-Identifier: AGPL-3.0-or-later


"""
Bundle the modules that count and certify the real roots of block-exponential random polynomials.

Functions:
==========
    create_config: Create the runtime configuration and configure logging.
    parse_key_value: Parse a plain-text key=value settings file into a mapping.

Modules:
========
    construction: Build the deterministic coefficient schedule (blocks, log-coefficients, windows).
    noise: Sample reproducible coefficient noise and count leader sign changes.
    logeval: Certify signs of the polynomial in exponential coordinates using log-magnitudes.
    rootcount: Count real roots (block certificates, bisection, Rouche bound, oracle).
    verify: Check the increment inequalities and scan certificate failure frequencies.
    mc: Run Monte Carlo campaigns and compute their statistics.
    models: Define the trial store table.
    db: Store logic that enables database interaction.
    cli: Command-line front end.

Notes:
======
    Every object in the numeric modules is a pure function of its inputs; configuration only
        supplies defaults (precision ladder, bisection budget, worker count, ...).

Miscellaneous objects:
======================
    Except for the public objects exported by this module and their public APIs (if applicable),
        everything else is an implementation detail, and shouldn't be relied upon as it may change
        over time.
"""

# Standard Library
import os
from logging import config as logging_config

# Third-party
import flask

__version__ = '1.0.0'

ENVIRONMENTS = ('production', 'development', 'test')


def parse_key_value(file_object):
    """
    Parse a key=value settings file.

    Blank lines and lines starting with '#' are ignored. Keys are upper-cased so that the result
        can be fed straight into flask.Config, which only keeps upper-case keys.

    :param file_object: An open text file.
    :type file_object: io.TextIOBase
    :return: The parsed settings, values left as stripped strings.
    :rtype: dict
    :raises ValueError: If a non-empty line has no '=' separator or an empty key.
    """
    settings = {}
    for line_number, raw_line in enumerate(file_object, start=1):
        line = raw_line.strip()
        if not line or line.startswith('#'):
            continue
        key, separator, value = line.partition('=')
        key = key.strip()
        if not separator or not key:
            raise ValueError(f'line {line_number}: expected key=value, got {raw_line!r}')
        settings[key.upper().replace('-', '_')] = value.strip()
    return settings


def create_config(environment=None, settings_file=None, overrides=None):
    """
    Build the runtime configuration and apply its logging setup.

    The configuration is layered: the per-environment defaults from default_settings, then
        instance/settings.py (if present), then a key=value settings file, then explicit overrides.

    :param environment: One of ENVIRONMENTS. Defaults to $REALROOT_ENV, then 'production'.
    :type environment: str
    :param settings_file: Optional path to a key=value settings file.
    :type settings_file: str
    :param overrides: Optional mapping applied last (upper-case keys only).
    :type overrides: dict
    :return: The configuration mapping.
    :rtype: flask.Config
    """
    environment = (environment or os.environ.get('REALROOT_ENV') or 'production').lower()
    if environment not in ENVIRONMENTS:
        raise ValueError(f'unknown environment {environment!r}, expected one of {ENVIRONMENTS}')

    root_path = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    config = flask.Config(root_path)
    config.from_object(f'default_settings.{environment.capitalize()}Config')
    config.from_pyfile(os.path.join('instance', 'settings.py'), silent=True)
    if settings_file:
        config.from_file(os.path.abspath(settings_file), load=parse_key_value)
    if overrides:
        config.from_mapping(overrides)

    logging_config.dictConfig(config['LOGGING_CONFIG'])
    return config
