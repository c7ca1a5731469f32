"""
Main package for all realroot tests.

CONSTANTS:
==========
    TEST_CONFIG: The test configuration mapping (flask.Config), built once for every test module.
    TEST_OPTIONS: The root-count options derived from TEST_CONFIG.

Modules:
========
    factories: Implement realization, schedule and trial factories.
    test_construction: Test realroot.construction functionality.
    test_noise: Test realroot.noise functionality.
    test_logeval: Test realroot.logeval functionality.
    test_rootcount: Test realroot.rootcount functionality.
    test_verify: Test realroot.verify functionality.
    test_mc: Test realroot.mc functionality.
    test_db: Test realroot.models and realroot.db functionality.
    test_cli: Test realroot.cli functionality.
    test_settings: Test realroot.create_config and default_settings.

Miscellaneous objects:
======================
    Except for the public objects exported by this module and their public APIs (if applicable),
        everything else is an implementation detail, and shouldn't be relied upon as it may change
        over time.
"""

# Standard library
import os

# Project specific
import realroot
from realroot import rootcount

os.environ['REALROOT_ENV'] = 'test'
TEST_CONFIG = realroot.create_config()
TEST_OPTIONS = rootcount.CountOptions.from_config(TEST_CONFIG)
