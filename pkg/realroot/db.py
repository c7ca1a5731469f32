# SPDX-License-Identifier: AGPL-3.0-or-later


"""
Store logic that facilitates interaction with the campaign trial store.

Functions:
==========
    create_store: Create (or open) the SQLite store and its tables.
    append_record: Insert one trial row in its own transaction.
    fetch_records: Read every trial row, sorted by (alpha, n, dist, p, trial_index).
    stored_keys: The identifying keys of the rows already stored.

Miscellaneous objects:
======================
    Except for the public objects exported by this module and their public APIs (if applicable),
        everything else is an implementation detail, and shouldn't be relied upon as it may change
        over time.
"""

# Standard library
import logging

# Third-party
import sqlalchemy
from sqlalchemy import exc

# Project specific
from realroot import models

logger = logging.getLogger(__name__)

KEY_COLUMNS = ('alpha', 'n', 'dist', 'p', 'trial_index')


def create_store(path):
    """
    Create the database engine for a store file and create its tables.

    This is safe to be called multiple times: tables that are already present in the target database
        are left as they are, so a crashed campaign can be resumed on the same file.

    :param path: The SQLite file.
    :type path: str
    :return: The engine.
    :rtype: sqlalchemy.engine.Engine
    """
    assert path, 'in-memory stores are not supported; give the store a file'
    engine = sqlalchemy.create_engine(f'sqlite:///{path}')
    models.metadata.create_all(bind=engine)
    logger.debug(
        f'Engine name: {engine.name}, '
        f'Engine driver: {engine.driver}, '
        f'Database: {engine.url}, '
        f'Current database tables: {sqlalchemy.inspect(engine).get_table_names()}',
    )
    return engine


def append_record(engine, values):
    """
    Insert one trial row, committing immediately.

    :param engine: The store engine.
    :type engine: sqlalchemy.engine.Engine
    :param values: The column values; the seed may be an int.
    :type values: dict
    :return: False when a row with the same key already exists, True otherwise.
    :rtype: bool
    """
    row = dict(values)
    row['seed'] = str(row['seed'])
    row['alpha'] = str(row['alpha'])
    try:
        with engine.begin() as connection:
            connection.execute(models.trial.insert().values(**row))
    except exc.IntegrityError as ex:
        if 'UNIQUE' not in str(ex.orig).upper():
            raise
        logger.debug(f'Duplicate trial {tuple(row[key] for key in KEY_COLUMNS)}; keeping the first')
        return False
    return True


def fetch_records(engine):
    """
    Read every stored trial.

    :return: One dict per row (without the surrogate id), seeds converted back to int.
    :rtype: list[dict]
    """
    columns = [column for column in models.trial.c if column.name != 'id']
    query = sqlalchemy.select(*columns).order_by(
        *(models.trial.c[key] for key in KEY_COLUMNS)
    )
    with engine.connect() as connection:
        rows = [dict(row._mapping) for row in connection.execute(query)]
    for row in rows:
        row['seed'] = int(row['seed'])
    return rows


def stored_keys(engine):
    """Return the set of (alpha, n, dist, p, trial_index) keys already in the store."""
    query = sqlalchemy.select(*(models.trial.c[key] for key in KEY_COLUMNS))
    with engine.connect() as connection:
        return {tuple(row) for row in connection.execute(query)}
