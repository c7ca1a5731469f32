# SPDX-License-Identifier: AGPL-3.0-or-later


"""
Implement the logical structure of the campaign trial store.

Notes
=====
    One row per completed trial. A trial is identified by (alpha, n, dist, p, trial_index); the
        unique constraint is what makes a resumed campaign skip trials it already holds.
    Seeds are 64-bit unsigned integers, which overflow SQLite's signed INTEGER, so they are stored
        as decimal text.

Global variables:
=================
    metadata: A collection of Table objects and their associated schema constructs.
    trial: The trial entity with its corresponding attributes.

Miscellaneous objects:
======================
    Except for the public objects exported by this module and their public APIs (if applicable),
        everything else is an implementation detail, and shouldn't be relied upon as it may change
        over time.
"""

# Third party
import sqlalchemy

metadata = sqlalchemy.MetaData()

trial = sqlalchemy.Table(
    'trial',
    metadata,
    sqlalchemy.Column('id', sqlalchemy.Integer, primary_key=True),
    sqlalchemy.Column('alpha', sqlalchemy.String, nullable=False),
    sqlalchemy.Column('n', sqlalchemy.Integer, nullable=False),
    sqlalchemy.Column('dist', sqlalchemy.String, nullable=False),
    sqlalchemy.Column('p', sqlalchemy.Float, nullable=False),
    sqlalchemy.Column('trial_index', sqlalchemy.Integer, nullable=False),
    sqlalchemy.Column('seed', sqlalchemy.String, nullable=False),
    sqlalchemy.Column('s_pos', sqlalchemy.Integer, nullable=False),
    sqlalchemy.Column('s_neg', sqlalchemy.Integer, nullable=False),
    sqlalchemy.Column('predicted', sqlalchemy.Integer, nullable=False),
    sqlalchemy.Column('count_lo', sqlalchemy.Integer, nullable=False),
    sqlalchemy.Column('count_hi', sqlalchemy.Integer, nullable=False),
    sqlalchemy.Column(
        sqlalchemy.CheckConstraint("status IN ('exact', 'bounded', 'failed')", name='status_kind'),
        name='status',
        type_=sqlalchemy.String,
        nullable=False,
    ),
    sqlalchemy.Column('wall_ms', sqlalchemy.Float, nullable=False),
    sqlalchemy.CheckConstraint('count_lo <= count_hi', name='count_order'),
    sqlalchemy.UniqueConstraint('alpha', 'n', 'dist', 'p', 'trial_index', name='trial_key'),
)
