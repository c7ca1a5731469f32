# SPDX-License-Identifier: AGPL-3.0-or-later


"""
Check the deterministic increment inequalities and scan the frequency of certificate failures.

Classes:
========
    IncrementRow: One block of the increment table.
    IncrementTable: The increment table of an alpha, with j0 and the first passing block J1.
    EventFrequency: Failures of one certificate kind at one block, over a number of trials.
    DecayFit: Least-squares fit of log failure frequency against j**2 for one event kind.

Functions:
==========
    check_increments: Evaluate the two log-ratios at the window endpoints against their budgets.
    event_scan: Count certificate failures per block and kind over sampled realizations.
    decay_slopes: Fit the failure-frequency decay of every event kind.

CONSTANTS:
==========
    EVENT_KINDS: The certificate kinds reported by event_scan, in output order.
    PSEUDOCOUNT: Added to failure counts before taking logs.

Notes
=====
    With phi_j(t) = exp(-2**j + m_j * t), both log-ratios are affine in t:
        log(phi_{j-1} / phi_j)(t) = 2**(j-1) - (m_j - m_{j-1}) * t decreases,
            so a_j is its worst point;
        log(phi_{j+1} / phi_j)(t) = -2**j + (m_{j+1} - m_j) * t increases,
            so b_j is its worst point.

Miscellaneous objects:
======================
    Except for the public objects exported by this module and their public APIs (if applicable),
        everything else is an implementation detail, and shouldn't be relied upon as it may change
        over time.
"""

# Standard library
import collections
import dataclasses
import logging

# Third-party
import mpmath
import numpy as np

# Project specific
from realroot import construction
from realroot import logeval
from realroot import noise
from realroot import rootcount

logger = logging.getLogger(__name__)

DOMINANCE_FULL = 'dominance-full'
DOMINANCE_LEFT = 'dominance-left'
DOMINANCE_RIGHT = 'dominance-right'
NO_ROOT = 'no-root'
TOP = 'top'
NO_CHANGE = 'no-change'
YES_CHANGE = 'yes-change'
EVENT_KINDS = (DOMINANCE_FULL, DOMINANCE_LEFT, DOMINANCE_RIGHT, NO_ROOT, TOP, NO_CHANGE, YES_CHANGE)

PSEUDOCOUNT = 0.5


@dataclasses.dataclass(frozen=True)
class IncrementRow:
    j: int
    lhs_left: mpmath.mpf
    lhs_right: mpmath.mpf
    budget_left: mpmath.mpf
    budget_right: mpmath.mpf

    @property
    def pass_left(self):
        return self.lhs_left <= self.budget_left

    @property
    def pass_right(self):
        return self.lhs_right <= self.budget_right

    @property
    def passed(self):
        return self.pass_left and self.pass_right


@dataclasses.dataclass(frozen=True)
class IncrementTable:
    """
    The increment table of one alpha.

    j1 is the first j from which every row up to the last one passes on both sides, or None when
        the last row fails.
    """

    alpha: object
    j0: int
    j1: int
    rows: tuple

    def row(self, j):
        return self.rows[j - self.rows[0].j]


@dataclasses.dataclass(frozen=True)
class EventFrequency:
    j: int
    kind: str
    trials: int
    failures: int

    def __post_init__(self):
        assert 0 <= self.failures <= self.trials, 'more failures than trials'

    @property
    def frequency(self):
        return self.failures / self.trials if self.trials else 0.0


@dataclasses.dataclass(frozen=True)
class DecayFit:
    kind: str
    slope: float
    intercept: float
    points: int


def check_increments(alpha, j_lo, j_hi):
    """
    Evaluate the increment inequalities of blocks j_lo..j_hi.

    Budgets: -2**(j-1) * j**-beta / 2 on the left side and -2**j * j**-beta / 2 on the right side.

    :param alpha: The exponent.
    :type alpha: float | str | fractions.Fraction
    :param j_lo: First block (>= 1; windows need not be ordered for the inequality itself).
    :type j_lo: int
    :param j_hi: Last block.
    :type j_hi: int
    :return: The table, with j0 and J1.
    :rtype: IncrementTable
    :raises ConstructionError: On an invalid alpha or an empty or out-of-horizon block range.
    """
    params = construction.make_params(alpha)
    if not 1 <= j_lo <= j_hi < construction.HORIZON:
        raise construction.ConstructionError(
            f'expected 1 <= j_lo <= j_hi < {construction.HORIZON}, got {j_lo}..{j_hi}'
        )
    beta = mpmath.mpf(params.beta.numerator) / params.beta.denominator

    rows = []
    with mpmath.workprec(construction.WINDOW_PRECISION):
        for j in range(j_lo, j_hi + 1):
            window = params.window(j)
            shrink = mpmath.power(j, -beta) / 2
            lhs_left = mpmath.ldexp(1, j - 1) - (params.m_of(j) - params.m_of(j - 1)) * window.a
            lhs_right = -mpmath.ldexp(1, j) + (params.m_of(j + 1) - params.m_of(j)) * window.b
            rows.append(IncrementRow(
                j=j,
                lhs_left=lhs_left,
                lhs_right=lhs_right,
                budget_left=-mpmath.ldexp(1, j - 1) * shrink,
                budget_right=-mpmath.ldexp(1, j) * shrink,
            ))

    j1 = None
    for row in reversed(rows):
        if not row.passed:
            break
        j1 = row.j
    logger.info(f'Increments for alpha={params.alpha}: j0={params.j0}, J1={j1} on {j_lo}..{j_hi}')
    return IncrementTable(alpha=params.alpha, j0=params.j0, j1=j1, rows=tuple(rows))


def _dominates(certifier, j, side, factor):
    window = certifier.schedule.window(j)
    result = certifier.ladder(lambda prec: logeval.dominance_over(
        j, window.a, window.b, certifier.realization, certifier.schedule, side, factor, prec
    ))
    return result.sign > 0


def _scan_realization(realization, schedule, options, tally):
    """Add one realization's certificate outcomes to tally[(j, kind)] = [trials, failures]."""
    certifier = rootcount.Certifier(realization, schedule, options)
    factor = options.leader_factor

    def record(j, kind, passed):
        entry = tally[(j, kind)]
        entry[0] += 1
        entry[1] += int(not passed)

    for j in range(schedule.j0, schedule.j_star):
        record(j, DOMINANCE_FULL, _dominates(certifier, j, logeval.FULL, 1.0))
        record(j, DOMINANCE_LEFT, _dominates(certifier, j, logeval.LEFT, factor / 2))
        record(j, DOMINANCE_RIGHT, _dominates(certifier, j, logeval.RIGHT, factor / 2))

        outcome = rootcount.certify_window(j, realization, schedule, noise.POSITIVE, options,
                                           certifier)
        record(j, NO_ROOT, outcome.kind == rootcount.NO_ROOT)

        transition = rootcount.certify_transition(j, realization, schedule, noise.POSITIVE,
                                                  options, certifier)
        kind = NO_CHANGE if transition.certificate.kind == 'no-change' else YES_CHANGE
        record(j, kind, transition.kind != rootcount.FAILURE)

    if schedule.j_star >= max(schedule.j0, 1):
        top = rootcount.certify_window(schedule.j_star, realization, schedule, noise.POSITIVE,
                                       options, certifier)
        record(schedule.j_star, TOP, top.kind == rootcount.NO_ROOT)


def event_scan(spec, alpha, n, trials, seeds=None, master_seed=0, options=None):
    """
    Count certificate failures per block over `trials` sampled realizations.

    Windows and transitions are scanned on the positive axis for every j0 <= j < j_star, and the top
        region at j_star. Dominance events compare the block leader with all other terms (factor 1)
        and with each side separately (half the leader factor each).

    :param spec: The noise law.
    :type spec: realroot.noise.NoiseSpec
    :param alpha: The exponent.
    :param n: The degree.
    :param trials: Number of realizations.
    :param seeds: Optional explicit seeds (one per trial); defaults to mix64(trial, master_seed).
    :param master_seed: The campaign seed used when seeds is None.
    :param options: Counter knobs.
    :type options: realroot.rootcount.CountOptions
    :return: Frequencies sorted by (j, kind order).
    :rtype: list[EventFrequency]
    """
    if trials < 0:
        raise ValueError(f'trials must be nonnegative, got {trials}')
    if seeds is not None and len(seeds) < trials:
        raise ValueError(f'{trials} trials need as many seeds, got {len(seeds)}')
    options = options or rootcount.CountOptions()
    schedule = construction.make_schedule(alpha, n)
    tally = collections.defaultdict(lambda: [0, 0])

    for trial_index in range(trials):
        seed = seeds[trial_index] if seeds is not None else noise.mix64(trial_index, master_seed)
        realization = noise.sample(spec, n, seed)
        _scan_realization(realization, schedule, options, tally)

    order = {kind: position for position, kind in enumerate(EVENT_KINDS)}
    return [
        EventFrequency(j, kind, counts[0], counts[1])
        for (j, kind), counts in sorted(tally.items(), key=lambda item: (item[0][0],
                                                                          order[item[0][1]]))
    ]


def decay_slopes(events):
    """
    Fit log((failures + 0.5) / (trials + 1)) = slope * j**2 + intercept for every event kind.

    Kinds observed at fewer than two distinct blocks are skipped.

    :rtype: list[DecayFit]
    """
    by_kind = collections.defaultdict(list)
    for event in events:
        if event.trials:
            by_kind[event.kind].append(event)

    fits = []
    for kind in EVENT_KINDS:
        rows = by_kind.get(kind, [])
        if len({row.j for row in rows}) < 2:
            continue
        j = np.array([row.j for row in rows], dtype=np.float64)
        frequency = np.array(
            [(row.failures + PSEUDOCOUNT) / (row.trials + 1) for row in rows], dtype=np.float64
        )
        design = np.column_stack([j**2, np.ones_like(j)])
        (slope, intercept), *_ = np.linalg.lstsq(design, np.log(frequency), rcond=None)
        fits.append(DecayFit(kind, float(slope), float(intercept), len(rows)))
    return fits
