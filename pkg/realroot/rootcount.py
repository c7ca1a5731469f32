# SPDX-License-Identifier: AGPL-3.0-or-later


"""
Count the real roots of a sampled block-exponential polynomial.

Both real half-axes are handled in exponential coordinates (x = +-e**t). Far from the origin the
    count follows the block structure: every window [a_j, b_j] is certified root-free, and every
    transition [b_j, a_{j+1}] is certified to hold no root (leader signs agree) or exactly one root
    (leader signs differ). Everything that is not certified this way, including the near-origin
    region, goes through certified bisection. Regions bisection cannot settle are covered by a
    Rouche bound on a disk.

Classes:
========
    CountOptions: Precision ladder, bisection budget, leader factor and refinement width.
    RootInterval: An isolating t-interval of one real root on one axis.
    Certificate: The outcome of one structural certificate.
    Certifier: Per-realization evaluation helpers (precision ladder, point signs, bisection).
    WindowOutcome, TransitionOutcome, RoucheOutcome: Results of the structural certificates.
    RootCountReport: The full result of count_certified.
    RootCountError: Raised on precondition violations.
    OracleError: Raised when the oracle cannot separate the roots.

Functions:
==========
    predict: Sign-change prediction S_pos + S_neg.
    t_domain: Cauchy bounds [t_min, t_max] containing every real root in exponential coordinates.
    certify_window: No root in a window (or in the top region).
    certify_transition: No root, or exactly one isolated root, in a transition.
    rouche_bound: At most m_j roots in the disk |z| <= e**b_j.
    count_certified: Orchestrate everything into a RootCountReport.
    oracle_count: Independent ball-arithmetic (arb) root count for small degrees.

Miscellaneous objects:
======================
    Except for the public objects exported by this module and their public APIs (if applicable),
        everything else is an implementation detail, and shouldn't be relied upon as it may change
        over time.
"""

# Standard library
import dataclasses
import logging
import math

# Third-party
import flint
import mpmath
import numpy as np
from mpmath import libmp

# Project specific
from realroot import construction
from realroot import logeval
from realroot import noise

logger = logging.getLogger(__name__)

EXACT = 'exact'
BOUNDED = 'bounded'
FAILED = 'failed'
STATUSES = (EXACT, BOUNDED, FAILED)

WINDOW_TRANSITION = 'window-transition'
BISECTION = 'bisection'

NO_ROOT = 'no_root'
SINGLE_ROOT = 'single_root'
AT_MOST = 'at_most'
FAILURE = 'failed'

ORACLE_GRID_POINTS = 64
ORACLE_MAX_DEPTH = 160
# Fractions of the gap to the next grid point tried when a grid point has no certified sign.
ORACLE_SHIFTS = (0.0, 2.0**-10, 2.0**-7, 2.0**-4, 0.25)
# Split points tried, in order, when halving an unresolved oracle interval.
ORACLE_SPLITS = (0.5, 0.4472, 0.5528, 0.382, 0.618)

_FLOOR = libmp.round_floor
_CEILING = libmp.round_ceiling


class RootCountError(ValueError):
    """Raised when a root-count operation is called outside its preconditions."""


class OracleError(RuntimeError):
    """Raised when the oracle cannot separate candidate roots at its working precision."""


@dataclasses.dataclass(frozen=True)
class CountOptions:
    """Knobs of the certified counter (see default_settings.Config for their meaning)."""

    precision_ladder: tuple = (40, 128, 512, 4096)
    max_depth: int = 200
    leader_factor: float = 0.5
    refine_exponent: int = 20

    def __post_init__(self):
        ladder = tuple(int(prec) for prec in self.precision_ladder)
        if not ladder or any(prec < 24 for prec in ladder) or list(ladder) != sorted(ladder):
            raise RootCountError(f'invalid precision ladder {self.precision_ladder!r}')
        if not 0 < self.leader_factor <= 1:
            raise RootCountError(f'the leader factor must lie in (0, 1], got {self.leader_factor}')
        if self.max_depth < 1 or self.refine_exponent < 0:
            raise RootCountError('max_depth must be positive and refine_exponent nonnegative')
        object.__setattr__(self, 'precision_ladder', ladder)

    @classmethod
    def from_config(cls, config):
        """Build options from a configuration mapping (flask.Config or dict)."""
        ladder = config['PRECISION_LADDER']
        if isinstance(ladder, str):
            # key=value settings files carry the ladder as '40,128,512'.
            ladder = [int(prec) for prec in ladder.replace(' ', '').split(',') if prec]
        return cls(
            precision_ladder=tuple(ladder),
            max_depth=int(config['MAX_BISECTION_DEPTH']),
            leader_factor=float(config['LEADER_FACTOR']),
            refine_exponent=int(config['REFINE_EXPONENT']),
        )


@dataclasses.dataclass(frozen=True)
class RootInterval:
    """An interval [t_lo, t_hi] certified to hold exactly one simple root on an axis."""

    axis: str
    t_lo: mpmath.mpf
    t_hi: mpmath.mpf
    tag: str

    def to_dict(self):
        return {
            'axis': self.axis,
            't_lo': mpmath.nstr(self.t_lo, 17),
            't_hi': mpmath.nstr(self.t_hi, 17),
            'tag': self.tag,
        }


@dataclasses.dataclass(frozen=True)
class Certificate:
    """One structural certificate: which block, which kind, its outcome and its certified gap."""

    axis: str
    j: int
    kind: str
    outcome: str
    gap: object = None
    precision: int = 0
    factor: float = 0.0

    def to_dict(self):
        return {
            'axis': self.axis,
            'j': self.j,
            'kind': self.kind,
            'outcome': self.outcome,
            'gap': None if self.gap is None else mpmath.nstr(self.gap, 12),
            'precision': self.precision,
            'factor': self.factor,
        }


@dataclasses.dataclass(frozen=True)
class WindowOutcome:
    kind: str
    sign: int
    certificate: Certificate


@dataclasses.dataclass(frozen=True)
class TransitionOutcome:
    kind: str
    root: RootInterval
    certificate: Certificate


@dataclasses.dataclass(frozen=True)
class RoucheOutcome:
    kind: str
    bound: int
    j: int
    gap: object = None


@dataclasses.dataclass
class IndeterminateRegion:
    """A t-interval bisection could not settle; at_least is 1 when its endpoint signs differ."""

    axis: str
    t_lo: mpmath.mpf
    t_hi: mpmath.mpf
    at_least: int

    def to_dict(self):
        return {
            'axis': self.axis,
            't_lo': mpmath.nstr(self.t_lo, 17),
            't_hi': mpmath.nstr(self.t_hi, 17),
            'at_least': self.at_least,
        }


@dataclasses.dataclass
class RootCountReport:
    """
    The certified root count of one realization.

    status is exact iff count_lo == count_hi and no region stayed indeterminate.
    """

    status: str
    count_lo: int
    count_hi: int
    predicted: int
    s_pos: int
    s_neg: int
    roots: list = dataclasses.field(default_factory=list)
    indeterminate_regions: list = dataclasses.field(default_factory=list)
    certificates: list = dataclasses.field(default_factory=list)
    warnings: list = dataclasses.field(default_factory=list)
    rouche: dict = None

    @property
    def count(self):
        return self.count_lo if self.status == EXACT else None

    def to_dict(self):
        per_axis = []
        for axis in noise.AXES:
            roots = [root for root in self.roots if root.axis == axis]
            per_axis.append({
                'axis': axis,
                'sign_changes': self.s_pos if axis == noise.POSITIVE else self.s_neg,
                'certified_roots': len(roots),
                'roots': [root.to_dict() for root in roots],
            })
        return {
            'status': self.status,
            'count_lo': self.count_lo,
            'count_hi': self.count_hi,
            'predicted': self.predicted,
            'per_axis': per_axis,
            'certificates': [certificate.to_dict() for certificate in self.certificates],
            'indeterminate_regions': [region.to_dict() for region in self.indeterminate_regions],
            'rouche': self.rouche,
            'warnings': list(self.warnings),
        }


def predict(realization, schedule):
    """Return S_pos + S_neg, the sign-change prediction of the real-root count."""
    return (
        noise.sign_changes(realization, schedule, noise.POSITIVE)
        + noise.sign_changes(realization, schedule, noise.NEGATIVE)
    )


def _block_noise_caps(realization, schedule):
    """Return [(j, lo, hi, log max |eps| over the block, rounded up)] for every block."""
    caps = []
    for j, lo, hi in schedule.block_bounds():
        largest = float(np.max(np.abs(realization.values[lo:hi + 1])))
        caps.append((j, lo, hi, libmp.mpf_log(libmp.from_float(largest), 64, _CEILING)))
    return caps


def _log1p_exp_ceiling(x, prec=64):
    """Upper bound of log(1 + e**x)."""
    if libmp.mpf_gt(x, libmp.from_int(64)):
        return libmp.mpf_add(x, libmp.mpf_shift(libmp.fone, -60), prec, _CEILING)
    return libmp.mpf_log(
        libmp.mpf_add(libmp.fone, libmp.mpf_exp(x, prec, _CEILING), prec, _CEILING), prec, _CEILING
    )


def t_domain(realization, schedule):
    """
    Return (t_min, t_max) bounding every real root on both axes, or None when n = 0.

    t_max = log(1 + max_{k<n} exp(L_k - L_n)) with L_k = log c_k + log|eps_k| (Cauchy's bound), and
        t_min is the mirror bound from the reversed polynomial. Both are rounded outwards.
    """
    n = schedule.n
    if realization.n != n:
        raise RootCountError(f'realization degree {realization.n} != schedule degree {n}')
    if n == 0:
        return None

    magnitudes = np.abs(realization.values)
    log_n_lo = libmp.mpf_log(libmp.from_float(float(magnitudes[n])), 64, _FLOOR)
    log_0_lo = libmp.mpf_log(libmp.from_float(float(magnitudes[0])), 64, _FLOOR)
    top = construction.log_c_raw(schedule.j_star)

    upper_gap = None
    lower_gap = None
    for j, lo, hi, cap in _block_noise_caps(realization, schedule):
        coefficient = construction.log_c_raw(j)
        if lo <= n - 1:
            # Block maxima over k < n; the last block's own max may include n, which only loosens.
            candidate = libmp.mpf_add(
                libmp.mpf_sub(libmp.mpf_add(coefficient, cap), top), libmp.mpf_neg(log_n_lo),
                64, _CEILING,
            )
            if upper_gap is None or libmp.mpf_gt(candidate, upper_gap):
                upper_gap = candidate
        if hi >= 1:
            candidate = libmp.mpf_add(
                libmp.mpf_sub(libmp.mpf_add(coefficient, cap), libmp.from_int(-1)),
                libmp.mpf_neg(log_0_lo), 64, _CEILING,
            )
            if lower_gap is None or libmp.mpf_gt(candidate, lower_gap):
                lower_gap = candidate

    t_max = _log1p_exp_ceiling(upper_gap)
    t_min = libmp.mpf_neg(_log1p_exp_ceiling(lower_gap))
    return construction.make_mpf(t_min), construction.make_mpf(t_max)


def near_origin_cut(schedule):
    """Return k0 = max(j0, ceil(ln n)), the first block handled structurally."""
    n = schedule.n
    log_cut = math.ceil(math.log(n)) if n > 1 else 0
    return max(schedule.j0, log_cut)


class Certifier:
    """Shared evaluation helpers for one realization (point-sign cache, precision ladder)."""

    def __init__(self, realization, schedule, options):
        self.realization = realization
        self.schedule = schedule
        self.options = options
        self._point_signs = {}

    def ladder(self, evaluate):
        """
        Run evaluate(prec) along the precision ladder.

        Stops at the first determinate answer, or at an indeterminate one that no wider rung could
            settle (logeval.worth_escalating).
        """
        result = None
        for prec in self.options.precision_ladder:
            result = evaluate(prec)
            if not logeval.worth_escalating(result, self.schedule.n):
                break
        return result

    def point_sign(self, t, axis):
        key = (axis, logeval.as_raw(t))
        cached = self._point_signs.get(key)
        if cached is None:
            request = logeval.EvalRequest(t=t, axis=axis)
            cached = self.ladder(
                lambda prec: logeval.eval_sign(request, self.realization, self.schedule, prec)
            )
            self._point_signs[key] = cached
        return cached.sign

    def interval_sign(self, lo, hi, axis, weight=logeval.NO_WEIGHT):
        request = logeval.EvalRequest(t=lo, axis=axis, weight=weight, t_hi=hi)
        return self.ladder(
            lambda prec: logeval.eval_sign(request, self.realization, self.schedule, prec)
        ).sign

    def relative(self, leader, left, right, lo, hi, factor, weight=logeval.NO_WEIGHT):
        return self.ladder(lambda prec: logeval.relative_dominance(
            self.realization, self.schedule, leader, left, right, lo, hi, factor, weight, prec
        ))

    def bisect(self, lo, hi, axis):
        """
        Certified bisection of [lo, hi].

        A piece is root-free when its interval enclosure has a sign; it holds exactly one root (or
            none) when the derivative has a sign and the endpoint signs are known. Otherwise it is
            halved, up to options.max_depth times.

        :return: (roots, indeterminate regions)
        """
        roots, regions = [], []
        self._bisect(construction.make_mpf(logeval.as_raw(lo)),
                     construction.make_mpf(logeval.as_raw(hi)), axis, 0, roots, regions)
        return roots, regions

    def _bisect(self, lo, hi, axis, depth, roots, regions):
        if self.interval_sign(lo, hi, axis) != logeval.INDETERMINATE:
            return
        if self.interval_sign(lo, hi, axis, logeval.DERIVATIVE_WEIGHT) != logeval.INDETERMINATE:
            sign_lo, sign_hi = self.point_sign(lo, axis), self.point_sign(hi, axis)
            if sign_lo and sign_hi:
                if sign_lo != sign_hi:
                    roots.append(RootInterval(axis, lo, hi, BISECTION))
                return
        if depth >= self.options.max_depth:
            sign_lo, sign_hi = self.point_sign(lo, axis), self.point_sign(hi, axis)
            at_least = int(bool(sign_lo and sign_hi and sign_lo != sign_hi))
            logger.info(f'Bisection budget exhausted on {axis} axis at [{lo}, {hi}]')
            regions.append(IndeterminateRegion(axis, lo, hi, at_least))
            return
        middle = construction.make_mpf(
            libmp.mpf_shift(libmp.mpf_add(lo._mpf_, hi._mpf_), -1)
        )
        self._bisect(lo, middle, axis, depth + 1, roots, regions)
        self._bisect(middle, hi, axis, depth + 1, roots, regions)

    def refine(self, lo, hi, axis, sign_lo):
        """Halve [lo, hi] around its single root until the width target is met."""
        target = libmp.mpf_shift(libmp.mpf_sub(hi._mpf_, lo._mpf_), -self.options.refine_exponent)
        lo_raw, hi_raw = lo._mpf_, hi._mpf_
        while libmp.mpf_gt(libmp.mpf_sub(hi_raw, lo_raw), target):
            middle = libmp.mpf_shift(libmp.mpf_add(lo_raw, hi_raw), -1)
            sign = self.point_sign(middle, axis)
            if sign == logeval.INDETERMINATE:
                break
            if sign == sign_lo:
                lo_raw = middle
            else:
                hi_raw = middle
        return construction.make_mpf(lo_raw), construction.make_mpf(hi_raw)


def _check_realization(realization, schedule):
    if realization.n != schedule.n:
        raise RootCountError(
            f'realization degree {realization.n} != schedule degree {schedule.n}'
        )


def _leader_sign(realization, index, axis):
    return int(noise.term_signs(realization, axis)[index])


def _gap(result):
    return result.gap if result.sign > 0 else None


def certify_window(j, realization, schedule, axis=noise.POSITIVE, options=None, certifier=None):
    """
    Certify that g_n keeps the sign of its block leader on [a_j, b_j].

    For j = j_star the region is [a_top, +inf) and the leader is the term n.

    :return: WindowOutcome(no_root, sign) or WindowOutcome(failed, 0).
    :raises RootCountError: If j lies outside j0..j_star.
    """
    _check_realization(realization, schedule)
    options = options or CountOptions()
    if not schedule.j0 <= j <= schedule.j_star:
        raise RootCountError(
            f'windows are certified for j0={schedule.j0} <= j <= {schedule.j_star}, got {j}'
        )
    certifier = certifier or Certifier(realization, schedule, options)
    n = schedule.n
    if j == schedule.j_star:
        window = schedule.top_window()
        leader, factor, kind = n, 1.0, logeval.TOP
        result = certifier.relative(n, (0, n - 1), None, window.a, window.b, factor)
    else:
        window = schedule.window(j)
        leader, factor, kind = schedule.m_of(j), options.leader_factor, 'window'
        result = certifier.relative(leader, (0, leader - 1), (leader + 1, n), window.a, window.b,
                                  factor)
    certified = result.sign > 0
    certificate = Certificate(axis, j, kind, NO_ROOT if certified else FAILURE, _gap(result),
                              result.precision, factor)
    if not certified:
        return WindowOutcome(FAILURE, 0, certificate)
    return WindowOutcome(NO_ROOT, _leader_sign(realization, leader, axis), certificate)


def _transition_bounds(schedule, j):
    lo = schedule.window(j).b
    if j + 1 == schedule.j_star:
        hi = schedule.top_window().a
    else:
        hi = schedule.window(j + 1).a
    return lo, hi


def certify_transition(j, realization, schedule, axis=noise.POSITIVE, options=None, certifier=None):
    """
    Certify the transition [b_j, a_{j+1}] between the leaders p = m_j and q (m_{j+1}, or n).

    Agreeing leader signs: g_n has no root when the terms below p stay under factor * |term p|
        from b_j on, and both the middle block (p, q) (from b_j on) and the terms above q (up to
        a_{j+1}) stay under factor * |term q|, with factor <= 1/2.
    Differing leader signs: the endpoint signs must match the leaders, and the derivative of
        exp(-t (p+q)/2) g_n(t), i.e. the sum weighted by (2i - p - q)/(q - p), must be dominated by
        its two leaders; it then has a constant sign and the root is unique. The root is refined
        by bisection to width 2**-refine_exponent times the transition length.

    :return: TransitionOutcome(no_root | single_root | failed).
    :raises RootCountError: If j lies outside j0..j_star-1.
    """
    _check_realization(realization, schedule)
    options = options or CountOptions()
    if not schedule.j0 <= j < schedule.j_star:
        raise RootCountError(
            f'transitions are certified for j0={schedule.j0} <= j < j_star={schedule.j_star}'
        )
    certifier = certifier or Certifier(realization, schedule, options)
    n = schedule.n
    p, q = schedule.m_of(j), schedule.leader(j + 1)
    lo, hi = _transition_bounds(schedule, j)
    sign_p, sign_q = _leader_sign(realization, p, axis), _leader_sign(realization, q, axis)
    middle = (p + 1, q - 1)
    right = (q + 1, n)

    if sign_p == sign_q:
        factor = min(options.leader_factor, 0.5)
        checks = [certifier.relative(p, (0, p - 1), None, lo, lo, factor)]
        if middle[0] <= middle[1]:
            checks.append(certifier.relative(q, middle, None, lo, lo, factor))
        if right[0] <= right[1]:
            checks.append(certifier.relative(q, None, right, hi, hi, factor))
        certified = all(check.sign > 0 for check in checks)
        gap = min((check.gap for check in checks), default=mpmath.inf) if certified else None
        precision = max(check.precision for check in checks)
        certificate = Certificate(axis, j, 'no-change', NO_ROOT if certified else FAILURE, gap,
                                  precision, factor)
        return TransitionOutcome(NO_ROOT if certified else FAILURE, None, certificate)

    factor = options.leader_factor
    weight = logeval.Weight.rescaled(p, q)
    endpoints_ok = (certifier.point_sign(lo, axis) == sign_p
                    and certifier.point_sign(hi, axis) == sign_q)
    checks = []
    if endpoints_ok:
        checks.append(certifier.relative(p, (0, p - 1), None, lo, lo, factor, weight))
        checks.append(certifier.relative(q, middle, right, lo, hi, factor, weight))
    certified = endpoints_ok and all(check.sign > 0 for check in checks)
    gap = min(check.gap for check in checks) if certified else None
    precision = max((check.precision for check in checks), default=0)
    certificate = Certificate(axis, j, 'yes-change', SINGLE_ROOT if certified else FAILURE, gap,
                              precision, factor)
    if not certified:
        return TransitionOutcome(FAILURE, None, certificate)
    root_lo, root_hi = certifier.refine(lo, hi, axis, sign_p)
    return TransitionOutcome(SINGLE_ROOT, RootInterval(axis, root_lo, root_hi, WINDOW_TRANSITION),
                             certificate)


def rouche_bound(j, realization, schedule, options=None):
    """
    Certify that f_n has at most m_j zeros in the disk |z| <= e**b_j.

    On the circle, |eps_{m_j}| c_{m_j} e^{m_j b_j} > sum over i != m_j of |eps_i| c_i e^{i b_j}, so
        f_n and its leading monomial have the same number of zeros inside.

    :return: RoucheOutcome(at_most, m_j) or RoucheOutcome(failed).
    :raises RootCountError: If j < j0 or m_j >= n.
    """
    _check_realization(realization, schedule)
    options = options or CountOptions()
    if j < schedule.j0 or j < 1:
        raise RootCountError(f'the disk bound needs j >= j0={schedule.j0}, got {j}')
    if schedule.m_of(j) >= schedule.n:
        raise RootCountError(f'the disk bound needs m_j < n, got m_{j}={schedule.m_of(j)}')
    b = schedule.window(j).b
    result = None
    for prec in options.precision_ladder:
        result = logeval.dominance_margin(j, b, realization, schedule, logeval.FULL, 1.0, prec)
        if result.is_determinate:
            break
    if result.sign > 0:
        return RoucheOutcome(AT_MOST, schedule.m_of(j), j, result.gap)
    return RoucheOutcome(FAILURE, None, j, None)


def _axis_pieces(certifier, axis, domain, report):
    """
    Certify the structural pieces of one axis.

    :return: (certified roots, bisection segments as (lo, hi) pairs in increasing order)
    """
    realization, schedule, options = certifier.realization, certifier.schedule, certifier.options
    t_min, t_max = domain
    k0 = near_origin_cut(schedule)
    j_star = schedule.j_star
    if k0 > j_star - 1:
        return [], [(t_min, t_max)]

    # (lo, hi, settled) in increasing order of t; unsettled pieces are bisected.
    pieces = [(t_min, schedule.window(k0).a, False)]
    roots = []
    for j in range(k0, j_star):
        window = schedule.window(j)
        outcome = certify_window(j, realization, schedule, axis, options, certifier)
        report.certificates.append(outcome.certificate)
        pieces.append((window.a, window.b, outcome.kind == NO_ROOT))

        lo, hi = _transition_bounds(schedule, j)
        transition = certify_transition(j, realization, schedule, axis, options, certifier)
        report.certificates.append(transition.certificate)
        if transition.root is not None:
            roots.append(transition.root)
        pieces.append((lo, hi, transition.kind != FAILURE))

    top = certify_window(j_star, realization, schedule, axis, options, certifier)
    report.certificates.append(top.certificate)
    top_start = schedule.top_window().a
    if top.kind == NO_ROOT:
        pieces.append((top_start, mpmath.inf, True))
    elif top_start < t_max:
        pieces.append((top_start, t_max, False))

    segments = []
    for lo, hi, settled in pieces:
        # No root lies outside the Cauchy bounds.
        lo, hi = max(lo, t_min), min(hi, t_max)
        if settled or hi <= lo:
            continue
        if segments and segments[-1][1] == lo:
            segments[-1] = (segments[-1][0], hi)
        else:
            segments.append((lo, hi))
    return roots, segments


def _disk_cover(certifier, report, regions):
    """Bound the roots hidden in indeterminate regions with the smallest usable disk."""
    schedule = certifier.schedule
    reach = max(region.t_hi for region in regions)
    j = max(schedule.j0, 1)
    while j < schedule.j_star and schedule.m_of(j) < schedule.n:
        if schedule.window(j).b >= reach:
            outcome = rouche_bound(j, certifier.realization, schedule, certifier.options)
            report.rouche = {
                'j': j,
                'outcome': outcome.kind,
                'bound': outcome.bound,
                'radius_log': mpmath.nstr(schedule.window(j).b, 17),
            }
            return outcome
        j += 1
    return None


def count_certified(realization, schedule, options=None):
    """
    Count the real roots of f_n on both axes.

    :param realization: The noise vector.
    :type realization: realroot.noise.NoiseRealization
    :param schedule: The coefficient schedule.
    :type schedule: realroot.construction.CoefficientSchedule
    :param options: Counter knobs; defaults to CountOptions().
    :type options: CountOptions
    :return: The report; failures are encoded in its status, never raised.
    :rtype: RootCountReport
    """
    _check_realization(realization, schedule)
    options = options or CountOptions()
    s_pos = noise.sign_changes(realization, schedule, noise.POSITIVE)
    s_neg = noise.sign_changes(realization, schedule, noise.NEGATIVE)
    report = RootCountReport(EXACT, 0, 0, s_pos + s_neg, s_pos, s_neg)
    domain = t_domain(realization, schedule)
    if domain is None:
        return report

    certifier = Certifier(realization, schedule, options)
    for axis in noise.AXES:
        roots, segments = _axis_pieces(certifier, axis, domain, report)
        for lo, hi in segments:
            found, regions = certifier.bisect(lo, hi, axis)
            roots.extend(found)
            report.indeterminate_regions.extend(regions)
        roots.sort(key=lambda root: root.t_lo)
        report.roots.extend(roots)

    certified = len(report.roots)
    regions = report.indeterminate_regions
    if not regions:
        report.count_lo = report.count_hi = certified
        if certified % 2 != schedule.n % 2:
            message = (f'parity: {certified} real roots for degree {schedule.n}; '
                       'a multiple or near-multiple root is likely')
            logger.warning(message)
            report.warnings.append(message)
        return report

    report.count_lo = certified + sum(region.at_least for region in regions)
    outcome = _disk_cover(certifier, report, regions)
    if outcome is None or outcome.kind != AT_MOST:
        report.status = FAILED
        report.count_hi = schedule.n
        return report

    radius = schedule.window(outcome.j).b
    outside = sum(1 for root in report.roots if root.t_hi > radius)
    report.status = BOUNDED
    report.count_hi = min(schedule.n, outcome.bound + outside)
    assert report.count_lo <= report.count_hi, 'the disk bound contradicts certified roots'
    return report


class _Oracle:
    """
    Direct ball-arithmetic evaluation of f_n, sharing no code with the log-domain evaluator.

    Each axis becomes a polynomial h in x > 0 (h(x) = f_n(x) or f_n(-x)) with arb coefficients;
        g(t) = h(e^t) and g'(t) = e^t h'(e^t), so both signs come from Horner evaluations at the
        ball e^T.
    """

    def __init__(self, realization, schedule):
        self.n = schedule.n
        scales = {}
        coefficients = []
        for j, block_lo, block_hi in schedule.block_bounds():
            scales[j] = flint.arb(-(2 ** j)).exp()
            coefficients.extend(flint.arb(float(realization.values[k])) * scales[j]
                                for k in range(block_lo, block_hi + 1))
        self.coefficients = coefficients
        mirrored = [-value if k % 2 else value for k, value in enumerate(coefficients)]
        self.polynomials = {noise.POSITIVE: flint.arb_poly(coefficients),
                            noise.NEGATIVE: flint.arb_poly(mirrored)}
        self.derivatives = {axis: polynomial.derivative()
                            for axis, polynomial in self.polynomials.items()}
        self._point_signs = {}

    @staticmethod
    def sign(value):
        if value > 0:
            return 1
        if value < 0:
            return -1
        return 0

    def evaluate(self, lo, hi, axis, derivative=False):
        """Enclosure of h (or h') over x in [e^lo, e^hi]."""
        lo_ball, hi_ball = flint.arb(lo), flint.arb(hi)
        if lo == hi:
            t = lo_ball
        else:
            t = flint.arb((lo_ball + hi_ball) / 2, (hi_ball - lo_ball) / 2)
        polynomial = self.derivatives[axis] if derivative else self.polynomials[axis]
        return polynomial(t.exp())

    def point_sign(self, t, axis):
        key = (axis, t)
        if key not in self._point_signs:
            self._point_signs[key] = self.sign(self.evaluate(t, t, axis))
        return self._point_signs[key]

    def domain(self):
        """Cauchy bounds [t_min, t_max], computed directly from the coefficients."""
        magnitudes = [abs(value) for value in self.coefficients]
        upper = max(float((1 + magnitude / magnitudes[-1]).log().upper())
                    for magnitude in magnitudes[:-1])
        lower = max(float((1 + magnitude / magnitudes[0]).log().upper())
                    for magnitude in magnitudes[1:])
        if not (math.isfinite(upper) and math.isfinite(lower)):
            raise OracleError('the Cauchy bounds are not finite')
        return -lower * (1 + 1e-12) - 1e-12, upper * (1 + 1e-12) + 1e-12

    def settle(self, grid, axis):
        """
        Move every interior grid point whose sign is not certified toward its right neighbour.

        :return: (t, sign) pairs; a sign of 0 is kept when no shift certifies one.
        """
        settled = [(grid[0], self.point_sign(grid[0], axis))]
        for point, following in zip(grid[1:-1], grid[2:]):
            sign = 0
            for fraction in ORACLE_SHIFTS:
                candidate = point + fraction * (following - point)
                sign = self.point_sign(candidate, axis)
                if sign:
                    point = candidate
                    break
            settled.append((point, sign))
        settled.append((grid[-1], self.point_sign(grid[-1], axis)))
        return settled

    def split(self, lo, hi, axis):
        """A point strictly inside (lo, hi), with a certified sign when one can be found."""
        for fraction in ORACLE_SPLITS:
            middle = lo + fraction * (hi - lo)
            if lo < middle < hi:
                sign = self.point_sign(middle, axis)
                if sign:
                    return middle, sign
        middle = lo + (hi - lo) / 2
        if not lo < middle < hi:
            raise OracleError(f'[{lo!r}, {hi!r}] on the {axis} axis cannot be split further')
        return middle, 0

    def count(self, lo, hi, sign_lo, sign_hi, axis, depth=0):
        if self.sign(self.evaluate(lo, hi, axis)):
            return 0
        if sign_lo and sign_hi and self.sign(self.evaluate(lo, hi, axis, derivative=True)):
            return int(sign_lo != sign_hi)
        if depth >= ORACLE_MAX_DEPTH:
            raise OracleError(
                f'cannot separate roots on the {axis} axis in [{lo!r}, {hi!r}] at '
                f'{flint.ctx.prec} bits'
            )
        middle, sign_middle = self.split(lo, hi, axis)
        return (self.count(lo, middle, sign_lo, sign_middle, axis, depth + 1)
                + self.count(middle, hi, sign_middle, sign_hi, axis, depth + 1))


def _oracle_grid(t_min, t_max):
    """A uniform grid over [t_min, t_max] merged with a logarithmic grid over [1, t_max]."""
    points = set(np.linspace(t_min, t_max, ORACLE_GRID_POINTS).tolist())
    if t_max > 1:
        points.update(np.geomspace(1.0, t_max, ORACLE_GRID_POINTS + 1).tolist())
    points = sorted(point for point in points if t_min <= point <= t_max)
    points[0], points[-1] = t_min, t_max
    return points


def oracle_count(realization, schedule, precision_bits=256, max_degree=2000):
    """
    Count real roots by direct ball arithmetic (no blocks, no absorption, no log domain).

    Grid points are shifted off places where the sign is not certified (a root sitting on a grid
        point), then every grid interval is counted by bisection with derivative signs.

    :raises RootCountError: If n exceeds max_degree.
    :raises OracleError: If two candidate roots cannot be separated at precision_bits.
    """
    _check_realization(realization, schedule)
    if schedule.n > max_degree:
        raise RootCountError(f'the oracle is capped at degree {max_degree}, got {schedule.n}')
    if schedule.n == 0:
        return 0
    saved = flint.ctx.prec
    flint.ctx.prec = precision_bits
    try:
        oracle = _Oracle(realization, schedule)
        grid = _oracle_grid(*oracle.domain())
        total = 0
        for axis in noise.AXES:
            settled = oracle.settle(grid, axis)
            for (lo, sign_lo), (hi, sign_hi) in zip(settled, settled[1:]):
                total += oracle.count(lo, hi, sign_lo, sign_hi, axis)
    finally:
        flint.ctx.prec = saved
    logger.debug(f'oracle: {total} real roots (n={schedule.n}, {precision_bits} bits)')
    return total
