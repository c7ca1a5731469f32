# SPDX-License-Identifier: AGPL-3.0-or-later


"""
Certify the sign of g_n(t) = f_n(e^t) and of related weighted sums in log-magnitude arithmetic.

Every term of g_n is sign_k * exp(L_k(t)) with L_k(t) = -2**j(k) + k*t + log|eps_k| (+ log|w_k| for
    weighted sums). The positive and the negative terms are summed separately, each side gets a
    certified log enclosure, and the sign is determinate when the two enclosures are disjoint.

Classes:
========
    Weight: Per-term multipliers (none, derivative, rescaled).
    EvalRequest: A point or interval evaluation request.
    SignedLogInterval: A certified sign plus log-magnitude enclosure (or an indeterminate answer).
    TermTable: Per-realization data shared by all evaluations (signs, log-magnitudes, blocks).
    EvaluationError: Raised on NaN, infinite or inverted inputs.

Functions:
==========
    eval_sign: Certified sign of the (weighted) polynomial at a point or over an interval.
    dominance_margin: Certified sign of factor * leader - sum(competitors) at a point.
    relative_dominance: Leader versus competitors over a t-interval, using the affine-in-t ratios.
    dominance_over: relative_dominance with the competitor ranges of a block side.
    error_budget: The accumulated rounding budget E(n) at a mantissa width.
    worth_escalating: Whether an indeterminate answer is close enough for a wider rung to settle.

CONSTANTS:
==========
    ABSORB_DEPTH: Terms this many natural-log units below the reference are counted, not summed.
    BINARY64_PRECISION: Rungs up to this width are evaluated in binary64 (numpy) arithmetic.
    BINARY64_DEPTH: The absorption depth of the binary64 rung.
    DEFAULT_PRECISION: The first rung of the precision ladder.

Notes
=====
    * Rungs wider than BINARY64_PRECISION run on raw mpmath (libmp) values. Exact operations are
        used wherever they are cheap (powers of two, k*t, sums of exact values); every rounding
        step is directed: floor for lower bounds, ceiling for upper bounds.
    * The binary64 rung starts every block from exact integers rounded outward to floats, then
        evaluates the exponents, exp and the sums with numpy, and widens each step by a bound on
        its rounding error. The bounds assume a libm whose exp and log are within 4 ulps.
    * Each side is summed relative to a global reference G, an upper bound of the largest term.
        Whole blocks, and the tails of blocks, whose bound lies more than the absorption depth
        below G are absorbed as counted units of exp(-depth); they enter the upper enclosures only.
    * Both enclosures are finally widened by E(n) = (n+1) * 2**-(prec-2).
    * Interval requests factor out e^{L s} for a pivot L near the largest term, so a term k
        is bounded at whichever end of [t_lo, t_hi] makes e^{(k-L) s} smallest or largest; the
        enclosure then only loses |k - L| * (t_hi - t_lo) per term.
    * Evaluation never loops over precisions; escalation is the caller's decision, and
        worth_escalating tells whether a wider rung can help.

Miscellaneous objects:
======================
    Except for the public objects exported by this module and their public APIs (if applicable),
        everything else is an implementation detail, and shouldn't be relied upon as it may change
        over time.
"""

# Standard library
import bisect
import dataclasses
import functools
import logging
import math

# Third-party
import mpmath
import numpy as np
from mpmath import libmp

# Project specific
from realroot import construction
from realroot import noise

logger = logging.getLogger(__name__)

ABSORB_DEPTH = 4096
BINARY64_PRECISION = 53
BINARY64_DEPTH = 690
DEFAULT_PRECISION = 40

NONE = 'none'
DERIVATIVE = 'derivative'
RESCALED = 'rescaled'

FULL = 'full'
LEFT = 'left'
RIGHT = 'right'
TOP = 'top'
SIDES = (FULL, LEFT, RIGHT, TOP)

INDETERMINATE = 0

_FLOOR = libmp.round_floor
_CEILING = libmp.round_ceiling

# Relative rounding slack of one libm call (4 ulps) and of one binary64 sum or product, padded.
_LIBM_SLACK = 2.0**-48
_ROUNDING_SLACK = 2.0**-47
_UNIT_ROUNDOFF = 2.0**-52
_TINY = 2.0**-70
_BINARY64_UNIT = math.exp(-BINARY64_DEPTH) * (1 + 2.0**-40)
# The binary64 rung falls back to libmp past this block (2**j no longer fits a double).
_BINARY64_MAX_BLOCK = 1000
# Indeterminate answers within this log-distance of a decision are worth a wider rung.
_ESCALATION_REACH = 2.0**-20

# Roles of a segment: signed terms, or magnitudes forced onto one side.
_SIGNED = 'signed'
_PLUS = 'plus'
_MINUS = 'minus'


class EvaluationError(ArithmeticError):
    """Raised when an evaluation request carries NaN, infinite or inverted coordinates."""


@dataclasses.dataclass(frozen=True)
class Weight:
    """
    Per-term multipliers w_k.

    none: w_k = 1. derivative: w_k = k (d/dt of g_n). rescaled(p, q): w_k = (2k - p - q) / (q - p),
        the derivative of exp(-t * (p + q) / 2) * g_n(t) up to a positive factor.
    """

    kind: str = NONE
    p: int = 0
    q: int = 0

    @classmethod
    def rescaled(cls, p, q):
        if not 0 <= p < q:
            raise EvaluationError(f'rescaled weights need 0 <= p < q, got p={p}, q={q}')
        return cls(RESCALED, p, q)

    def numerator(self, k):
        """Return the integer numerator of w_k (the denominator q - p is positive)."""
        if self.kind == NONE:
            return 1
        if self.kind == DERIVATIVE:
            return k
        return 2 * k - self.p - self.q

    def numerators(self, indices):
        """Vectorized numerator: w_k's integer numerators for an int64 array of indices."""
        if self.kind == NONE:
            return np.ones_like(indices)
        if self.kind == DERIVATIVE:
            return indices
        return 2 * indices - (self.p + self.q)

    def __str__(self):
        if self.kind == RESCALED:
            return f'rescaled({self.p}, {self.q})'
        return self.kind


NO_WEIGHT = Weight()
DERIVATIVE_WEIGHT = Weight(DERIVATIVE)


def as_raw(value):
    """Convert an int, float or mpf coordinate into a raw libmp value, exactly."""
    if isinstance(value, tuple):
        raw = value
    elif isinstance(value, mpmath.mpf):
        raw = value._mpf_
    elif isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        raw = libmp.from_int(int(value))
    elif isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            raise EvaluationError(f'coordinate must be finite, got {value}')
        raw = libmp.from_float(float(value))
    else:
        raise EvaluationError(f'unsupported coordinate {value!r}')
    if raw in (libmp.fnan, libmp.finf, libmp.fninf):
        raise EvaluationError(f'coordinate must be finite, got {libmp.to_str(raw, 10)}')
    return raw


@dataclasses.dataclass(frozen=True)
class EvalRequest:
    """
    Evaluate the (weighted) polynomial on an axis at t, or over [t, t_hi] when t_hi is given.

    Attributes:
        t: Exponential coordinate (x = +-e**t).
        axis: noise.POSITIVE or noise.NEGATIVE.
        weight: The per-term multipliers.
        t_hi: Upper end of an interval request.
    """

    t: object
    axis: str = noise.POSITIVE
    weight: Weight = NO_WEIGHT
    t_hi: object = None


@dataclasses.dataclass(frozen=True)
class SignedLogInterval:
    """
    A certified enclosure of a real value in log-magnitude form.

    sign is +1 or -1 when certified and INDETERMINATE (0) otherwise. When certified,
        log_lo <= log|value| <= log_hi and gap > 0 is the certified log-distance between the
        dominant side and the opposite side. When indeterminate, log_lo is -inf and gap <= 0.
    """

    sign: int
    log_lo: mpmath.mpf
    log_hi: mpmath.mpf
    gap: mpmath.mpf
    precision: int

    @property
    def is_determinate(self):
        return self.sign != INDETERMINATE

    def to_dict(self):
        return {
            'sign': self.sign,
            'log_lo': mpmath.nstr(self.log_lo, 17),
            'log_hi': mpmath.nstr(self.log_hi, 17),
            'gap': mpmath.nstr(self.gap, 17),
            'precision': self.precision,
        }


def error_budget(n, prec):
    """Return E(n) = (n+1) * 2**-(prec-2) as a raw value."""
    return libmp.from_man_exp(n + 1, -(prec - 2))


def worth_escalating(result, n):
    """
    Tell whether a wider rung could certify what this answer left indeterminate.

    An indeterminate answer whose gap is well below zero is a genuine sign change (or a value too
        close to zero for any rung): the rounding slack of a wider rung is far smaller than the
        distance to a decision.

    :param result: An answer of eval_sign, dominance_margin or relative_dominance.
    :type result: SignedLogInterval
    :param n: The degree the answer was computed at.
    :type n: int
    :rtype: bool
    """
    if result.is_determinate or result.gap == mpmath.ninf:
        return False
    reach = 8 * (n + 1) * 2.0 ** -(result.precision - 2) + _ESCALATION_REACH
    return float(result.gap) > -reach


class TermTable:
    """
    Per-realization data shared by every evaluation.

    Log-magnitude enclosures are computed lazily per (precision, index) and kept for the lifetime of
        the table; the binary64 rung reads the float arrays built up front.
    """

    def __init__(self, realization, schedule):
        if realization.n != schedule.n:
            raise EvaluationError(
                f'realization degree {realization.n} != schedule degree {schedule.n}'
            )
        self.n = schedule.n
        self.schedule = schedule
        self.unit_noise = realization.spec.kind == noise.RADEMACHER
        self.magnitudes = np.abs(realization.values)
        self.sign_arrays = {axis: noise.term_signs(realization, axis) for axis in noise.AXES}
        self.signs = {axis: signs.tolist() for axis, signs in self.sign_arrays.items()}
        self.blocks = schedule.block_bounds()
        self.block_starts = [lo for _, lo, _ in self.blocks]
        # Upper bound of every log|eps_k|, padded by one log unit; only used to prune.
        self.log_noise_cap = math.log(float(self.magnitudes.max())) + 1.0
        self._log_noise = {}
        self._log_int = {}

        self.indices = np.arange(self.n + 1, dtype=np.int64)
        self.present = self.magnitudes > 0
        if self.unit_noise:
            estimate = np.zeros(self.n + 1)
        else:
            with np.errstate(divide='ignore'):
                estimate = np.log(self.magnitudes)
        self.log_noise_estimate = estimate
        finite = np.where(self.present, estimate, 0.0)
        slack = np.abs(finite) * _LIBM_SLACK + _TINY
        # Outward float enclosures of log|eps_k| for the binary64 rung.
        self.noise_lo = finite - slack
        self.noise_hi = finite + slack
        self.log_c_estimate = np.empty(self.n + 1)
        for j, lo, hi in self.blocks:
            self.log_c_estimate[lo:hi + 1] = -math.ldexp(1.0, j) if j < 1024 else -math.inf

    def block_index(self, k):
        """Position in self.blocks of the block containing k."""
        return bisect.bisect_right(self.block_starts, k) - 1

    def pivot(self, t, weight=NO_WEIGHT):
        """
        Return the index of the (estimated) largest weighted term at the float t.

        Only a float estimate: any index gives a valid enclosure, a good one gives a tight one.
        """
        if not math.isfinite(t):
            return self.n if t > 0 else 0
        with np.errstate(invalid='ignore', over='ignore', divide='ignore'):
            scores = self.log_c_estimate + self.indices * t + self.log_noise_estimate
            if weight.kind != NONE:
                scores = scores + np.log(np.abs(weight.numerators(self.indices)).astype(float))
        scores = np.where(np.isnan(scores), -np.inf, scores)
        return int(np.argmax(scores))

    def log_noise(self, k, prec):
        """Return (floor, ceiling) enclosures of log|eps_k|."""
        if self.unit_noise:
            return libmp.fzero, libmp.fzero
        key = (prec, k)
        bounds = self._log_noise.get(key)
        if bounds is None:
            raw = libmp.from_float(float(self.magnitudes[k]))
            bounds = (libmp.mpf_log(raw, prec, _FLOOR), libmp.mpf_log(raw, prec, _CEILING))
            self._log_noise[key] = bounds
        return bounds

    def log_int(self, value, prec):
        """Return (floor, ceiling) enclosures of log(value) for a positive integer."""
        if value == 1:
            return libmp.fzero, libmp.fzero
        key = (prec, value)
        bounds = self._log_int.get(key)
        if bounds is None:
            raw = libmp.from_int(value)
            bounds = (libmp.mpf_log(raw, prec, _FLOOR), libmp.mpf_log(raw, prec, _CEILING))
            self._log_int[key] = bounds
        return bounds


@functools.lru_cache(maxsize=8)
def term_table(realization, schedule):
    """Return the (cached) TermTable of a realization."""
    return TermTable(realization, schedule)


@dataclasses.dataclass(frozen=True)
class _Segment:
    """
    Terms lo..hi (inclusive) with an additive log offset.

    Lower bounds use k * t_lo + off_lo and upper bounds k * t_hi + off_hi. The segments of one
        evaluation share a weight.
    """

    lo: int
    hi: int
    t_lo: tuple
    t_hi: tuple
    off_lo: tuple
    off_hi: tuple
    role: str
    weight: Weight = NO_WEIGHT


def _scaled(raw, scale):
    """raw * 2**scale as an int; exact when scale covers the exponent of raw."""
    return libmp.to_int(libmp.mpf_shift(raw, scale))


def _exponent(raw):
    return raw[2] if raw[1] else 0


def _weight_cap(weight, lo, hi):
    """Float upper bound of log|w_k| over lo..hi, padded by one log unit."""
    if weight.kind == NONE:
        return 0.0
    largest = max(abs(weight.numerator(lo)), abs(weight.numerator(hi)), 1)
    cap = math.log(largest) + 1.0
    if weight.kind == RESCALED:
        cap -= math.log(weight.q - weight.p)
    return cap


def _log_count_cap(count, t_float):
    """Float upper bound of log(min(count, 1 / (1 - exp(-|t|)))), padded."""
    bound = float(count)
    if t_float != 0:
        magnitude = abs(t_float)
        geometric = 1 / -math.expm1(-magnitude) if magnitude < 700 else 1.0
        bound = min(bound, geometric)
    return math.log(bound) + 1e-6


class _Accumulator:
    """One side of the sum: certified lower/upper sums relative to the reference G."""

    def __init__(self, prec):
        self.prec = prec
        self.low = libmp.fzero
        self.high = libmp.fzero
        self.absorbed = 0
        self.terms = 0

    def add(self, x_lo, x_hi):
        """Add exp(x) with x in [x_lo, x_hi] (exact raw values relative to G)."""
        self.terms += 1
        if libmp.mpf_lt(x_hi, _NEG_DEPTH):
            self.absorbed += 1
            return
        prec = self.prec
        self.high = libmp.mpf_add(
            self.high,
            libmp.mpf_exp(libmp.mpf_pos(x_hi, prec, _CEILING), prec, _CEILING),
            prec,
            _CEILING,
        )
        if libmp.mpf_ge(x_lo, _NEG_DEPTH):
            self.low = libmp.mpf_add(
                self.low,
                libmp.mpf_exp(libmp.mpf_pos(x_lo, prec, _FLOOR), prec, _FLOOR),
                prec,
                _FLOOR,
            )

    def log_bounds(self, n):
        """Return the widened (lower, upper) log enclosures relative to G."""
        prec = self.prec
        high = self.high
        if self.absorbed:
            tail = libmp.mpf_mul(libmp.from_int(self.absorbed), _absorbed_unit(prec), prec,
                                 _CEILING)
            high = libmp.mpf_add(high, tail, prec, _CEILING)
        budget = error_budget(n, prec)
        if high == libmp.fzero:
            upper = libmp.fninf
        else:
            upper = libmp.mpf_add(libmp.mpf_log(high, prec, _CEILING), budget, prec, _CEILING)
        if self.low == libmp.fzero:
            lower = libmp.fninf
        else:
            lower = libmp.mpf_sub(libmp.mpf_log(self.low, prec, _FLOOR), budget, prec, _FLOOR)
        return lower, upper


_NEG_DEPTH = libmp.from_int(-ABSORB_DEPTH)
_EMPTY_SIDES = (libmp.fninf, libmp.fninf, libmp.fninf, libmp.fninf)


@functools.lru_cache(maxsize=16)
def _absorbed_unit(prec):
    return libmp.mpf_exp(_NEG_DEPTH, prec, _CEILING)


def _plan(table, segments, depth):
    """
    Bound every (segment, block) piece, choose the reference G and prune.

    Returns (G, scale, pieces, absorbed): G * 2**-scale is the reference, pieces are
        (segment, block j, first, last) index ranges whose terms must be summed and absorbed counts
        the pieces bounded by exp(G - depth). Bounds are exact integers at the common binary scale,
        which also covers every t and offset, so pruning never rounds the wrong way.
    """
    scale = 0
    for segment in segments:
        scale = max(scale, -_exponent(segment.t_lo), -_exponent(segment.t_hi),
                    -_exponent(segment.off_lo), -_exponent(segment.off_hi))

    candidates = []
    for segment in segments:
        t_scaled = _scaled(segment.t_hi, scale)
        t_float = libmp.to_float(segment.t_hi)
        offset = _scaled(segment.off_hi, scale)
        first_block = table.block_index(segment.lo)
        last_block = table.block_index(segment.hi)
        for position in range(first_block, last_block + 1):
            j, block_lo, block_hi = table.blocks[position]
            first, last = max(block_lo, segment.lo), min(block_hi, segment.hi)
            top = last if t_scaled >= 0 else first
            cap = (
                table.log_noise_cap
                + _weight_cap(segment.weight, first, last)
                + _log_count_cap(last - first + 1, t_float)
            )
            bound = -(1 << (j + scale)) + top * t_scaled + offset + (math.ceil(cap) << scale)
            candidates.append((bound, t_scaled, segment, j, first, last))

    if not candidates:
        return None, scale, [], 0

    reference = max(candidate[0] for candidate in candidates)
    threshold = reference - (depth << scale)
    pieces = []
    absorbed = 0
    for bound, t_scaled, segment, j, first, last in candidates:
        if bound < threshold:
            absorbed += 1
            continue
        slack = bound - threshold
        if t_scaled > 0:
            keep_from = max(first, last - slack // t_scaled)
            if keep_from > first:
                absorbed += 1
            first = keep_from
        elif t_scaled < 0:
            keep_to = min(last, first + slack // -t_scaled)
            if keep_to < last:
                absorbed += 1
            last = keep_to
        pieces.append((segment, j, first, last))
    return reference, scale, pieces, absorbed


def _accumulate_libmp(table, segments, axis, prec):
    """
    Sum the segments into a positive and a negative side, term by term in libmp.

    :return: (G, (P_lo, P_hi, N_lo, N_hi)) with the enclosures relative to G (raw; -inf for an
        empty side).
    """
    reference, scale, pieces, absorbed = _plan(table, segments, ABSORB_DEPTH)
    if reference is None:
        return libmp.fzero, _EMPTY_SIDES
    reference = libmp.from_man_exp(reference, -scale)
    positive, negative = _Accumulator(prec), _Accumulator(prec)

    signs = table.signs[axis]
    debug = logger.isEnabledFor(logging.DEBUG)
    for segment, j, first, last in pieces:
        power = libmp.mpf_neg(libmp.mpf_shift(libmp.fone, j))
        base_lo = libmp.mpf_sub(libmp.mpf_add(power, segment.off_lo), reference)
        base_hi = libmp.mpf_sub(libmp.mpf_add(power, segment.off_hi), reference)
        before = (positive.high, negative.high)
        for k in range(first, last + 1):
            numerator = segment.weight.numerator(k)
            if numerator == 0:
                continue
            noise_lo, noise_hi = table.log_noise(k, prec)
            x_lo = libmp.mpf_add(
                libmp.mpf_add(base_lo, libmp.mpf_mul(libmp.from_int(k), segment.t_lo)), noise_lo
            )
            x_hi = libmp.mpf_add(
                libmp.mpf_add(base_hi, libmp.mpf_mul(libmp.from_int(k), segment.t_hi)), noise_hi
            )
            if segment.weight.kind != NONE:
                weight_lo, weight_hi = table.log_int(abs(numerator), prec)
                if segment.weight.kind == RESCALED:
                    span_lo, span_hi = table.log_int(segment.weight.q - segment.weight.p, prec)
                    weight_lo = libmp.mpf_sub(weight_lo, span_hi, prec, _FLOOR)
                    weight_hi = libmp.mpf_sub(weight_hi, span_lo, prec, _CEILING)
                x_lo = libmp.mpf_add(x_lo, weight_lo)
                x_hi = libmp.mpf_add(x_hi, weight_hi)

            if segment.role == _PLUS:
                side = positive
            elif segment.role == _MINUS:
                side = negative
            else:
                sign = signs[k] if numerator > 0 else -signs[k]
                side = positive if sign > 0 else negative
            side.add(x_lo, x_hi)

        if debug:
            logger.debug(
                f'block {j} [{first}..{last}] role={segment.role}: '
                f'positive upper {libmp.to_str(before[0], 8)} -> {libmp.to_str(positive.high, 8)}, '
                f'negative upper {libmp.to_str(before[1], 8)} -> {libmp.to_str(negative.high, 8)}'
            )

    # Absorbed pieces are unsigned; charge them to both sides.
    positive.absorbed += absorbed
    negative.absorbed += absorbed
    return reference, positive.log_bounds(table.n) + negative.log_bounds(table.n)


def _float_at(value, scale, rounding):
    """value * 2**-scale rounded to a float in the given direction (overflow gives +-inf)."""
    return libmp.to_float(libmp.from_man_exp(value, -scale), rnd=rounding)


def _log_up(value):
    result = math.log(value)
    return math.nextafter(result + abs(result) * _LIBM_SLACK + _TINY, math.inf)


def _log_down(value):
    result = math.log(value)
    return math.nextafter(result - abs(result) * _LIBM_SLACK - _TINY, -math.inf)


def _binary64_side(x_lo, x_hi, absorbed, budget):
    """
    Widened (lower, upper) log enclosures of one side's sum of exp(x), relative to G.

    Terms whose upper bound lies below -BINARY64_DEPTH join the absorbed units; every kept exp is a
        normal double, so the relative error of both sums is bounded by (terms + 16) roundings.
    """
    kept = x_hi >= -BINARY64_DEPTH
    terms = int(np.count_nonzero(kept))
    tail = absorbed + x_hi.size - terms
    relative = (x_hi.size + 16) * _UNIT_ROUNDOFF
    high = (float(np.exp(x_hi[kept]).sum()) + tail * _BINARY64_UNIT) * (1 + relative)
    low = float(np.exp(x_lo[x_lo >= -BINARY64_DEPTH]).sum()) * (1 - relative)
    upper = -math.inf if high <= 0 else math.nextafter(_log_up(high) + budget, math.inf)
    lower = -math.inf if low <= 0 else math.nextafter(_log_down(low) - budget, -math.inf)
    return libmp.from_float(lower), libmp.from_float(upper)


def _log_weights(weight, numerators):
    """Outward float enclosures of log|w_k| (zero numerators give 0; they are masked later)."""
    logs = np.log(np.maximum(np.abs(numerators), 1).astype(np.float64))
    magnitude = logs
    if weight.kind == RESCALED:
        span = math.log(weight.q - weight.p)
        logs = logs - span
        magnitude = magnitude + span
    slack = magnitude * _LIBM_SLACK + _TINY
    return logs - slack, logs + slack


def _accumulate_binary64(table, segments, axis, prec):
    """
    Sum the segments into a positive and a negative side with numpy.

    :return: Like _accumulate_libmp, or None when the terms fall outside binary64 range.
    """
    reference, scale, pieces, absorbed = _plan(table, segments, BINARY64_DEPTH)
    if reference is None:
        return libmp.fzero, _EMPTY_SIDES

    count = len(pieces)
    starts_lo, starts_hi = np.empty(count), np.empty(count)
    slopes_lo, slopes_hi = np.empty(count), np.empty(count)
    firsts = np.empty(count, dtype=np.int64)
    lengths = np.empty(count, dtype=np.int64)
    roles = np.empty(count, dtype=np.int64)
    for position, (segment, j, first, last) in enumerate(pieces):
        if j >= _BINARY64_MAX_BLOCK:
            return None
        power = -(1 << (j + scale))
        start_lo = power + _scaled(segment.off_lo, scale) - reference
        start_hi = power + _scaled(segment.off_hi, scale) - reference
        starts_lo[position] = _float_at(start_lo + first * _scaled(segment.t_lo, scale), scale,
                                        _FLOOR)
        starts_hi[position] = _float_at(start_hi + first * _scaled(segment.t_hi, scale), scale,
                                        _CEILING)
        slopes_lo[position] = libmp.to_float(segment.t_lo, rnd=_FLOOR)
        slopes_hi[position] = libmp.to_float(segment.t_hi, rnd=_CEILING)
        firsts[position] = first
        lengths[position] = last - first + 1
        roles[position] = {_SIGNED: 0, _PLUS: 1, _MINUS: -1}[segment.role]
    if not (np.isfinite(slopes_lo).all() and np.isfinite(slopes_hi).all()):
        return None

    which = np.repeat(np.arange(count), lengths)
    steps = np.arange(which.size) - np.repeat(np.cumsum(lengths) - lengths, lengths)
    k = firsts[which] + steps
    distance = steps.astype(np.float64)
    with np.errstate(over='ignore', invalid='ignore'):
        rise_lo = distance * slopes_lo[which]
        rise_hi = distance * slopes_hi[which]
        base_lo, base_hi = starts_lo[which], starts_hi[which]
        noise_lo, noise_hi = table.noise_lo[k], table.noise_hi[k]
        x_lo = base_lo + rise_lo + noise_lo
        x_hi = base_hi + rise_hi + noise_hi
        size_lo = np.abs(base_lo) + np.abs(rise_lo) + np.abs(noise_lo)
        size_hi = np.abs(base_hi) + np.abs(rise_hi) + np.abs(noise_hi)

        weight = pieces[0][0].weight
        numerators = weight.numerators(k)
        if weight.kind != NONE:
            weight_lo, weight_hi = _log_weights(weight, numerators)
            x_lo = x_lo + weight_lo
            x_hi = x_hi + weight_hi
            size_lo = size_lo + np.abs(weight_lo)
            size_hi = size_hi + np.abs(weight_hi)

        if np.isnan(x_lo).any() or np.isnan(x_hi).any():
            return None
        x_lo = x_lo - (size_lo * _ROUNDING_SLACK + _TINY)
        x_hi = np.where(np.isneginf(x_hi), x_hi, x_hi + (size_hi * _ROUNDING_SLACK + _TINY))

    term_signs = table.sign_arrays[axis][k] * np.sign(numerators)
    sides = np.where(roles[which] == 0, term_signs, roles[which])
    live = table.present[k] & (numerators != 0)
    positive = live & (sides > 0)
    negative = live & (sides < 0)

    budget = (table.n + 1) * 2.0 ** -(prec - 2)
    bounds = (
        _binary64_side(x_lo[positive], x_hi[positive], absorbed, budget)
        + _binary64_side(x_lo[negative], x_hi[negative], absorbed, budget)
    )
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug(
            f'binary64: {count} pieces, {int(np.count_nonzero(positive))} positive and '
            f'{int(np.count_nonzero(negative))} negative terms, {absorbed} absorbed'
        )
    return libmp.from_man_exp(reference, -scale), bounds


def _accumulate(table, segments, axis, prec):
    """Dispatch to the binary64 rung or to libmp; both return (G, relative enclosures)."""
    if prec <= BINARY64_PRECISION:
        result = _accumulate_binary64(table, segments, axis, prec)
        if result is not None:
            return result
    return _accumulate_libmp(table, segments, axis, prec)


def _log1m_exp_floor(gap, prec):
    """Lower bound of log(1 - exp(-gap)) for gap > 0."""
    if gap == libmp.finf:
        return libmp.fzero
    if libmp.mpf_gt(gap, libmp.from_int(ABSORB_DEPTH)):
        # log(1 - x) >= -2x for x <= 1/2, and 2 * exp(-4096) < 2**-5000.
        return libmp.mpf_neg(libmp.mpf_shift(libmp.fone, -5000))
    remainder = libmp.mpf_sub(
        libmp.fone, libmp.mpf_exp(libmp.mpf_neg(gap), prec, _CEILING), prec, _FLOOR
    )
    if not libmp.mpf_gt(remainder, libmp.fzero):
        return libmp.fninf
    return libmp.mpf_log(remainder, prec, _FLOOR)


def _decide(reference, bounds, prec, shift_lo=libmp.fzero, shift_hi=libmp.fzero):
    """
    Turn side enclosures relative to G into a SignedLogInterval.

    Lower bounds are moved by G + shift_lo and upper bounds by G + shift_hi, exactly.
    """
    p_lo, p_hi, n_lo, n_hi = bounds
    make = construction.make_mpf

    def absolute(raw, shift):
        if raw in (libmp.fninf, libmp.finf):
            return make(raw)
        return make(libmp.mpf_add(libmp.mpf_add(raw, reference), shift))

    for sign, (own_lo, own_hi, other_hi) in ((1, (p_lo, p_hi, n_hi)), (-1, (n_lo, n_hi, p_hi))):
        if own_lo != libmp.fninf and libmp.mpf_gt(own_lo, other_hi):
            if other_hi == libmp.fninf:
                gap = libmp.finf
            else:
                gap = libmp.mpf_sub(own_lo, other_hi, prec, _FLOOR)
            log_lo = libmp.mpf_add(own_lo, _log1m_exp_floor(gap, prec), prec, _FLOOR)
            return SignedLogInterval(sign, absolute(log_lo, shift_lo), absolute(own_hi, shift_hi),
                                     make(gap), prec)

    if p_hi == libmp.fninf and n_hi == libmp.fninf:
        gap = libmp.fninf
    else:
        forward = libmp.fninf if p_lo == libmp.fninf or n_hi == libmp.fninf else \
            libmp.mpf_sub(p_lo, n_hi, prec, _CEILING)
        backward = libmp.fninf if n_lo == libmp.fninf or p_hi == libmp.fninf else \
            libmp.mpf_sub(n_lo, p_hi, prec, _CEILING)
        gap = forward if libmp.mpf_ge(forward, backward) else backward
    upper = p_hi if libmp.mpf_ge(p_hi, n_hi) else n_hi
    return SignedLogInterval(INDETERMINATE, mpmath.ninf, absolute(upper, shift_hi), make(gap),
                             prec)


def _evaluate(table, segments, axis, prec, shift_lo=libmp.fzero, shift_hi=libmp.fzero):
    reference, bounds = _accumulate(table, segments, axis, prec)
    return _decide(reference, bounds, prec, shift_lo, shift_hi)


def _interval(request):
    t_lo = as_raw(request.t)
    t_hi = t_lo if request.t_hi is None else as_raw(request.t_hi)
    if libmp.mpf_gt(t_lo, t_hi):
        raise EvaluationError('interval requests need t <= t_hi')
    return t_lo, t_hi


def _pivoted_segments(n, pivot, t_lo, t_hi, weight):
    """
    Segments of g_n(s) * e^{-L s} over s in [t_lo, t_hi] for the pivot L.

    A term k < L carries e^{(k-L) s}, smallest at t_hi and largest at t_lo; a term k > L the
        other way round; the pivot itself is constant.
    """
    zero = libmp.fzero
    pivot_raw = libmp.from_int(pivot)
    at_lo = libmp.mpf_neg(libmp.mpf_mul(pivot_raw, t_lo))
    at_hi = libmp.mpf_neg(libmp.mpf_mul(pivot_raw, t_hi))
    segments = []
    if pivot > 0:
        segments.append(_Segment(0, pivot - 1, t_hi, t_lo, at_hi, at_lo, _SIGNED, weight))
    segments.append(_Segment(pivot, pivot, zero, zero, zero, zero, _SIGNED, weight))
    if pivot < n:
        segments.append(_Segment(pivot + 1, n, t_lo, t_hi, at_lo, at_hi, _SIGNED, weight))
    return segments


def eval_sign(request, realization, schedule, prec=DEFAULT_PRECISION):
    """
    Certify the sign of sum(w_k * eps_k * c_k * x**k) at x = +-e**t (or over an interval of t).

    :param request: What to evaluate.
    :type request: EvalRequest
    :param realization: The noise vector.
    :type realization: realroot.noise.NoiseRealization
    :param schedule: The coefficient schedule; its degree must match the realization.
    :type schedule: realroot.construction.CoefficientSchedule
    :param prec: Mantissa width (bits) of every rounded operation; up to BINARY64_PRECISION the
        binary64 rung is used.
    :type prec: int
    :return: The certified answer; INDETERMINATE is a value, not an error.
    :rtype: SignedLogInterval
    :raises EvaluationError: On non-finite or inverted coordinates, or mismatched sizes.
    """
    if request.axis not in noise.AXES:
        raise EvaluationError(f'unknown axis {request.axis!r}')
    t_lo, t_hi = _interval(request)
    table = term_table(realization, schedule)
    if t_lo == t_hi:
        segment = _Segment(0, schedule.n, t_lo, t_hi, libmp.fzero, libmp.fzero, _SIGNED,
                           request.weight)
        return _evaluate(table, [segment], request.axis, prec)

    middle = (libmp.to_float(t_lo) + libmp.to_float(t_hi)) / 2
    pivot = table.pivot(middle, request.weight)
    segments = _pivoted_segments(schedule.n, pivot, t_lo, t_hi, request.weight)
    pivot_raw = libmp.from_int(pivot)
    return _evaluate(table, segments, request.axis, prec,
                     libmp.mpf_mul(pivot_raw, t_lo), libmp.mpf_mul(pivot_raw, t_hi))


def _factor_offsets(factor, prec):
    if not 0 < factor <= 1:
        raise EvaluationError(f'the leader factor must lie in (0, 1], got {factor}')
    raw = libmp.from_float(float(factor))
    if raw == libmp.fone:
        return libmp.fzero, libmp.fzero
    return libmp.mpf_log(raw, prec, _FLOOR), libmp.mpf_log(raw, prec, _CEILING)


def _side_ranges(schedule, j, side):
    """Return (leader, left competitors, right competitors) for a side of block j."""
    if not 0 <= j <= schedule.j_star:
        raise EvaluationError(f'block {j} is outside 0..{schedule.j_star}')
    if side not in SIDES:
        raise EvaluationError(f'unknown side {side!r}, expected one of {SIDES}')
    n = schedule.n
    leader = n if side == TOP else schedule.leader(j)
    left = (0, leader - 1)
    right = (leader + 1, n)
    if side == LEFT:
        right = None
    elif side == RIGHT:
        left = None
    return leader, left, right


def _nonempty(index_range):
    return index_range is not None and index_range[0] <= index_range[1]


def dominance_margin(j, t, realization, schedule, side=FULL, factor=0.5,
                     prec=DEFAULT_PRECISION):
    """
    Certify the sign of factor*|eps_L|*c_L*e^{L t} - sum(|eps_i|*c_i*e^{i t}) over a side.

    The leader L is m_j (n for the last block); side selects the competitors: every other index
        (full), the indices below (left) or above (right) the leader. side = top compares the term
        n against all lower terms with factor 1.

    :rtype: SignedLogInterval
    """
    leader, left, right = _side_ranges(schedule, j, side)
    if side == TOP:
        factor = 1.0
    t_raw = as_raw(t)
    factor_lo, factor_hi = _factor_offsets(factor, prec)
    segments = [_Segment(leader, leader, t_raw, t_raw, factor_lo, factor_hi, _PLUS)]
    for competitors in (left, right):
        if _nonempty(competitors):
            segments.append(_Segment(competitors[0], competitors[1], t_raw, t_raw,
                                     libmp.fzero, libmp.fzero, _MINUS))
    table = term_table(realization, schedule)
    return _evaluate(table, segments, noise.POSITIVE, prec)


def relative_dominance(realization, schedule, leader, left, right, lo, hi, factor=0.5,
                       weight=NO_WEIGHT, prec=DEFAULT_PRECISION):
    """
    Certify factor*|w_L a_L| e^{L s} > sum(|w_i a_i| e^{i s}) for every s in [lo, hi].

    Dividing by e^{L s}, a competitor i < L carries e^{(i-L) s}, decreasing in s, so it is checked
        at lo; a competitor i > L is checked at hi. Both reductions are exact, so a positive answer
        holds on the whole interval.

    :param leader: The leading index L.
    :param left: Inclusive index range of competitors below L (or None), checked at lo.
    :param right: Inclusive index range of competitors above L (or None), checked at hi.
    :param lo: Left end of the interval.
    :param hi: Right end of the interval; +inf is allowed when there are no right competitors.
    :rtype: SignedLogInterval
    """
    lo_raw = as_raw(lo)
    right_nonempty = _nonempty(right)
    if right_nonempty:
        hi_raw = as_raw(hi)
        if libmp.mpf_gt(lo_raw, hi_raw):
            raise EvaluationError('relative dominance needs lo <= hi')
    if weight.numerator(leader) == 0:
        raise EvaluationError(f'the leader {leader} has a zero weight')

    factor_lo, factor_hi = _factor_offsets(factor, prec)
    zero = libmp.fzero
    segments = [_Segment(leader, leader, zero, zero, factor_lo, factor_hi, _PLUS, weight)]
    if _nonempty(left):
        shift = libmp.mpf_neg(libmp.mpf_mul(libmp.from_int(leader), lo_raw))
        segments.append(_Segment(left[0], left[1], lo_raw, lo_raw, shift, shift, _MINUS, weight))
    if right_nonempty:
        shift = libmp.mpf_neg(libmp.mpf_mul(libmp.from_int(leader), hi_raw))
        segments.append(_Segment(right[0], right[1], hi_raw, hi_raw, shift, shift, _MINUS, weight))
    table = term_table(realization, schedule)
    return _evaluate(table, segments, noise.POSITIVE, prec)


def dominance_over(j, lo, hi, realization, schedule, side=FULL, factor=0.5,
                   prec=DEFAULT_PRECISION):
    """Certify the dominance of block j's leader over a side for every s in [lo, hi]."""
    leader, left, right = _side_ranges(schedule, j, side)
    if side == TOP:
        factor = 1.0
    return relative_dominance(realization, schedule, leader, left, right, lo, hi, factor,
                              prec=prec)
