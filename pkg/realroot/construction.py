# SPDX-License-Identifier: AGPL-3.0-or-later


"""
Build the deterministic coefficient schedule of a block-exponential random polynomial.

The polynomial f_n(z) = sum(c_k * eps_k * z**k) uses deterministic coefficients that are constant
    on blocks: c_k = exp(-2**j) for every k in I_j = (m_{j-1}, m_j],
    with m_j = 2 * floor(j**(1/alpha)) and m_{-1} = -1. Everything here depends on alpha only
    (never on n, apart from j_star).

Classes:
========
    AlphaParams: alpha, beta and the window threshold j0, plus the per-alpha derived quantities.
    CoefficientSchedule: AlphaParams bound to a degree n.
    Window: A t-interval [a, b] in exponential coordinates (x = e**t).
    ConstructionError: Raised on invalid parameters or when the horizon is exceeded.

Functions:
==========
    make_params: Validate alpha and build (cached) AlphaParams.
    make_schedule: Build a CoefficientSchedule for a degree n.
    schedule_rows: Produce the rows dumped by the `schedule` subcommand.

CONSTANTS:
==========
    HORIZON: Largest supported block index.
    J0_SCAN_LIMIT: Block indices up to which the window ordering b_j < a_{j+1} is scanned.
    WINDOW_PRECISION: Mantissa width (bits) used for windows and crossings.

Notes
=====
    * alpha is held exactly as a fractions.Fraction parsed from its decimal text, so 0.3 means 3/10.
    * Extended-range reals are mpmath mpf values; their exponent is an unbounded integer, so
        -2**j is exact for every reachable j.
    * floor(j**(1/alpha)) never trusts a raw floating power: a candidate is corrected with exact
        integer comparisons r**p <= j**q < (r+1)**p (alpha = p/q), or with directed-rounding log
        guards when p or q is too large for exact powers.

Miscellaneous objects:
======================
    Except for the public objects exported by this module and their public APIs (if applicable),
        everything else is an implementation detail, and shouldn't be relied upon as it may change
        over time.
"""

# Standard library
import dataclasses
import functools
import logging
import math
from fractions import Fraction

# Third-party
import mpmath
import numpy as np
from mpmath import libmp

logger = logging.getLogger(__name__)

HORIZON = 2**20
J0_SCAN_LIMIT = 10**5
WINDOW_PRECISION = 96

_EXACT_POWER_LIMIT = 1000
_GUARD_PRECISIONS = (128, 512, 4096)
_SCAN_MARGIN = 1e-9


class ConstructionError(ValueError):
    """Raised when a schedule cannot be built for the given parameters."""


def to_fraction(alpha):
    """
    Parse alpha into an exact fraction.

    Floats are parsed from their shortest decimal representation (0.3 -> 3/10), not from their
        binary expansion.

    :param alpha: The exponent, as a float, int, str or Fraction.
    :type alpha: float | int | str | fractions.Fraction
    :return: alpha as an exact fraction.
    :rtype: fractions.Fraction
    :raises ConstructionError: If alpha cannot be parsed.
    """
    if isinstance(alpha, Fraction):
        return alpha
    try:
        if isinstance(alpha, float):
            if not math.isfinite(alpha):
                raise ValueError(f'non-finite value {alpha}')
            return Fraction(repr(alpha))
        return Fraction(str(alpha).strip())
    except (ValueError, ZeroDivisionError) as ex:
        raise ConstructionError(f'alpha must be a real number, got {alpha!r}') from ex


def make_mpf(raw):
    """Wrap a raw libmp value into an mpmath.mpf without rounding it."""
    return mpmath.mp.make_mpf(raw)


def _log_bounds(value, prec):
    """Return (floor, ceiling) raw enclosures of ln(value) for a positive int at `prec` bits."""
    raw = libmp.from_int(value)
    return (
        libmp.mpf_log(raw, prec, libmp.round_floor),
        libmp.mpf_log(raw, prec, libmp.round_ceiling),
    )


def compare_powers(x, a, y, b):
    """
    Compare x**a with y**b for positive integers x, y and nonnegative integer exponents a, b.

    :return: -1, 0 or 1 as x**a is smaller than, equal to or larger than y**b.
    :rtype: int
    :raises ConstructionError: If the comparison cannot be decided at the widest guard precision.
    """
    assert x > 0 and y > 0 and a >= 0 and b >= 0
    if a <= _EXACT_POWER_LIMIT and b <= _EXACT_POWER_LIMIT:
        left, right = x**a, y**b
        return (left > right) - (left < right)

    for prec in _GUARD_PRECISIONS:
        x_lo, x_hi = _log_bounds(x, prec)
        y_lo, y_hi = _log_bounds(y, prec)
        left_lo = libmp.mpf_mul(x_lo, libmp.from_int(a), prec, libmp.round_floor)
        left_hi = libmp.mpf_mul(x_hi, libmp.from_int(a), prec, libmp.round_ceiling)
        right_lo = libmp.mpf_mul(y_lo, libmp.from_int(b), prec, libmp.round_floor)
        right_hi = libmp.mpf_mul(y_hi, libmp.from_int(b), prec, libmp.round_ceiling)
        if libmp.mpf_lt(left_hi, right_lo):
            return -1
        if libmp.mpf_gt(left_lo, right_hi):
            return 1
    raise ConstructionError(f'cannot order {x}**{a} and {y}**{b} at {_GUARD_PRECISIONS[-1]} bits')


def floor_power(base, exponent):
    """
    Compute floor(base ** exponent) exactly for an integer base >= 0 and a positive fraction.

    :param base: The base.
    :type base: int
    :param exponent: The exponent p/q.
    :type exponent: fractions.Fraction
    :return: The exact floor.
    :rtype: int
    """
    if base in (0, 1):
        return base
    p, q = exponent.numerator, exponent.denominator
    estimated_bits = int(float(exponent) * math.log2(base)) + 64
    prec = max(53, estimated_bits)
    log_base = libmp.mpf_log(libmp.from_int(base), prec)
    power = libmp.mpf_exp(libmp.mpf_mul(libmp.from_rational(p, q, prec), log_base, prec), prec)
    candidate = max(0, libmp.to_int(libmp.mpf_floor(power)))

    # r = floor(base**(p/q)) iff r**q <= base**p < (r+1)**q.
    while candidate > 0 and compare_powers(candidate, q, base, p) > 0:
        candidate -= 1
    while compare_powers(candidate + 1, q, base, p) <= 0:
        candidate += 1
    return candidate


@dataclasses.dataclass(frozen=True)
class Window:
    """A t-interval [a, b]; b may be +inf for the top window."""

    j: int
    a: mpmath.mpf
    b: mpmath.mpf

    @property
    def is_ordered(self):
        return self.a < self.b


@dataclasses.dataclass(frozen=True)
class AlphaParams:
    """
    The per-alpha constants of the construction.

    Attributes:
        alpha: The exponent, exactly, in (0, 1).
        beta: min(1/2, (1 - alpha) / (2 * alpha)), exactly.
        j0: Smallest block index from which every window is nonempty and windows are ordered.
    """

    alpha: Fraction
    beta: Fraction
    j0: int

    def __str__(self):
        return f'alpha={self.alpha} beta={self.beta} j0={self.j0}'

    @property
    def alpha_float(self):
        return float(self.alpha)

    def m_of(self, j):
        """Return m_j = 2 * floor(j**(1/alpha)) for j >= 0, and -1 for j = -1."""
        return _m_of(self.alpha, j)

    def block_of(self, k):
        """Return the unique j with m_{j-1} < k <= m_j."""
        if k < 0:
            raise ConstructionError(f'block_of expects k >= 0, got {k}')
        if k == 0:
            return 0
        high = 1
        while self.m_of(min(high, HORIZON)) < k:
            if high >= HORIZON:
                raise ConstructionError(f'index {k} lies beyond the horizon j = {HORIZON}')
            high *= 2
        high = min(high, HORIZON)
        low = high // 2
        # Invariant: m_of(low) < k <= m_of(high).
        while high - low > 1:
            middle = (low + high) // 2
            if self.m_of(middle) < k:
                low = middle
            else:
                high = middle
        return high

    def log_c(self, k):
        """Return log(c_k) = -2**block_of(k), exact."""
        return make_mpf(log_c_raw(self.block_of(k)))

    def window(self, j):
        """Return the dominance window [a_j, b_j] of block j."""
        return _window(self, j)

    def crossing(self, j):
        """Return the t at which the leaders of blocks j and j+1 carry equal weight."""
        if j < 0 or j + 1 > HORIZON:
            raise ConstructionError(f'crossing expects 0 <= j < {HORIZON}, got {j}')
        gap = self.m_of(j + 1) - self.m_of(j)
        return make_mpf(libmp.mpf_div(libmp.mpf_shift(libmp.fone, j), libmp.from_int(gap),
                                      WINDOW_PRECISION, libmp.round_nearest))

    def boundaries(self, j_max):
        """Return the list [m_0, ..., m_{j_max}]."""
        return [self.m_of(j) for j in range(j_max + 1)]


def log_c_raw(j):
    """Return the raw libmp value of -2**j."""
    return libmp.mpf_neg(libmp.mpf_shift(libmp.fone, j))


@functools.lru_cache(maxsize=1 << 16)
def _m_of(alpha, j):
    if j == -1:
        return -1
    if j < -1:
        raise ConstructionError(f'm_of expects j >= -1, got {j}')
    if j > HORIZON:
        raise ConstructionError(f'block index {j} lies beyond the horizon j = {HORIZON}')
    return 2 * floor_power(j, 1 / alpha)


@functools.lru_cache(maxsize=1 << 14)
def _window(params, j):
    if j < 1:
        raise ConstructionError(f'windows exist for j >= 1, got {j}')
    if j > HORIZON:
        raise ConstructionError(f'block index {j} lies beyond the horizon j = {HORIZON}')
    prec = WINDOW_PRECISION
    alpha, beta = params.alpha, params.beta
    log_j = libmp.mpf_log(libmp.from_int(j), prec)
    scale_exponent = 1 - 1 / alpha
    power = libmp.mpf_exp(
        libmp.mpf_mul(
            libmp.from_rational(scale_exponent.numerator, scale_exponent.denominator, prec),
            log_j,
            prec,
        ),
        prec,
    )
    shrink = libmp.mpf_exp(
        libmp.mpf_mul(libmp.from_rational(-beta.numerator, beta.denominator, prec), log_j, prec),
        prec,
    )
    base = libmp.mpf_mul(libmp.from_rational(alpha.numerator, alpha.denominator, prec), power, prec)
    a = libmp.mpf_mul(libmp.mpf_shift(base, j - 2), libmp.mpf_add(libmp.fone, shrink, prec), prec)
    b = libmp.mpf_mul(libmp.mpf_shift(base, j - 1), libmp.mpf_sub(libmp.fone, shrink, prec), prec)
    return Window(j=j, a=make_mpf(a), b=make_mpf(b))


def _window_threshold(beta):
    """Smallest j with j**beta > 3, i.e. 3 * j**(-beta) < 1, decided exactly."""
    p, q = beta.numerator, beta.denominator
    estimate = 3.0 ** (1 / float(beta)) if 1 / float(beta) < 1000 else math.inf
    if estimate > HORIZON:
        raise ConstructionError(
            f'beta={beta} puts the window threshold 3**(1/beta) beyond the horizon j = {HORIZON}'
        )
    j = max(1, int(estimate))
    while j > 1 and compare_powers(j - 1, p, 3, q) > 0:
        j -= 1
    while compare_powers(j, p, 3, q) <= 0:
        j += 1
    return j


def _ordering_failures(alpha, beta, j_first, j_last):
    """
    Return the block indices in [j_first, j_last] where b_j < a_{j+1} may fail.

    a_{j+1} / b_j = ((j+1)/j)**(1-1/alpha) * (1 + (j+1)**-beta) / (1 - j**-beta); the powers of two
        cancel, so the log-ratio is scanned in float64 with a safety margin.
    """
    if j_first > j_last:
        return np.array([], dtype=np.int64)
    j = np.arange(j_first, j_last + 1, dtype=np.float64)
    log_ratio = (
        (1 - 1 / alpha) * np.log1p(1 / j)
        + np.log1p((j + 1) ** -beta)
        - np.log1p(-(j**-beta))
    )
    return j[log_ratio <= _SCAN_MARGIN].astype(np.int64)


def make_params(alpha):
    """
    Validate alpha and build its AlphaParams.

    :param alpha: The exponent in (0, 1).
    :type alpha: float | str | fractions.Fraction
    :return: The per-alpha constants.
    :rtype: AlphaParams
    :raises ConstructionError: If alpha lies outside (0, 1), or the windows only become ordered
        beyond the horizon.
    """
    return _make_params(to_fraction(alpha))


@functools.lru_cache(maxsize=256)
def _make_params(alpha):
    if not 0 < alpha < 1:
        raise ConstructionError(f'alpha must lie in the open interval (0, 1), got {alpha}')
    beta = min(Fraction(1, 2), (1 - alpha) / (2 * alpha))
    j0 = _window_threshold(beta)
    failures = _ordering_failures(float(alpha), float(beta), j0, min(J0_SCAN_LIMIT, HORIZON - 1))
    if failures.size:
        j0 = int(failures.max()) + 1
    logger.debug(f'alpha={alpha}: beta={beta}, j0={j0}')
    return AlphaParams(alpha=alpha, beta=beta, j0=j0)


@dataclasses.dataclass(frozen=True)
class CoefficientSchedule:
    """
    The construction for a fixed degree n.

    Attributes:
        params: The per-alpha constants.
        n: The degree.
        j_star: The block that contains n (the last block touching {0, ..., n}).
    """

    params: AlphaParams
    n: int
    j_star: int

    @property
    def j0(self):
        return self.params.j0

    def m_of(self, j):
        return self.params.m_of(j)

    def block_of(self, k):
        if k > self.n:
            raise ConstructionError(f'index {k} exceeds the degree {self.n}')
        return self.params.block_of(k)

    def log_c(self, k):
        return self.params.log_c(k)

    def window(self, j):
        return self.params.window(j)

    def leader(self, j):
        """Return the leading index of block j: m_j for complete blocks, n for block j_star."""
        if not 0 <= j <= self.j_star:
            raise ConstructionError(f'block {j} is outside 0..{self.j_star}')
        return self.n if j == self.j_star else self.m_of(j)

    def leader_indices(self):
        """Return (m_0, ..., m_{j*-1}, n), the indices whose signs drive the sign-change count."""
        return tuple(self.m_of(j) for j in range(self.j_star)) + (self.n,)

    def block_bounds(self):
        """Return [(j, lo, hi)] index ranges of every block clipped to {0, ..., n}."""
        bounds = []
        for j in range(self.j_star + 1):
            lo = self.m_of(j - 1) + 1
            hi = min(self.m_of(j), self.n)
            bounds.append((j, lo, hi))
        return bounds

    def top_window(self):
        """
        Return the dominance region [a_top, +inf) of the term n.

        a_top = max(a_{j*}, s * (1 + j***(-beta))) where s = 2**(j*-1) / (n - m_{j*-1}) is the point
            at which the term n balances the leader of block j* - 1.
        """
        j = self.j_star
        if j < 1:
            raise ConstructionError('the top window needs j_star >= 1')
        prec = WINDOW_PRECISION
        a = self.window(j).a._mpf_
        beta = self.params.beta
        shrink = libmp.mpf_exp(
            libmp.mpf_mul(
                libmp.from_rational(-beta.numerator, beta.denominator, prec),
                libmp.mpf_log(libmp.from_int(j), prec),
                prec,
            ),
            prec,
        )
        balance = libmp.mpf_div(
            libmp.mpf_shift(libmp.fone, j - 1), libmp.from_int(self.n - self.m_of(j - 1)), prec
        )
        start = libmp.mpf_mul(balance, libmp.mpf_add(libmp.fone, shrink, prec), prec)
        if libmp.mpf_gt(start, a):
            a = start
        return Window(j=j, a=make_mpf(a), b=mpmath.inf)


def make_schedule(alpha, n):
    """
    Build the schedule for degree n.

    :param alpha: The exponent (or ready-made AlphaParams).
    :type alpha: float | str | fractions.Fraction | AlphaParams
    :param n: The degree.
    :type n: int
    :rtype: CoefficientSchedule
    :raises ConstructionError: If n is negative or alpha is invalid.
    """
    params = alpha if isinstance(alpha, AlphaParams) else make_params(alpha)
    if isinstance(n, bool) or not isinstance(n, int) or n < 0:
        raise ConstructionError(f'the degree must be a nonnegative integer, got {n!r}')
    return CoefficientSchedule(params=params, n=n, j_star=params.block_of(n))


def j_star(alpha, n):
    """Return the block index that contains the degree n."""
    return make_schedule(alpha, n).j_star


def schedule_rows(alpha, j_max):
    """
    Produce the construction table for blocks 0..j_max.

    Each row is (j, m_j, block_lo, block_hi, log_c, a_j, b_j); the window columns are None for
        j = 0, which has no window.
    """
    params = alpha if isinstance(alpha, AlphaParams) else make_params(alpha)
    if j_max < 0 or j_max > HORIZON:
        raise ConstructionError(f'jmax must lie in 0..{HORIZON}, got {j_max}')
    rows = []
    for j in range(j_max + 1):
        m_j = params.m_of(j)
        window = params.window(j) if j >= 1 else None
        rows.append((
            j,
            m_j,
            params.m_of(j - 1) + 1,
            m_j,
            make_mpf(log_c_raw(j)),
            window.a if window else None,
            window.b if window else None,
        ))
    return rows
