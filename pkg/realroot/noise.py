# SPDX-License-Identifier: AGPL-3.0-or-later


"""
Sample reproducible coefficient noise and count block-leader sign changes.

Classes:
========
    NoiseSpec: A noise distribution (kind, p, anti-concentration constant c0).
    NoiseRealization: One sampled noise vector eps_0..eps_n.
    NoiseError: Raised on invalid noise parameters or malformed realization files.
    GeneratorError: Raised when the generator keeps producing zero draws.

Functions:
==========
    make_spec: Validate and build a NoiseSpec.
    sample: Draw a NoiseRealization for (spec, n, seed).
    from_values: Wrap explicit noise values into a NoiseRealization.
    mix64: The 64-bit avalanche mixer every seed and substream is derived with.
    term_signs: Effective term signs on the positive or negative real axis.
    leader_signs: The block-leader sign sequence on an axis.
    sign_changes: Count adjacent sign flips in the block-leader sequence.
    dump_csv: Write a realization to a versioned CSV file.
    load_csv: Read a realization back from dump_csv output.

CONSTANTS:
==========
    KINDS: The public noise kinds.
    DIAGNOSTIC_KINDS: Kinds that violate the anti-concentration assumption on purpose.
    AXES: The two real half-axes.

Notes
=====
    * The generator is counter based: draw k of a realization depends on (seed, k, attempt) only,
        so any partition of the index range yields the same vector.
    * Uniforms are u = ((x >> 11) + 1/2) * 2**-53 for a mixed 64-bit word x, strictly inside (0, 1).
    * Gaussian draws use a rational inverse-CDF approximation (Acklam); the tail logarithms are
        taken with mpmath so every platform rounds them identically.
    * log|eps_k| is computed with mpmath and rounded to nearest, for the same reason.

Miscellaneous objects:
======================
    Except for the public objects exported by this module and their public APIs (if applicable),
        everything else is an implementation detail, and shouldn't be relied upon as it may change
        over time.
"""

# Standard library
import csv
import dataclasses
import logging
import math

# Third-party
import numpy as np
from mpmath import libmp

logger = logging.getLogger(__name__)

GAUSSIAN = 'gaussian'
RADEMACHER = 'rademacher'
UNIFORM = 'uniform'
CONCENTRATED = 'concentrated'
KINDS = (GAUSSIAN, RADEMACHER, UNIFORM)
DIAGNOSTIC_KINDS = (CONCENTRATED,)

POSITIVE = 'positive'
NEGATIVE = 'negative'
AXES = (POSITIVE, NEGATIVE)

CSV_HEADER = '# realroot-noise v1'
ZERO_RETRIES = 8

# Half-width of the narrow component of the concentrated diagnostic kind.
CONCENTRATED_SCALE = 2.0**-30

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MULTIPLIER_1 = np.uint64(0xBF58476D1CE4E5B9)
_MULTIPLIER_2 = np.uint64(0x94D049BB133111EB)

# Acklam's rational approximation of the standard normal quantile function.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


class NoiseError(ValueError):
    """Raised on invalid noise parameters."""


class GeneratorError(NoiseError):
    """Raised when the generator produced zero draws past the retry budget."""


@dataclasses.dataclass(frozen=True)
class NoiseSpec:
    """
    A coefficient noise distribution.

    Attributes:
        kind: One of KINDS (or DIAGNOSTIC_KINDS).
        p: P(eps > 0).
        c0: A constant with P(|eps| <= t) <= c0 * t for every t >= 0.
    """

    kind: str
    p: float
    c0: float

    def __str__(self):
        if self.kind == RADEMACHER:
            return f'{self.kind}(p={self.p})'
        return self.kind


def make_spec(kind, p=None, diagnostic=False):
    """
    Validate and build a NoiseSpec.

    The anti-concentration constants are: gaussian sqrt(2/pi) (the density is at most
        1/sqrt(2*pi)), uniform 1, rademacher 1 (|eps| = 1), concentrated 2**29 + 1/2.

    :param kind: The distribution kind.
    :type kind: str
    :param p: P(eps > 0); only rademacher accepts values other than 1/2.
    :type p: float
    :param diagnostic: Whether diagnostic kinds are allowed.
    :type diagnostic: bool
    :rtype: NoiseSpec
    :raises NoiseError: If the kind is unknown or p is out of range.
    """
    kind = str(kind).lower()
    if kind in DIAGNOSTIC_KINDS and not diagnostic:
        raise NoiseError(f'{kind!r} is a diagnostic-only kind')
    if kind not in KINDS + DIAGNOSTIC_KINDS:
        raise NoiseError(f'unknown noise kind {kind!r}, expected one of {KINDS}')

    if kind == RADEMACHER:
        p = 0.5 if p is None else float(p)
        if not 0 < p < 1:
            raise NoiseError(f'p must lie in the open interval (0, 1), got {p}')
        return NoiseSpec(kind=kind, p=p, c0=1.0)

    if p is not None and float(p) != 0.5:
        raise NoiseError(f'{kind} noise is symmetric; p must be 1/2, got {p}')
    c0 = {
        GAUSSIAN: math.sqrt(2 / math.pi),
        UNIFORM: 1.0,
        CONCENTRATED: 2.0**29 + 0.5,
    }[kind]
    return NoiseSpec(kind=kind, p=0.5, c0=c0)


@dataclasses.dataclass(frozen=True, eq=False)
class NoiseRealization:
    """
    One noise vector eps_0..eps_n.

    Attributes:
        n: The degree.
        eps_sign: int8 signs in {-1, +1}.
        eps_logabs: log|eps_k| as float64.
        seed: The 64-bit seed (0 for hand-built realizations).
        spec: The distribution the values were drawn from.
        values: eps_k as float64.

    Realizations compare by identity, so they can key caches.
    """

    n: int
    eps_sign: np.ndarray
    eps_logabs: np.ndarray
    seed: int
    spec: NoiseSpec
    values: np.ndarray

    def __post_init__(self):
        assert self.eps_sign.shape == (self.n + 1,), 'one sign per coefficient'
        assert self.eps_logabs.shape == (self.n + 1,), 'one log-magnitude per coefficient'


def mix64(value, seed=0):
    """Deterministic 64-bit mixer derived from splitmix64."""
    x = (value + seed * _GAMMA) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x & _MASK64


def _mix64_array(values, seed):
    """Vectorised mix64 over a uint64 array; arithmetic wraps modulo 2**64."""
    x = values + np.uint64((seed * _GAMMA) & _MASK64)
    x = (x ^ (x >> np.uint64(30))) * _MULTIPLIER_1
    x = (x ^ (x >> np.uint64(27))) * _MULTIPLIER_2
    return x ^ (x >> np.uint64(31))


def _uniforms(seed, indices, stream):
    """Return one uniform in (0, 1) per index for the given substream."""
    words = _mix64_array(_mix64_array(indices, seed), stream + 1)
    return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def _log(value):
    return libmp.to_float(libmp.mpf_log(libmp.from_float(value), 53, libmp.round_nearest))


def _horner(coefficients, x):
    result = np.full_like(x, coefficients[0])
    for coefficient in coefficients[1:]:
        result = result * x + coefficient
    return result


def _inverse_normal(u):
    """Map uniforms in (0, 1) to standard normal quantiles."""
    result = np.empty_like(u)

    central = (u >= _P_LOW) & (u <= 1 - _P_LOW)
    q = u[central] - 0.5
    r = q * q
    result[central] = _horner(_A, r) * q / (_horner(_B, r) * r + 1)

    for mask, tail, sign in ((u < _P_LOW, u, 1.0), (u > 1 - _P_LOW, 1 - u, -1.0)):
        if not mask.any():
            continue
        logs = np.array([_log(value) for value in tail[mask]], dtype=np.float64)
        q = np.sqrt(-2 * logs)
        result[mask] = sign * _horner(_C, q) / (_horner(_D, q) * q + 1)
    return result


def _draw(spec, seed, indices, attempt):
    u = _uniforms(seed, indices, 2 * attempt)
    if spec.kind == RADEMACHER:
        return np.where(u < spec.p, 1.0, -1.0)
    if spec.kind == GAUSSIAN:
        return _inverse_normal(u)
    values = 2 * u - 1
    if spec.kind == CONCENTRATED:
        choice = _uniforms(seed, indices, 2 * attempt + 1)
        values = np.where(choice < 0.5, values * CONCENTRATED_SCALE, values)
    return values


def _logabs(spec, values):
    if spec.kind == RADEMACHER:
        return np.zeros(values.shape, dtype=np.float64)
    return np.array([_log(abs(value)) for value in values], dtype=np.float64)


def sample(spec, n, seed):
    """
    Draw eps_0..eps_n.

    Draw k uses the substream mix64(k, seed); a zero draw is redrawn from the next substream of
        the same index, at most ZERO_RETRIES times.

    :param spec: The distribution.
    :type spec: NoiseSpec
    :param n: The degree (n + 1 draws).
    :type n: int
    :param seed: A 64-bit unsigned seed.
    :type seed: int
    :rtype: NoiseRealization
    :raises NoiseError: If n is negative or the seed is out of range.
    :raises GeneratorError: If zero draws persist past the retry budget.
    """
    if n < 0:
        raise NoiseError(f'the degree must be nonnegative, got {n}')
    if not 0 <= seed <= _MASK64:
        raise NoiseError(f'the seed must be a 64-bit unsigned integer, got {seed}')

    indices = np.arange(n + 1, dtype=np.uint64)
    values = _draw(spec, seed, indices, attempt=0)
    zeros = values == 0
    attempt = 1
    while zeros.any():
        if attempt > ZERO_RETRIES:
            raise GeneratorError(
                f'{int(zeros.sum())} zero draws left after {ZERO_RETRIES} retries (seed={seed})'
            )
        logger.warning(f'Redrawing {int(zeros.sum())} zero draws (seed={seed}, attempt={attempt})')
        values[zeros] = _draw(spec, seed, indices[zeros], attempt)
        zeros = values == 0
        attempt += 1

    return _realization(spec, values, seed)


def _realization(spec, values, seed):
    return NoiseRealization(
        n=values.size - 1,
        eps_sign=np.where(values > 0, 1, -1).astype(np.int8),
        eps_logabs=_logabs(spec, values),
        seed=seed,
        spec=spec,
        values=values,
    )


def from_values(spec, values, seed=0):
    """
    Wrap explicit noise values into a realization (replays, adversarial constructions).

    :raises NoiseError: If a value is zero or not finite, or no value is given.
    """
    values = np.asarray(values, dtype=np.float64).copy()
    if values.ndim != 1 or values.size == 0:
        raise NoiseError('expected a nonempty one-dimensional sequence of noise values')
    if not np.all(np.isfinite(values)) or np.any(values == 0):
        raise NoiseError('noise values must be finite and nonzero')
    return _realization(spec, values, seed)


def term_signs(realization, axis):
    """Return the sign of eps_k * x**k for x > 0 (positive axis) or x < 0 (negative axis)."""
    if axis not in AXES:
        raise NoiseError(f'unknown axis {axis!r}, expected one of {AXES}')
    signs = realization.eps_sign.astype(np.int64)
    if axis == NEGATIVE:
        signs = signs.copy()
        signs[1::2] *= -1
    return signs


def leader_signs(realization, schedule, axis=POSITIVE):
    """
    Return the signs of (eps_{m_0}, ..., eps_{m_{j*-1}}, eps_n) as seen on an axis.

    Every m_j is even, so only the last entry changes on the negative axis, by (-1)**n.
    """
    if realization.n != schedule.n:
        raise NoiseError(f'realization degree {realization.n} != schedule degree {schedule.n}')
    signs = term_signs(realization, axis)
    return signs[list(schedule.leader_indices())]


def sign_changes(realization, schedule, axis=POSITIVE):
    """Count adjacent sign flips in the block-leader sequence."""
    signs = leader_signs(realization, schedule, axis)
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def dump_csv(realization, path):
    """Write `k,sign,logabs,value` rows after a versioned header line."""
    spec = realization.spec
    with open(path, 'w', newline='') as file_object:
        file_object.write(
            f'{CSV_HEADER} kind={spec.kind} p={spec.p!r} seed={realization.seed} '
            f'n={realization.n}\n'
        )
        writer = csv.writer(file_object)
        writer.writerow(('k', 'sign', 'logabs', 'value'))
        for k in range(realization.n + 1):
            writer.writerow((
                k,
                int(realization.eps_sign[k]),
                repr(float(realization.eps_logabs[k])),
                repr(float(realization.values[k])),
            ))


def load_csv(path):
    """
    Read a realization written by dump_csv.

    :raises NoiseError: If the header or the rows are malformed.
    """
    with open(path, newline='') as file_object:
        header = file_object.readline().strip()
        if not header.startswith(CSV_HEADER):
            raise NoiseError(f'{path}: missing {CSV_HEADER!r} header')
        try:
            fields = dict(item.split('=', 1) for item in header[len(CSV_HEADER):].split())
            spec = make_spec(fields['kind'], float(fields['p']), diagnostic=True)
            seed = int(fields['seed'])
            n = int(fields['n'])
        except (KeyError, ValueError) as ex:
            raise NoiseError(f'{path}: malformed header {header!r}') from ex

        rows = list(csv.DictReader(file_object))
    if len(rows) != n + 1 or any(int(row['k']) != k for k, row in enumerate(rows)):
        raise NoiseError(f'{path}: expected rows k = 0..{n}')

    values = np.array([float(row['value']) for row in rows], dtype=np.float64)
    realization = from_values(spec, values, seed)
    stored_logabs = np.array([float(row['logabs']) for row in rows], dtype=np.float64)
    if not np.array_equal(stored_logabs, realization.eps_logabs):
        logger.warning(f'{path}: stored log-magnitudes differ from recomputed ones')
    return realization
