# SPDX-License-Identifier: AGPL-3.0-or-later


"""
Run Monte Carlo campaigns and compute their statistics.

Classes:
========
    TrialRecord: One trial of a campaign (one row of trials.csv).
    CampaignConfig: What a campaign runs: alphas, degrees, noise law, trial count, master seed.
    CampaignSummary: Per-(alpha, n) aggregates of a campaign.
    ExponentFit: The fitted growth exponent of one alpha.
    MomentDiagnostics: Standardized moments and histogram of a sample.
    Summary: Everything `summarize` writes.
    StatisticsError: Raised on degenerate statistical input.

Functions:
==========
    run_trial: Sample, count and record one trial.
    run_campaign: Run (or resume) a campaign, optionally backed by the trial store.
    theory_sign_change_moments: Mean and variance of the sign-change count of an i.i.d. sign chain.
    estimate_exponent: Least-squares slope of log(mean R) against log(n).
    moment_diagnostics: Skewness, excess kurtosis and standardized histogram of a sample.
    clt_diagnostics: moment_diagnostics of the exact counts at one degree.
    summarize: Aggregate records into a Summary.
    write_trials_csv, read_trials_csv: trials.csv in and out.

Notes
=====
    * Trial seeds are mix64(trial_index, master_seed); a trial is a pure function of its config and
        index, so worker count and completion order never change the records (apart from wall_ms).
    * Moment statistics only use exact-status trials; exact_fraction reports the attrition.
    * The concentration statistic normalizes R by c_p * (n/2)**alpha.

Miscellaneous objects:
======================
    Except for the public objects exported by this module and their public APIs (if applicable),
        everything else is an implementation detail, and shouldn't be relied upon as it may change
        over time.
"""

# Standard library
import collections
import concurrent.futures
import csv
import dataclasses
import logging
import math
import time

# Third-party
import numpy as np

# Project specific
from realroot import construction
from realroot import db
from realroot import noise
from realroot import rootcount

logger = logging.getLogger(__name__)

HISTOGRAM_SPAN = 4.0
TRACKING_CONSTANT = 4


class StatisticsError(ValueError):
    """Raised when a statistic is requested from degenerate or insufficient input."""


def alpha_text(alpha):
    """Canonical text of an alpha: floats via repr, everything else stripped."""
    if isinstance(alpha, float):
        return repr(alpha)
    return str(alpha).strip()


@dataclasses.dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    seed: int
    alpha: str
    n: int
    dist: str
    p: float
    s_pos: int
    s_neg: int
    predicted: int
    count_lo: int
    count_hi: int
    status: str
    wall_ms: float

    @classmethod
    def field_names(cls):
        return tuple(field.name for field in dataclasses.fields(cls))

    @classmethod
    def from_row(cls, row):
        """Build a record from a store row or a CSV row (strings are converted)."""
        return cls(
            trial_index=int(row['trial_index']),
            seed=int(row['seed']),
            alpha=alpha_text(row['alpha']),
            n=int(row['n']),
            dist=str(row['dist']),
            p=float(row['p']),
            s_pos=int(row['s_pos']),
            s_neg=int(row['s_neg']),
            predicted=int(row['predicted']),
            count_lo=int(row['count_lo']),
            count_hi=int(row['count_hi']),
            status=str(row['status']),
            wall_ms=float(row['wall_ms']),
        )

    def to_row(self):
        return dataclasses.asdict(self)

    @property
    def key(self):
        return self.alpha, self.n, self.dist, self.p, self.trial_index

    def sort_key(self):
        return construction.to_fraction(self.alpha), self.n, self.dist, self.p, self.trial_index

    @property
    def is_exact(self):
        return self.status == rootcount.EXACT


@dataclasses.dataclass(frozen=True)
class CampaignConfig:
    """
    A campaign: every alpha x every n x trials trial indices.

    Attributes:
        alphas: Exponents, kept as text so that '0.3' means 3/10.
        ns: Degrees.
        dist: Noise kind.
        p: P(eps > 0) (rademacher only; None means 1/2).
        trials: Trials per (alpha, n).
        master_seed: 64-bit campaign seed.
        options: Counter knobs.
        workers: Worker processes.
    """

    alphas: tuple
    ns: tuple
    dist: str
    p: float = None
    trials: int = 0
    master_seed: int = 0
    options: rootcount.CountOptions = rootcount.CountOptions()
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, 'alphas', tuple(alpha_text(alpha) for alpha in self.alphas))
        object.__setattr__(self, 'ns', tuple(int(n) for n in self.ns))
        for alpha in self.alphas:
            construction.make_params(alpha)
        if any(n < 0 for n in self.ns):
            raise construction.ConstructionError(f'degrees must be nonnegative, got {self.ns}')
        if self.trials < 0:
            raise StatisticsError(f'the trial count must be nonnegative, got {self.trials}')
        if not 0 <= self.master_seed < 2**64:
            raise noise.NoiseError(f'the master seed must fit 64 bits, got {self.master_seed}')
        if self.workers < 1:
            raise StatisticsError(f'at least one worker is needed, got {self.workers}')
        self.spec()

    def spec(self):
        return noise.make_spec(self.dist, self.p)


def run_trial(alpha, n, spec, trial_index, master_seed, options):
    """
    Sample, count and record one trial.

    Failures inside the counter are recorded as status failed with the trivial bounds [0, n].

    :rtype: TrialRecord
    """
    seed = noise.mix64(trial_index, master_seed)
    start = time.perf_counter()
    s_pos = s_neg = 0
    try:
        schedule = construction.make_schedule(alpha, n)
        realization = noise.sample(spec, n, seed)
        report = rootcount.count_certified(realization, schedule, options)
        s_pos, s_neg = report.s_pos, report.s_neg
        count_lo, count_hi, status = report.count_lo, report.count_hi, report.status
    except (ArithmeticError, ValueError, RuntimeError, AssertionError):
        logger.exception(f'Trial {trial_index} (alpha={alpha}, n={n}, seed={seed}) failed')
        count_lo, count_hi, status = 0, n, rootcount.FAILED
    wall_ms = round((time.perf_counter() - start) * 1000, 3)
    return TrialRecord(
        trial_index=trial_index,
        seed=seed,
        alpha=alpha_text(alpha),
        n=n,
        dist=spec.kind,
        p=spec.p,
        s_pos=s_pos,
        s_neg=s_neg,
        predicted=s_pos + s_neg,
        count_lo=count_lo,
        count_hi=count_hi,
        status=status,
        wall_ms=wall_ms,
    )


def run_campaign(config, store_path=None):
    """
    Run a campaign, appending every completed trial to the store as soon as it is known.

    With a store, trials already present are not rerun, so an interrupted campaign resumes where it
        stopped. The store has a single writer: workers only compute, the parent process inserts.

    :param config: The campaign.
    :type config: CampaignConfig
    :param store_path: Optional SQLite file of the trial store.
    :type store_path: str
    :return: The campaign's records, sorted by (alpha, n, trial_index).
    :rtype: list[TrialRecord]
    """
    spec = config.spec()
    tasks = [(alpha, n, trial_index)
             for alpha in config.alphas for n in config.ns for trial_index in range(config.trials)]
    wanted = {(alpha, n, spec.kind, spec.p, trial_index) for alpha, n, trial_index in tasks}

    engine = db.create_store(store_path) if store_path else None
    records = []
    if engine is not None:
        records = [record for record in map(TrialRecord.from_row, db.fetch_records(engine))
                   if record.key in wanted]
        done = {record.key for record in records}
        tasks = [task for task in tasks
                 if (task[0], task[1], spec.kind, spec.p, task[2]) not in done]
        if records:
            logger.info(f'Resuming campaign: {len(records)} trials stored, {len(tasks)} to run')

    def keep(record):
        if engine is not None:
            db.append_record(engine, record.to_row())
        records.append(record)

    logger.info(f'Running {len(tasks)} trials on {config.workers} worker(s)')
    if config.workers > 1 and len(tasks) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=config.workers) as executor:
            futures = [
                executor.submit(run_trial, alpha, n, spec, trial_index, config.master_seed,
                                config.options)
                for alpha, n, trial_index in tasks
            ]
            for future in concurrent.futures.as_completed(futures):
                keep(future.result())
    else:
        for alpha, n, trial_index in tasks:
            keep(run_trial(alpha, n, spec, trial_index, config.master_seed, config.options))

    records.sort(key=TrialRecord.sort_key)
    return records


def theory_sign_change_moments(p, pairs):
    """
    Mean and variance of the number of sign changes in pairs + 1 i.i.d. signs with P(+) = p.

    With q = 2p(1-p), the change indicators have variance q(1-q) and adjacent covariance
        p(1-p) - q**2; indicators further apart are independent.

    :param p: P(+), in (0, 1).
    :type p: float
    :param pairs: The number N >= 1 of adjacent pairs.
    :type pairs: int
    :return: (mean, variance).
    :rtype: tuple
    :raises StatisticsError: If p or N is out of range.
    """
    if not 0 < p < 1:
        raise StatisticsError(f'p must lie in the open interval (0, 1), got {p}')
    if isinstance(pairs, bool) or not isinstance(pairs, int) or pairs < 1:
        raise StatisticsError(f'at least one adjacent pair is needed, got {pairs!r}')
    q = 2 * p * (1 - p)
    mean = pairs * q
    variance = pairs * q * (1 - q) + 2 * (pairs - 1) * (p * (1 - p) - q * q)
    return mean, variance


def sign_constants(p):
    """Return (c_p, c_p') with E R ~ c_p (n/2)**alpha and Var R ~ c_p' (n/2)**alpha."""
    q = 2 * p * (1 - p)
    return 4 * p * (1 - p), 4 * q * (1 - q) + 8 * (p * (1 - p) - q * q)


def estimate_exponent(points):
    """
    Fit mean_R = C * n**alpha_hat by least squares on log-log scale.

    :param points: (n, mean_R) pairs; at least two distinct n spanning two decades.
    :type points: list
    :return: (alpha_hat, stderr); stderr is 0 for two points.
    :rtype: tuple
    :raises StatisticsError: On repeated n, nonpositive values or a too narrow n range.
    """
    ns = np.array([float(n) for n, _ in points], dtype=np.float64)
    means = np.array([float(mean) for _, mean in points], dtype=np.float64)
    if ns.size < 2 or np.unique(ns).size != ns.size:
        raise StatisticsError(f'need at least two distinct degrees, got {ns.tolist()}')
    if np.any(ns <= 0) or np.any(means <= 0) or not np.all(np.isfinite(means)):
        raise StatisticsError('degrees and means must be positive and finite')
    if math.log10(ns.max() / ns.min()) < 2 - 1e-9:
        raise StatisticsError(f'degrees must span two decades, got {ns.min():g}..{ns.max():g}')

    x, y = np.log(ns), np.log(means)
    slope, intercept = np.polyfit(x, y, 1)
    if ns.size == 2:
        return float(slope), 0.0
    residuals = y - (slope * x + intercept)
    spread = float(np.sum((x - x.mean()) ** 2))
    stderr = math.sqrt(float(np.sum(residuals**2)) / (ns.size - 2) / spread)
    return float(slope), stderr


@dataclasses.dataclass(frozen=True)
class MomentDiagnostics:
    count: int
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    bin_edges: tuple
    histogram: tuple

    def to_dict(self):
        return {
            'count': self.count,
            'mean': self.mean,
            'variance': self.variance,
            'skewness': self.skewness,
            'excess_kurtosis': self.excess_kurtosis,
        }


def moment_diagnostics(values, bins=20):
    """
    Population moments of a sample and the histogram of its standardized values on [-4, 4].

    :raises StatisticsError: With fewer than two values or zero variance.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        raise StatisticsError(f'need at least two values, got {values.size}')
    mean = float(values.mean())
    variance = float(values.var())
    if variance <= 0:
        raise StatisticsError('the sample has zero variance')
    standardized = (values - mean) / math.sqrt(variance)
    counts, edges = np.histogram(standardized, bins=bins, range=(-HISTOGRAM_SPAN, HISTOGRAM_SPAN))
    return MomentDiagnostics(
        count=int(values.size),
        mean=mean,
        variance=variance,
        skewness=float(np.mean(standardized**3)),
        excess_kurtosis=float(np.mean(standardized**4) - 3),
        bin_edges=tuple(float(edge) for edge in edges),
        histogram=tuple(int(count) for count in counts),
    )


def clt_diagnostics(records, n, min_records=500, bins=20):
    """
    Moment diagnostics of the exact counts at degree n.

    :raises StatisticsError: With fewer than min_records exact records, or zero variance.
    """
    counts = [record.count_lo for record in records if record.n == n and record.is_exact]
    if len(counts) < min_records:
        raise StatisticsError(f'{len(counts)} exact records at n={n}, need {min_records}')
    return moment_diagnostics(counts, bins)


@dataclasses.dataclass(frozen=True)
class CampaignSummary:
    alpha: str
    n: int
    dist: str
    p: float
    trials: int
    exact_trials: int
    exact_fraction: float
    mean_R: float
    var_R: float
    skewness: float
    excess_kurtosis: float
    tracking_fraction: float
    concentration_fraction: float
    normalized_mean: float
    normalized_variance: float
    mean_predicted: float
    j_star: int
    c_p: float
    c_p_prime: float
    theory_mean_R: float
    theory_var_R: float

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True)
class ExponentFit:
    alpha: str
    dist: str
    p: float
    alpha_hat: float
    stderr: float
    points: int

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True)
class Summary:
    groups: tuple
    exponents: tuple
    histograms: tuple

    def to_dict(self):
        return {
            'groups': [group.to_dict() for group in self.groups],
            'exponents': [fit.to_dict() for fit in self.exponents],
        }

    def histogram_rows(self):
        """Rows (alpha, n, bin_lo, bin_hi, count) of every group with a histogram."""
        rows = []
        for alpha, n, diagnostics in self.histograms:
            edges = diagnostics.bin_edges
            for position, count in enumerate(diagnostics.histogram):
                rows.append((alpha, n, edges[position], edges[position + 1], count))
        return rows


def _summarize_group(key, records, delta, bins):
    alpha, n, dist, p = key
    alpha_value = float(construction.to_fraction(alpha))
    exact = [record for record in records if record.is_exact]
    counts = np.array([record.count_lo for record in exact], dtype=np.float64)
    scale = (n / 2) ** alpha_value
    c_p, c_p_prime = sign_constants(p)
    j_star = construction.j_star(alpha, n)
    theory_mean = theory_var = None
    if j_star >= 1:
        mean_s, var_s = theory_sign_change_moments(p, j_star)
        theory_mean, theory_var = 2 * mean_s, 4 * var_s

    mean_r = var_r = skewness = kurtosis = tracking = concentration = None
    diagnostics = None
    if exact:
        mean_r = float(counts.mean())
        var_r = float(counts.var(ddof=1)) if counts.size > 1 else 0.0
        bound = TRACKING_CONSTANT * math.log(n) ** (1 / alpha_value) if n > 1 else 0.0
        tracking = sum(abs(record.count_lo - record.predicted) <= bound
                       for record in exact) / len(exact)
        concentration = float(np.mean(np.abs(counts / (c_p * scale) - 1) <= delta))
        try:
            diagnostics = moment_diagnostics(counts, bins)
            skewness, kurtosis = diagnostics.skewness, diagnostics.excess_kurtosis
        except StatisticsError:
            logger.info(f'No moment diagnostics for alpha={alpha}, n={n}: degenerate sample')

    summary = CampaignSummary(
        alpha=alpha,
        n=n,
        dist=dist,
        p=p,
        trials=len(records),
        exact_trials=len(exact),
        exact_fraction=len(exact) / len(records),
        mean_R=mean_r,
        var_R=var_r,
        skewness=skewness,
        excess_kurtosis=kurtosis,
        tracking_fraction=tracking,
        concentration_fraction=concentration,
        normalized_mean=None if mean_r is None else mean_r / scale,
        normalized_variance=None if var_r is None else var_r / scale,
        mean_predicted=float(np.mean([record.predicted for record in records])),
        j_star=j_star,
        c_p=c_p,
        c_p_prime=c_p_prime,
        theory_mean_R=theory_mean,
        theory_var_R=theory_var,
    )
    return summary, diagnostics


def summarize(records, delta=0.1, bins=20, min_records=2):
    """
    Aggregate records per (alpha, n, dist, p) and fit the growth exponent per (alpha, dist, p).

    The result depends on the set of records only, not on their order. Histograms are kept only
    for groups with at least min_records exact counts.

    :rtype: Summary
    """
    grouped = collections.defaultdict(list)
    for record in records:
        grouped[(record.alpha, record.n, record.dist, record.p)].append(record)

    groups, histograms = [], []
    for key in sorted(grouped, key=lambda item: (construction.to_fraction(item[0]),) + item[1:]):
        ordered = sorted(grouped[key], key=lambda record: record.trial_index)
        summary, diagnostics = _summarize_group(key, ordered, delta, bins)
        groups.append(summary)
        if diagnostics is not None and summary.exact_trials >= min_records:
            histograms.append((summary.alpha, summary.n, diagnostics))

    by_alpha = collections.defaultdict(list)
    for summary in groups:
        if summary.mean_R:
            by_alpha[(summary.alpha, summary.dist, summary.p)].append((summary.n, summary.mean_R))
    exponents = []
    for (alpha, dist, p), points in by_alpha.items():
        try:
            alpha_hat, stderr = estimate_exponent(points)
        except StatisticsError as ex:
            logger.info(f'No exponent fit for alpha={alpha}: {ex}')
            continue
        exponents.append(ExponentFit(alpha, dist, p, alpha_hat, stderr, len(points)))
    return Summary(tuple(groups), tuple(exponents), tuple(histograms))


def write_trials_csv(records, path, header_lines=()):
    """Write records as trials.csv, after optional '#' header lines."""
    with open(path, 'w', newline='') as file_object:
        for line in header_lines:
            file_object.write(f'# {line}\n')
        writer = csv.DictWriter(file_object, fieldnames=TrialRecord.field_names())
        writer.writeheader()
        for record in sorted(records, key=TrialRecord.sort_key):
            writer.writerow(record.to_row())


def read_trials_csv(path):
    """Read trials.csv, skipping '#' header lines."""
    with open(path, newline='') as file_object:
        lines = [line for line in file_object if not line.startswith('#')]
    try:
        return [TrialRecord.from_row(row) for row in csv.DictReader(lines)]
    except (KeyError, ValueError) as ex:
        raise StatisticsError(f'{path}: malformed trials file ({ex})') from ex
