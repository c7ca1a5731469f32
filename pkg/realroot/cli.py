# SPDX-License-Identifier: AGPL-3.0-or-later


"""
Command-line front end.

Subcommands:
============
    schedule: Dump the construction table (blocks, log-coefficients, windows) as CSV.
    trial: Run one realization end to end and print its report as JSON.
    verify-lemmas: Write increments.csv, events.csv and decay.csv.
    campaign: Run (or resume) a campaign into campaign.db and trials.csv.
    summarize: Turn trials.csv into summary.json and histogram.csv.

Classes:
========
    RunConfig: The validated run parameters, echoed into every output for provenance.

Functions:
==========
    main: Entry point; returns the process exit code (0 success, 1 parameter error, 2 failure).

Notes
=====
    Run parameters are layered: configuration defaults, then the --config key=value file (keys
        ALPHA, N, DIST, P, TRIALS, SEED, OUTPUT, WORKERS and the numeric settings of
        default_settings.Config), then command-line flags.

Miscellaneous objects:
======================
    Except for the public objects exported by this module and their public APIs (if applicable),
        everything else is an implementation detail, and shouldn't be relied upon as it may change
        over time.
"""

# Standard library
import csv
import dataclasses
import json
import logging
import os

# Third-party
import click
import mpmath

# Project specific
import realroot
from realroot import construction
from realroot import mc
from realroot import noise
from realroot import rootcount
from realroot import verify

logger = logging.getLogger(__name__)

TRIALS_FILE = 'trials.csv'
SUMMARY_FILE = 'summary.json'
HISTOGRAM_FILE = 'histogram.csv'
INCREMENTS_FILE = 'increments.csv'
EVENTS_FILE = 'events.csv'
DECAY_FILE = 'decay.csv'


@dataclasses.dataclass(frozen=True)
class RunConfig:
    alphas: tuple
    ns: tuple
    dist: str
    p: float
    trials: int
    master_seed: int
    precision_ladder: tuple
    output_dir: str
    verbose: bool
    workers: int

    def to_dict(self):
        return dataclasses.asdict(self)

    def provenance(self):
        """The header every output starts with: tool version and the full run configuration."""
        return {
            'tool': f'realroot {realroot.__version__}',
            'config': self.to_dict(),
        }

    def header_lines(self):
        provenance = self.provenance()
        return [provenance['tool'], 'config ' + json.dumps(provenance['config'], sort_keys=True)]

    def options(self, config):
        settings = dict(config, PRECISION_LADDER=self.precision_ladder)
        return rootcount.CountOptions.from_config(settings)


def _as_list(value, convert):
    if value is None:
        return ()
    if isinstance(value, str):
        value = [value]
    items = []
    for item in value:
        if isinstance(item, str):
            items.extend(part.strip() for part in item.split(',') if part.strip())
        else:
            items.append(item)
    return tuple(convert(item) for item in items)


def _pick(flag_value, config, key, default=None):
    """Flags override the settings file, which overrides the default."""
    if flag_value not in (None, ()):
        return flag_value
    return config.get(key, default)


def build_run_config(config, alpha=(), n=(), dist=None, p=None, trials=None, seed=None,
                     output=None, workers=None):
    """
    Merge configuration and flags into a validated RunConfig.

    :raises ValueError: On any invalid parameter.
    """
    alphas = _as_list(_pick(alpha, config, 'ALPHA', ()), mc.alpha_text)
    for value in alphas:
        construction.make_params(value)
    ns = _as_list(_pick(n, config, 'N', ()), int)
    if any(value < 0 for value in ns):
        raise construction.ConstructionError(f'degrees must be nonnegative, got {ns}')
    dist = str(_pick(dist, config, 'DIST', noise.RADEMACHER))
    p_value = _pick(p, config, 'P')
    p_value = None if p_value in (None, '') else float(p_value)
    spec = noise.make_spec(dist, p_value, diagnostic=True)
    trial_count = int(_pick(trials, config, 'TRIALS', 0))
    if trial_count < 0:
        raise mc.StatisticsError(f'the trial count must be nonnegative, got {trial_count}')
    master_seed = int(_pick(seed, config, 'SEED', 0))
    if not 0 <= master_seed < 2**64:
        raise noise.NoiseError(f'the seed must fit 64 bits, got {master_seed}')
    worker_count = int(_pick(workers, config, 'WORKERS', 1))
    if worker_count < 1:
        raise mc.StatisticsError(f'at least one worker is needed, got {worker_count}')
    options = rootcount.CountOptions.from_config(config)

    return RunConfig(
        alphas=alphas,
        ns=ns,
        dist=spec.kind,
        p=spec.p,
        trials=trial_count,
        master_seed=master_seed,
        precision_ladder=options.precision_ladder,
        output_dir=str(_pick(output, config, 'OUTPUT', '.')),
        verbose=bool(config.get('VERBOSE', False)),
        workers=worker_count,
    )


def _write_csv(path, header_lines, columns, rows):
    with open(path, 'w', newline='') as file_object:
        for line in header_lines:
            file_object.write(f'# {line}\n')
        writer = csv.writer(file_object)
        writer.writerow(columns)
        writer.writerows(rows)
    logger.info(f'Wrote {path}')


def _number(value, digits=17):
    return '' if value is None else mpmath.nstr(value, digits)


def _require_one(values, name):
    if len(values) != 1:
        raise click.BadParameter(f'exactly one value is needed, got {len(values)}', param_hint=name)
    return values[0]


@click.group(context_settings={'help_option_names': ['-h', '--help']})
@click.option('--config', 'settings_file', type=click.Path(exists=True, dir_okay=False),
              help='Plain-text key=value settings file.')
@click.option('--env', type=click.Choice(realroot.ENVIRONMENTS),
              help='Configuration environment (defaults to $REALROOT_ENV, then production).')
@click.option('-v', '--verbose', is_flag=True, help='Log at DEBUG level (per-block partial sums).')
@click.version_option(realroot.__version__, prog_name='realroot')
@click.pass_context
def cli(ctx, settings_file, env, verbose):
    """Count and certify the real roots of block-exponential random polynomials."""
    config = realroot.create_config(env, settings_file)
    if verbose:
        config['VERBOSE'] = True
        logging.getLogger('realroot').setLevel(logging.DEBUG)
    ctx.obj = config


@cli.command()
@click.option('--alpha', multiple=True, help='The exponent in (0, 1).')
@click.option('--jmax', type=int, default=16, show_default=True, help='Last block index.')
@click.pass_obj
def schedule(config, alpha, jmax):
    """Dump blocks, log-coefficients and windows as CSV."""
    run = build_run_config(config, alpha=alpha)
    alpha_value = _require_one(run.alphas, '--alpha')
    params = construction.make_params(alpha_value)
    for line in run.header_lines():
        click.echo(f'# {line}')
    click.echo(f'# seed={run.master_seed}')
    click.echo(f'# alpha={params.alpha} beta={params.beta} j0={params.j0} jmax={jmax}')
    click.echo('j,m,block_lo,block_hi,log_c,a,b')
    for j, m_j, block_lo, block_hi, log_c, a, b in construction.schedule_rows(params, jmax):
        click.echo(f'{j},{m_j},{block_lo},{block_hi},{_number(log_c)},{_number(a)},{_number(b)}')


@cli.command()
@click.option('--alpha', multiple=True, help='The exponent in (0, 1).')
@click.option('--n', 'n', multiple=True, type=int, help='The degree.')
@click.option('--dist', help='Noise kind (gaussian, rademacher, uniform).')
@click.option('--p', type=float, help='P(eps > 0) for rademacher noise.')
@click.option('--seed', type=int, help='64-bit seed of the realization.')
@click.option('--oracle', is_flag=True, help='Also run the independent oracle (n <= 2000).')
@click.pass_obj
def trial(config, alpha, n, dist, p, seed, oracle):
    """Run one realization end to end and print the report as JSON."""
    run = build_run_config(config, alpha=alpha, n=n, dist=dist, p=p, seed=seed)
    alpha_value = _require_one(run.alphas, '--alpha')
    degree = _require_one(run.ns, '--n')
    spec = noise.make_spec(run.dist, run.p, diagnostic=True)
    schedule_ = construction.make_schedule(alpha_value, degree)
    realization = noise.sample(spec, degree, run.master_seed)
    report = rootcount.count_certified(realization, schedule_, run.options(config))

    output = {'provenance': run.provenance(), 'seed': run.master_seed, 'j0': schedule_.j0,
              'j_star': schedule_.j_star, 'count': report.count}
    output.update(report.to_dict())
    if oracle:
        output['oracle_count'] = rootcount.oracle_count(
            realization, schedule_, int(config['ORACLE_PRECISION']),
            int(config['ORACLE_MAX_DEGREE']),
        )
    click.echo(json.dumps(output, indent=2))


@cli.command('verify-lemmas')
@click.option('--alpha', multiple=True, help='Exponents (repeat or comma-separate).')
@click.option('--jlo', type=int, help='First block of the increment table (default: j0).')
@click.option('--jhi', type=int, default=200, show_default=True, help='Last block.')
@click.option('--n', 'n', multiple=True, type=int, help='Degree of the event scan.')
@click.option('--dist', help='Noise kind; concentrated is allowed here.')
@click.option('--p', type=float, help='P(eps > 0) for rademacher noise.')
@click.option('--trials', type=int, help='Realizations of the event scan (0 skips it).')
@click.option('--seed', type=int, help='Master seed of the event scan.')
@click.option('--output', type=click.Path(file_okay=False), help='Output directory.')
@click.pass_obj
def verify_lemmas(config, alpha, jlo, jhi, n, dist, p, trials, seed, output):
    """Write the increment table and the certificate failure frequencies."""
    run = build_run_config(config, alpha=alpha, n=n, dist=dist, p=p, trials=trials, seed=seed,
                           output=output)
    if not run.alphas:
        raise click.BadParameter('at least one value is needed', param_hint='--alpha')
    if run.trials and len(run.ns) != 1:
        raise click.BadParameter('the event scan needs exactly one degree', param_hint='--n')
    os.makedirs(run.output_dir, exist_ok=True)
    header = run.header_lines()

    increment_rows, event_rows, decay_rows = [], [], []
    for alpha_value in run.alphas:
        j_lo = jlo or construction.make_params(alpha_value).j0
        table = verify.check_increments(alpha_value, j_lo, jhi)
        click.echo(f'alpha={alpha_value}: j0={table.j0} J1={table.j1}')
        for row in table.rows:
            increment_rows.append((
                alpha_value, row.j, _number(row.lhs_left), _number(row.lhs_right),
                _number(row.budget_left), _number(row.budget_right),
                int(row.pass_left), int(row.pass_right),
            ))
        if not run.trials:
            continue
        spec = noise.make_spec(run.dist, run.p, diagnostic=True)
        events = verify.event_scan(spec, alpha_value, run.ns[0], run.trials,
                                   master_seed=run.master_seed, options=run.options(config))
        event_rows.extend((alpha_value, event.j, event.kind, event.trials, event.failures)
                          for event in events)
        decay_rows.extend((alpha_value, fit.kind, repr(fit.slope), repr(fit.intercept), fit.points)
                          for fit in verify.decay_slopes(events))

    _write_csv(os.path.join(run.output_dir, INCREMENTS_FILE), header,
               ('alpha', 'j', 'lhs_left', 'lhs_right', 'budget_left', 'budget_right',
                'pass_left', 'pass_right'), increment_rows)
    _write_csv(os.path.join(run.output_dir, EVENTS_FILE), header,
               ('alpha', 'j', 'kind', 'trials', 'failures'), event_rows)
    _write_csv(os.path.join(run.output_dir, DECAY_FILE), header,
               ('alpha', 'kind', 'slope', 'intercept', 'points'), decay_rows)


@cli.command()
@click.option('--alpha', multiple=True, help='Exponents (repeat or comma-separate).')
@click.option('--n', 'n', multiple=True, help='Degrees (repeat or comma-separate).')
@click.option('--dist', help='Noise kind (gaussian, rademacher, uniform).')
@click.option('--p', type=float, help='P(eps > 0) for rademacher noise.')
@click.option('--trials', type=int, help='Trials per (alpha, n).')
@click.option('--seed', type=int, help='Master seed.')
@click.option('--output', type=click.Path(file_okay=False), help='Output directory.')
@click.option('--workers', type=int, help='Worker processes (default: $REALROOT_THREADS).')
@click.pass_obj
def campaign(config, alpha, n, dist, p, trials, seed, output, workers):
    """Run or resume a campaign; write campaign.db and trials.csv."""
    run = build_run_config(config, alpha=alpha, n=n, dist=dist, p=p, trials=trials, seed=seed,
                           output=output, workers=workers)
    if not run.alphas or not run.ns:
        raise click.BadParameter('a campaign needs at least one alpha and one degree')
    os.makedirs(run.output_dir, exist_ok=True)
    campaign_config = mc.CampaignConfig(
        alphas=run.alphas, ns=run.ns, dist=run.dist, p=run.p, trials=run.trials,
        master_seed=run.master_seed, options=run.options(config), workers=run.workers,
    )
    store_path = os.path.join(run.output_dir, config['DATABASE_NAME'])
    records = mc.run_campaign(campaign_config, store_path)
    mc.write_trials_csv(records, os.path.join(run.output_dir, TRIALS_FILE), run.header_lines())
    exact = sum(record.is_exact for record in records)
    click.echo(f'{len(records)} trials ({exact} exact) in {run.output_dir}')


@cli.command()
@click.option('--output', type=click.Path(file_okay=False), help='Campaign directory.')
@click.option('--delta', type=float, help='Concentration tolerance.')
@click.option('--bins', type=int, help='Histogram bins.')
@click.pass_obj
def summarize(config, output, delta, bins):
    """Compute summary.json and histogram.csv from trials.csv."""
    run = build_run_config(config, output=output)
    delta = float(_pick(delta, config, 'CONCENTRATION_DELTA'))
    bins = int(_pick(bins, config, 'HISTOGRAM_BINS'))
    trials_path = os.path.join(run.output_dir, TRIALS_FILE)
    if not os.path.isfile(trials_path):
        raise click.BadParameter(f'{trials_path} does not exist', param_hint='--output')
    records = mc.read_trials_csv(trials_path)
    summary = mc.summarize(records, delta=delta, bins=bins,
                           min_records=int(config['MIN_CLT_RECORDS']))

    provenance = run.provenance()
    provenance['source'] = {'file': TRIALS_FILE, 'records': len(records)}
    document = {'provenance': provenance}
    document.update(summary.to_dict())
    with open(os.path.join(run.output_dir, SUMMARY_FILE), 'w') as file_object:
        json.dump(document, file_object, indent=2, sort_keys=False)
        file_object.write('\n')
    _write_csv(os.path.join(run.output_dir, HISTOGRAM_FILE), run.header_lines(),
               ('alpha', 'n', 'bin_lo', 'bin_hi', 'count'), summary.histogram_rows())
    click.echo(f'{len(summary.groups)} groups summarized from {len(records)} trials')


def main(argv=None):
    """
    Run the command line and map the outcome to an exit code.

    :param argv: Arguments without the program name; defaults to sys.argv[1:].
    :type argv: list
    :return: 0 on success, 1 on usage or parameter errors, 2 on internal failures.
    :rtype: int
    """
    try:
        result = cli.main(args=argv, prog_name='realroot', standalone_mode=False)
    except click.ClickException as ex:
        ex.show()
        return 1
    except click.exceptions.Abort:
        click.echo('Aborted!', err=True)
        return 1
    except ValueError as ex:
        logger.error(f'Parameter error: {ex}')
        click.echo(f'Error: {ex}', err=True)
        return 1
    except Exception as ex:  # pylint: disable=broad-except
        logger.exception('Internal failure')
        click.echo(f'Internal failure: {ex!r}', err=True)
        return 2
    return result if isinstance(result, int) else 0
