"""
pb-chrono command line: simulate cores, date them with CRS or the Bayesian model,
run the subsampling experiment and emit plot-ready tables.

Exit codes: 0 on success, 1 on invalid input (bad flag, missing or malformed file,
value outside a model's domain), 2 on any other failure.
"""
import logging
import sys

import click

from algorithms.crs import CrsSettings, ci_crs_chronology
from algorithms.crs_monte_carlo import r_crs_chronology
from algorithms.mcmc import McmcSettings
from algorithms.plum import PlumPriors, sample_posterior, summarize_chronology
from scenarios import get_scenario
from src.cli.plot_data import PLOT_KINDS, emit_plot_data
from src.common.exceptions import ChronologyError, DatasetIOError, DomainError, FormatError, ValidationError
from src.common.utils import parse_number_list
from src.core.io import load_dataset, provenance_line, read_chronology, write_chronology, write_dataset, write_frame
from src.evaluation.experiment import ENGINE_METHODS, SOURCES, ExperimentPlan, run_experiment
from src.evaluation.metrics import aggregate_summary, load_records, summary_frame
from src.simulation.noise import NoiseSettings, noiseless_settings
from src.simulation.scenario import Scenario
from src.simulation.simulator import simulate_core

logger = logging.getLogger(__name__)

PROGRAM = "pb-chrono"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _build_settings(cls, options):
    """
    Builds a Settings object from {key: (flag, value)}; None values keep the default.

    A rejected value becomes a click.BadParameter naming its flag.
    """
    values = {key: value for key, (_, value) in options.items() if value is not None}
    for key, value in values.items():
        try:
            cls._validators[key](value)
        except ValueError as e:
            raise click.BadParameter(str(e), param_hint=options[key][0])
    try:
        return cls(values)
    except ValueError as e:
        flags = ", ".join(options[key][0] for key in values)
        raise click.BadParameter(str(e), param_hint=flags or None)


def _parse_list(flag, text, cast):
    try:
        return parse_number_list(text, cast)
    except ValueError:
        raise click.BadParameter(f"'{text}' is not a comma-separated list", param_hint=flag)


def _split_words(text):
    return [item.strip() for item in str(text).split(',') if item.strip()]


def _emit(text, out):
    if out == '-':
        click.echo(text, nl=False)
    else:
        logger.info("Wrote %s", out)


def _check_draws(ctx, param, value):
    if value is not None and value < 2:
        raise click.BadParameter("draws must be >= 2")
    return value


@click.group()
@click.option('-v', '--verbose', count=True, help="Log INFO messages (-vv for DEBUG) to stderr.")
@click.option('--progress', is_flag=True, help="Show progress bars on stderr.")
@click.pass_context
def main(ctx, verbose, progress):
    """Lead-210 chronologies: simulation, CRS and Bayesian dating, and their comparison."""
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(format=LOG_FORMAT, stream=sys.stderr)
    logging.getLogger().setLevel(level)
    ctx.ensure_object(dict)
    ctx.obj.setdefault('args', sys.argv[1:])
    ctx.obj['progress'] = progress


@main.command()
@click.option('--scenario', type=click.Choice(['1', '2', '3', 'custom']), default='1', show_default=True,
              help="Built-in scenario, or 'custom' for --coefficients.")
@click.option('--coefficients', default=None,
              help="Custom age polynomial, constant term first, yr/cm^k (e.g. '0,0.5,0.25').")
@click.option('--sin-amplitude', type=float, default=0.0, show_default=True,
              help="Amplitude of the custom sinusoid term, yr.")
@click.option('--sin-period', type=float, default=1.0, show_default=True,
              help="Custom sinusoid term is amplitude*sin(x/period); period in cm.")
@click.option('--phi', type=float, default=None, help="210Pb supply, Bq/(m2 yr). Overrides the scenario's.")
@click.option('--supported', type=float, default=None, help="Supported 210Pb, Bq/kg. Overrides the scenario's.")
@click.option('--table-values', is_flag=True, help="Use the supply and supported values as printed in the scenario table.")
@click.option('--thickness', type=float, default=1.0, show_default=True, help="Slab thickness, cm.")
@click.option('--max-depth', type=float, default=30.0, show_default=True, help="Bottom of the deepest slab, cm.")
@click.option('--scatter-var', type=float, default=None, help="Variance of the scatter around the true value, (Bq/kg)^2. [default: 10]")
@click.option('--p-out', type=float, default=None, help="Probability that a slab is an outlier. [default: 0.05]")
@click.option('--x-shift', type=float, default=None, help="Half-width of the outlier shift, Bq/kg. [default: 3*sqrt(scatter-var)]")
@click.option('--sigma-min', type=float, default=None, help="Smallest reported sd, Bq/kg. [default: 1]")
@click.option('--sd-factor', type=float, default=None, help="Reported sd as a fraction of the activity. [default: 0.045]")
@click.option('--nominal-sd-rule', is_flag=True, help="Report sd = epsilon*y-scat*activity instead of --sd-factor.")
@click.option('--epsilon', type=float, default=None, help="Relative error of the nominal sd rule. [default: 0.01]")
@click.option('--y-scat', type=float, default=None, help="Scatter multiplier of the nominal sd rule. [default: 1.5]")
@click.option('--measurement-noise/--no-measurement-noise', default=True, show_default=True,
              help="Draw the reported value around the scattered one.")
@click.option('--noiseless', is_flag=True, help="Disable scatter, outliers and measurement noise.")
@click.option('--seed', type=int, default=0, show_default=True, help="Seed of every random draw.")
@click.option('--out', default='-', show_default=True, help="Output dataset CSV ('-' for stdout).")
@click.pass_context
def simulate(ctx, scenario, coefficients, sin_amplitude, sin_period, phi, supported, table_values, thickness,
             max_depth, scatter_var, p_out, x_shift, sigma_min, sd_factor, nominal_sd_rule, epsilon, y_scat,
             measurement_noise, noiseless, seed, out):
    """Simulate a core from a known age-depth function."""
    if scenario == 'custom':
        if coefficients is None or phi is None or supported is None:
            raise click.UsageError("--scenario custom needs --coefficients, --phi and --supported")
        history = Scenario.custom(_parse_list('--coefficients', coefficients, float), sin_amplitude, sin_period,
                                  phi=phi, supported=supported)
    else:
        if coefficients is not None:
            raise click.UsageError("--coefficients only applies to --scenario custom")
        history = get_scenario(scenario, use_table_values=table_values).with_parameters(phi=phi, supported=supported)

    if noiseless:
        cfg = noiseless_settings(seed=seed)
    else:
        cfg = _build_settings(NoiseSettings, {
            'scatter_var': ('--scatter-var', scatter_var),
            'p_out': ('--p-out', p_out),
            'x_shift': ('--x-shift', x_shift),
            'sigma_min': ('--sigma-min', sigma_min),
            'reported_sd_factor': ('--sd-factor', sd_factor),
            'use_nominal_sd_rule': ('--nominal-sd-rule', nominal_sd_rule),
            'epsilon': ('--epsilon', epsilon),
            'y_scat': ('--y-scat', y_scat),
            'measurement_noise': ('--measurement-noise', measurement_noise),
            'seed': ('--seed', seed),
        })
    logger.info("Simulating %s", history)
    dataset = simulate_core(history, cfg, thickness=thickness, max_depth=max_depth)
    _emit(write_dataset(dataset, out, provenance_line(ctx.obj['args'])), out)


def _crs_settings(covariance, lambda_sd, supported_sd, keep_deepest, tail):
    return CrsSettings(use_covariance=covariance, include_lambda_sd=lambda_sd, include_supported_sd=supported_sd,
                       drop_deepest=not keep_deepest, interpolate_tail=tail)


@main.command()
@click.argument('input_path', metavar='INPUT')
@click.option('--variant', type=click.Choice(['ci', 'mc']), default='ci', show_default=True,
              help="'ci' for analytic CI-CRS intervals, 'mc' for Monte Carlo R-CRS.")
@click.option('--draws', type=int, default=10000, show_default=True, callback=_check_draws,
              help="Monte Carlo draws (--variant mc), at least 2.")
@click.option('--seed', type=int, default=0, show_default=True, help="Seed of the Monte Carlo draws.")
@click.option('--jobs', type=int, default=1, show_default=True, help="Worker processes for the draws (-1 for all cores).")
@click.option('--sd-scale', type=float, default=1.0, show_default=True,
              help="Multiplier of the reported sds in the draws; 0 disables the perturbation.")
@click.option('--covariance', is_flag=True, help="Propagate the covariance between the total and partial inventories.")
@click.option('--lambda-sd', is_flag=True, help="Add the uncertainty of the decay constant, 1/yr.")
@click.option('--supported-sd/--no-supported-sd', default=True, show_default=True,
              help="Propagate the sd of the supported level, Bq/kg.")
@click.option('--keep-deepest', is_flag=True, help="Date the deepest slab instead of using it as the equilibrium marker.")
@click.option('--tail/--no-tail', default=True, show_default=True,
              help="Interpolate the inventory below the deepest datable slab linearly to zero.")
@click.option('--out', default='-', show_default=True, help="Output chronology CSV ('-' for stdout); ages in yr, depths in cm.")
@click.pass_context
def crs(ctx, input_path, variant, draws, seed, jobs, sd_scale, covariance, lambda_sd, supported_sd, keep_deepest, tail,
        out):
    """Date a core with the CRS model."""
    settings = _crs_settings(covariance, lambda_sd, supported_sd, keep_deepest, tail)
    dataset = load_dataset(input_path)
    if variant == 'ci':
        chronology = ci_crs_chronology(dataset, settings)
    else:
        if sd_scale < 0:
            raise click.BadParameter("must be >= 0", param_hint='--sd-scale')
        chronology = r_crs_chronology(dataset, draws, seed=seed, settings=settings, sd_scale=sd_scale, jobs=jobs,
                                      show_progress=ctx.obj['progress'])
    logger.info("%s: %d of %d depths dated", chronology.method, len(chronology.dated), len(chronology))
    _emit(write_chronology(chronology, out, provenance_line(ctx.obj['args'])), out)


@main.command()
@click.argument('input_path', metavar='INPUT')
@click.option('--acc-shape', type=float, default=None, help="Shape of the gamma prior on accumulation rates. [default: 1.5]")
@click.option('--acc-mean', type=float, default=None, help="Mean accumulation rate, yr/cm. [default: 10]")
@click.option('--mem-mean', type=float, default=None, help="Prior mean of the memory, in (0, 1). [default: 0.5]")
@click.option('--mem-strength', type=float, default=None, help="Strength of the beta prior on the memory. [default: 10]")
@click.option('--phi-shape', type=float, default=None, help="Shape of the gamma prior on the supply. [default: 2]")
@click.option('--phi-mean', type=float, default=None, help="Prior mean supply, Bq/(m2 yr). [default: 50]")
@click.option('--s-shape', type=float, default=None, help="Shape of the gamma prior on the supported level. [default: 2]")
@click.option('--s-mean', type=float, default=None, help="Prior mean supported level, Bq/kg. [default: 226Ra mean]")
@click.option('--iterations', type=int, default=None, help="Iterations per chain, burn-in included. [default: 100000]")
@click.option('--burn-in', type=int, default=None, help="Iterations discarded per chain. [default: 20000]")
@click.option('--thinning', type=int, default=None, help="Keep one iteration in this many. [default: 40]")
@click.option('--chains', type=int, default=None, help="Independent chains. [default: 1]")
@click.option('--jobs', type=int, default=None, help="Worker processes running the chains. [default: 1]")
@click.option('--ess-floor', type=float, default=None, help="Warn when an effective sample size falls below. [default: 100]")
@click.option('--seed', type=int, default=0, show_default=True, help="Seed of the chains.")
@click.option('--section-width', type=float, default=1.0, show_default=True, help="Width of the constant-rate sections, cm.")
@click.option('--depths', default=None, help="Comma-separated depths to date, cm. [default: every section boundary]")
@click.option('--out', default='-', show_default=True, help="Output chronology CSV ('-' for stdout); ages in yr.")
@click.option('--draws-out', default=None, help="Also write every retained draw to this CSV.")
@click.pass_context
def plum(ctx, input_path, acc_shape, acc_mean, mem_mean, mem_strength, phi_shape, phi_mean, s_shape, s_mean,
         iterations, burn_in, thinning, chains, jobs, ess_floor, seed, section_width, depths, out, draws_out):
    """Date a core with the Bayesian model."""
    priors = _build_settings(PlumPriors, {
        'acc_shape': ('--acc-shape', acc_shape),
        'acc_mean': ('--acc-mean', acc_mean),
        'mem_mean': ('--mem-mean', mem_mean),
        'mem_strength': ('--mem-strength', mem_strength),
        'phi_shape': ('--phi-shape', phi_shape),
        'phi_mean': ('--phi-mean', phi_mean),
        's_shape': ('--s-shape', s_shape),
        's_mean': ('--s-mean', s_mean),
    })
    mcmc = _build_settings(McmcSettings, {
        'iterations': ('--iterations', iterations),
        'burn_in': ('--burn-in', burn_in),
        'thinning': ('--thinning', thinning),
        'chains': ('--chains', chains),
        'jobs': ('--jobs', jobs),
        'ess_floor': ('--ess-floor', ess_floor),
        'seed': ('--seed', seed),
        'show_progress': ('--progress', ctx.obj['progress']),
    })
    if not section_width > 0:
        raise click.BadParameter("must be > 0", param_hint='--section-width')
    depth_list = _parse_list('--depths', depths, float) if depths is not None else None

    dataset = load_dataset(input_path)
    draws = sample_posterior(dataset, priors, mcmc, section_width=section_width)
    chronology = summarize_chronology(draws, depth_list)
    provenance = provenance_line(ctx.obj['args'])
    if draws_out is not None:
        write_frame(draws.to_frame(), draws_out, provenance)
        logger.info("Wrote %d draws to %s", len(draws), draws_out)
    _emit(write_chronology(chronology, out, provenance), out)


@main.command()
@click.option('--replicates', type=int, default=100, show_default=True, help="Subsamples per percentage (100% gets one).")
@click.option('--percents', default=None, help="Comma-separated information percentages from 10,15,...,95,100. [default: all]")
@click.option('--scenarios', default='1,2,3', show_default=True, help="Comma-separated built-in scenarios.")
@click.option('--engines', default='ci-crs,plum', show_default=True,
              help=f"Comma-separated engines among {', '.join(ENGINE_METHODS)}.")
@click.option('--seed', type=int, default=0, show_default=True, help="Master seed of every subsample and engine.")
@click.option('--jobs', type=int, default=1, show_default=True, help="Worker processes over the jobs (-1 for all cores).")
@click.option('--source', type=click.Choice(SOURCES), default='supplementary', show_default=True,
              help="Date the published datasets or one new simulated core per scenario.")
@click.option('--iterations', type=int, default=None, help="MCMC iterations per run, burn-in included. [default: 100000]")
@click.option('--burn-in', type=int, default=None, help="MCMC burn-in per run. [default: 20000]")
@click.option('--thinning', type=int, default=None, help="MCMC thinning. [default: 40]")
@click.option('--r-crs-draws', type=int, default=1000, show_default=True, help="Monte Carlo draws per R-CRS run.")
@click.option('--out-records', default='records.csv', show_default=True, help="Long-format records CSV, ages in yr.")
@click.option('--out-summary', default='summary.csv', show_default=True, help="Summary CSV.")
@click.option('--out-runs', default=None, help="Also write the outcome of every attempted run to this CSV.")
@click.pass_context
def experiment(ctx, replicates, percents, scenarios, engines, seed, jobs, source, iterations, burn_in, thinning,
               r_crs_draws, out_records, out_summary, out_runs):
    """Run the subsampling comparison of the dating engines."""
    mcmc = _build_settings(McmcSettings, {
        'iterations': ('--iterations', iterations),
        'burn_in': ('--burn-in', burn_in),
        'thinning': ('--thinning', thinning),
    })
    options = {
        'replicates': ('--replicates', replicates),
        'percents': ('--percents', _parse_list('--percents', percents, int) if percents is not None else None),
        'scenarios': ('--scenarios', _split_words(scenarios)),
        'engines': ('--engines', _split_words(engines)),
        'seed': ('--seed', seed),
        'jobs': ('--jobs', jobs),
        'source': ('--source', source),
        'mcmc': ('--iterations', mcmc),
        'r_crs_draws': ('--r-crs-draws', r_crs_draws),
        'show_progress': ('--progress', ctx.obj['progress']),
    }
    plan = _build_settings(ExperimentPlan, options)

    result = run_experiment(plan)
    provenance = provenance_line(ctx.obj['args'])
    write_frame(result.records_frame(), out_records, provenance)
    if out_runs is not None:
        write_frame(result.runs_frame(), out_runs, provenance)
    counts = result.counts()
    for row in counts.itertuples(index=False):
        click.echo(f"{row.method}: {row.completed} of {row.attempted} runs completed "
                   f"({row.skipped} skipped, {row.failed} failed, {row.warned} with low ESS)", err=True)
    if not len(result):
        raise click.ClickException("no run completed, no summary written")
    write_frame(summary_frame(aggregate_summary(result.records), counts), out_summary, provenance)
    logger.info("Wrote %s and %s", out_records, out_summary)


@main.command('plot-data')
@click.option('--kind', type=click.Choice(PLOT_KINDS), required=True,
              help="agedepth (from a chronology CSV), accpre or depth-normalized (from a records CSV).")
@click.argument('input_path', metavar='INPUT')
@click.option('--scenario', type=click.Choice(['1', '2', '3']), default=None,
              help="Scenario whose true ages fill the agedepth truth column, yr.")
@click.option('--out', default='-', show_default=True, help="Output CSV ('-' for stdout).")
@click.pass_context
def plot_data(ctx, kind, input_path, scenario, out):
    """Emit a tidy, plot-ready table."""
    source = read_chronology(input_path) if kind == 'agedepth' else load_records(input_path)
    frame = emit_plot_data(source, kind, get_scenario(scenario) if scenario else None)
    _emit(write_frame(frame, out, provenance_line(ctx.obj['args'])), out)


def dispatch(args=None):
    """
    Runs the command line and returns its exit code instead of exiting.

    Args:
        args (list of str, optional): Tokens after the program name, defaults to sys.argv[1:].

    Returns:
        int: 0 on success, 1 on invalid input, 2 on any other failure.
    """
    args = list(sys.argv[1:] if args is None else args)
    try:
        code = main.main(args=args, prog_name=PROGRAM, standalone_mode=False, obj={'args': args})
    except click.ClickException as e:
        e.show()
        return 1
    except click.Abort:
        click.echo("Aborted!", err=True)
        return 1
    except (ValidationError, FormatError, DomainError, DatasetIOError) as e:
        click.echo(f"Error: {e}", err=True)
        return 1
    except ChronologyError as e:
        logger.debug("Run failed", exc_info=True)
        click.echo(f"Error: {e}", err=True)
        return 2
    except Exception as e:
        logger.debug("Run failed", exc_info=True)
        click.echo(f"Error: {type(e).__name__}: {e}", err=True)
        return 2
    return code if isinstance(code, int) else 0


def run():
    sys.exit(dispatch())
