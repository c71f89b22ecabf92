"""
Command-line interface for the BO Survey package.
"""

import json
import logging
import math
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, Optional

import click
import numpy as np
import pandas as pd
from dotenv import load_dotenv
from pydantic import ValidationError

from . import __version__, gp
from .acquisition import estimate_objective_records, fit_objective_surrogate, score_population
from .config import load_config, output_dir_default
from .design import design_table, minmax_design
from .estimators import (
    de_variance,
    de_variance_estimate,
    difference_total,
    ht_total,
    ht_variance,
    ht_variance_estimate,
)
from .exceptions import (
    BoSurveyError,
    ConfigurationError,
    ContractViolation,
    DataFormatError,
    UnsupportedDesignError,
)
from .metrics import MwuAlternative, mann_whitney_u
from .models import (
    AcquisitionKind,
    AcquisitionTag,
    Dataset,
    KernelSettings,
    PiConvention,
    PopulationFrame,
    SampleDraw,
    SamplingDesign,
    SamplingScheme,
    SyntheticSpec,
    TotalEstimate,
)
from .population import (
    generate_synthetic_population,
    load_feature_table,
    read_numeric_csv,
    save_population_csv,
    split_columns,
)
from .report_generator import write_report
from .simulation import run_simulation

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)


class InputError(click.ClickException):
    """Invalid input or configuration."""
    exit_code = 2


class DegradedRunError(click.ClickException):
    """Too many simulation repeats failed."""
    exit_code = 3


class OutputError(click.ClickException):
    """A file could not be read or written."""
    exit_code = 4


@contextmanager
def translate_errors() -> Iterator[None]:
    """Map package exceptions to CLI exit codes."""
    try:
        yield
    except click.ClickException:
        raise
    except ValidationError as e:
        raise InputError(f"Invalid input: {e}")
    except (ConfigurationError, ContractViolation, DataFormatError, UnsupportedDesignError) as e:
        raise InputError(str(e))
    except OSError as e:
        raise OutputError(str(e))
    except BoSurveyError as e:
        raise click.ClickException(str(e))


def emit_table(table: pd.DataFrame, out: Optional[str]) -> None:
    """Write a table as CSV to a file, or to stdout when no file is given."""
    if out:
        output = Path(out)
        output.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(output, index=False, float_format="%.17g", lineterminator="\n")
        click.echo(f"Wrote {len(table)} rows to {output}", err=True)
    else:
        click.echo(table.to_csv(index=False, float_format="%.17g", lineterminator="\n"), nl=False)


def read_values(path: str) -> np.ndarray:
    """Read a single-column numeric file; a non-numeric first line is taken as a header."""
    try:
        raw = pd.read_csv(path, header=None, dtype=str, skip_blank_lines=True, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise DataFormatError(f"{Path(path).name} contains no values")
    except UnicodeDecodeError as e:
        raise DataFormatError(f"{Path(path).name} is not valid UTF-8 text: {e.reason} at byte {e.start}")
    if raw.shape[1] != 1:
        raise DataFormatError(f"{Path(path).name} must contain a single column")
    cells = raw[0].str.strip()
    values = pd.to_numeric(cells, errors="coerce")
    if len(values) and math.isnan(values.iloc[0]):
        cells, values = cells.iloc[1:], values.iloc[1:]
    invalid = values.isna().to_numpy()
    if invalid.any():
        row = int(np.flatnonzero(invalid)[0])
        raise DataFormatError(f"Non-numeric value '{cells.iloc[row]}' in {Path(path).name}", row=row + 1)
    if values.empty:
        raise DataFormatError(f"{Path(path).name} contains no values")
    return values.to_numpy(dtype=float)


def kernel_settings(length_scale: Optional[float], noise_variance: Optional[float]) -> KernelSettings:
    return KernelSettings(length_scale=length_scale, noise_variance=noise_variance)


@click.group()
@click.version_option(__version__, prog_name="bo-survey")
@click.option('--verbose', '-v', is_flag=True, help='Enable debug logging on stderr')
def cli(verbose: bool):
    """BO Survey - Bayesian optimization driven survey sampling designs."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )


@cli.command()
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), help='Flat KEY=VALUE config file')
@click.option('--population-csv', help='Population CSV (replaces a synthetic population)')
@click.option('--response-column', help='Response column of the population CSV')
@click.option('--prior-size', type=int, help='Size of the prior SRS sample')
@click.option('--sample-size', type=int, help='Size of each design sample')
@click.option('--repeats', type=int, help='Number of Monte Carlo repeats')
@click.option('--designs', help='Comma separated designs: srs, bo-pu, bo-ilcb, bo-ei, bo-sei')
@click.option('--epsilon', type=float, help='Smallest and largest inclusion probability offset')
@click.option('--scheme', type=click.Choice(['poisson', 'fixed_size_weighted']), help='Sampling scheme of BO designs')
@click.option('--seed', type=int, help='Master seed')
@click.option('--threads', type=int, help='Worker threads (default: available cores)')
@click.option('--output-dir', '-o', type=click.Path(file_okay=False), help='Directory for result files')
@click.option('--pdf', is_flag=True, help='Also write a PDF summary')
def simulate(config_path: Optional[str], population_csv: Optional[str], response_column: Optional[str],
             prior_size: Optional[int], sample_size: Optional[int], repeats: Optional[int],
             designs: Optional[str], epsilon: Optional[float], scheme: Optional[str], seed: Optional[int],
             threads: Optional[int], output_dir: Optional[str], pdf: bool) -> None:
    """Compare sampling designs in a Monte Carlo simulation."""
    overrides: Dict[str, Any] = {
        'population_csv': population_csv,
        'response_column': response_column,
        'prior_size': prior_size,
        'sample_size': sample_size,
        'repeats': repeats,
        'designs': designs,
        'epsilon': epsilon,
        'scheme': scheme,
        'master_seed': seed,
        'threads': threads,
    }
    with translate_errors():
        config = load_config(config_path, {key: value for key, value in overrides.items() if value is not None})
        report = run_simulation(config)
        target = Path(output_dir) if output_dir else output_dir_default()
        paths = write_report(report, target, pdf=pdf)

    for path in paths:
        click.echo(f"Wrote {path}")
    if report.degraded:
        raise DegradedRunError(
            f"{len(report.failed_repeats)} of {config.repeats} repeats failed; results are degraded"
        )


@cli.command()
@click.argument('population_csv', type=click.Path(dir_okay=False))
@click.argument('prior_csv', type=click.Path(dir_okay=False))
@click.option('--acquisition', type=click.Choice(['pu', 'ilcb', 'ei', 'sei']), default='pu', show_default=True)
@click.option('--epsilon', type=float, default=1e-3, show_default=True)
@click.option('--scheme', type=click.Choice(['poisson', 'fixed_size_weighted']), default='fixed_size_weighted',
              show_default=True)
@click.option('--sample-size', type=int, help='Nominal sample size recorded with the design')
@click.option('--response-column', default='y', show_default=True, help='Response column of the prior CSV')
@click.option('--lambda', 'lam', type=float, default=0.2, show_default=True, help='ILCB exploration weight')
@click.option('--rounds', type=int, default=10, show_default=True, help='Objective estimation rounds')
@click.option('--length-scale', type=float, help='Kernel length scale (default: median heuristic)')
@click.option('--noise-variance', type=float, help='Noise variance (default: 0.1 var(y))')
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--out', '-o', help='Output CSV (default: stdout)')
def design(population_csv: str, prior_csv: str, acquisition: str, epsilon: float, scheme: str,
           sample_size: Optional[int], response_column: str, lam: float, rounds: int,
           length_scale: Optional[float], noise_variance: Optional[float], seed: int, out: Optional[str]) -> None:
    """Build a min-max sampling design for a population from prior data."""
    with translate_errors():
        features, feature_names = load_feature_table(population_csv, response_column)
        prior_table = read_numeric_csv(prior_csv)
        prior_features, prior_responses, prior_names = split_columns(prior_table, response_column)
        if prior_names != feature_names:
            raise DataFormatError(
                f"Feature columns differ between population {feature_names} and prior {prior_names}"
            )

        prior = Dataset(features=prior_features, responses=prior_responses, feature_names=prior_names)
        settings = kernel_settings(length_scale, noise_variance)
        response_gp = gp.fit(prior, gp.default_kernel(prior, settings))

        kind = AcquisitionKind(tag=AcquisitionTag(acquisition.upper()), lam=lam)
        objective = None
        if kind.needs_objective:
            records = estimate_objective_records(prior, settings, rounds=rounds, rng_seed=seed)
            objective = fit_objective_surrogate(records, settings)

        scores = score_population(kind, features, response_gp, objective)
        sampling_design = minmax_design(scores, epsilon=epsilon, scheme=SamplingScheme(scheme), n=sample_size)
        emit_table(design_table(sampling_design), out)


@cli.command()
@click.argument('train_csv', type=click.Path(dir_okay=False))
@click.argument('query_csv', type=click.Path(dir_okay=False))
@click.option('--response-column', default='y', show_default=True)
@click.option('--length-scale', type=float, help='Kernel length scale (default: median heuristic)')
@click.option('--noise-variance', type=float, help='Noise variance (default: 0.1 var(y))')
@click.option('--out', '-o', help='Output CSV (default: stdout)')
def fit(train_csv: str, query_csv: str, response_column: str, length_scale: Optional[float],
        noise_variance: Optional[float], out: Optional[str]) -> None:
    """Fit the GP surrogate and predict mean and standard deviation at query points."""
    with translate_errors():
        train_features, train_responses, names = split_columns(read_numeric_csv(train_csv), response_column)
        queries, query_names = load_feature_table(query_csv, response_column)
        if query_names != names:
            raise DataFormatError(f"Feature columns differ between training {names} and queries {query_names}")

        data = Dataset(features=train_features, responses=train_responses, feature_names=names)
        cfg = gp.default_kernel(data, kernel_settings(length_scale, noise_variance))
        logger.info(f"Kernel: length_scale={cfg.length_scale:.6g}, noise_variance={cfg.noise_variance:.6g}")
        means, std_devs = gp.predict_batch(gp.fit(data, cfg), queries)
        emit_table(pd.DataFrame({'mean': means, 'std_dev': std_devs}), out)


def _srs_convention(pi: np.ndarray, n: int) -> PiConvention:
    N = pi.size
    if math.isclose(pi[0], n / N, rel_tol=1e-9):
        return PiConvention.CLASSICAL
    if math.isclose(pi[0], 1.0 / N, rel_tol=1e-9):
        return PiConvention.ONE_OVER_N
    raise ContractViolation(f"SRS inclusion probabilities must equal n/N or 1/N, got {pi[0]:.6g}")


@cli.command()
@click.argument('frame_csv', type=click.Path(dir_okay=False))
@click.option('--estimator', type=click.Choice(['de', 'ht']), default='de', show_default=True)
@click.option('--scheme', type=click.Choice(['poisson', 'fixed_size_weighted', 'srs']), default='poisson',
              show_default=True)
@click.option('--sample-size', type=int, help='Nominal sample size (default: number of sampled rows)')
@click.option('--normalize-pi', is_flag=True, help='Rescale inclusion probabilities to sum to one')
@click.option('--response-column', default='y', show_default=True, help='Blank for unsampled units is allowed')
@click.option('--prediction-column', default='yhat', show_default=True)
@click.option('--pi-column', default='pi', show_default=True)
@click.option('--sample-column', default='sampled', show_default=True, help='1 for sampled units, 0 otherwise')
def estimate(frame_csv: str, estimator: str, scheme: str, sample_size: Optional[int], normalize_pi: bool,
             response_column: str, prediction_column: str, pi_column: str, sample_column: str) -> None:
    """Estimate a population total from a sample and print it as JSON."""
    with translate_errors():
        table = read_numeric_csv(frame_csv, optional_columns=(response_column,))
        required = [response_column, pi_column, sample_column]
        if estimator == 'de':
            required.append(prediction_column)
        missing = [column for column in required if column not in table.columns]
        if missing:
            raise DataFormatError(f"Missing columns: {', '.join(missing)}")

        responses = table[response_column].to_numpy(dtype=float)
        pi = table[pi_column].to_numpy(dtype=float)
        indices = np.flatnonzero(table[sample_column].to_numpy() != 0)
        if np.any(np.isnan(responses[indices])):
            raise DataFormatError("Sampled units need a response value", column=response_column)

        sampling_scheme = SamplingScheme(scheme)
        n = sample_size
        if n is None and sampling_scheme != SamplingScheme.POISSON:
            n = int(indices.size)
        sampling_design = SamplingDesign(
            pi=pi,
            scheme=sampling_scheme,
            nominal_sample_size=n,
            pi_convention=_srs_convention(pi, n) if sampling_scheme == SamplingScheme.SRS else None,
        )
        sample = SampleDraw(indices=indices, pi_used=pi)
        frame = PopulationFrame(
            features=pi.reshape(-1, 1),
            responses=responses,
            predictions=table[prediction_column].to_numpy(dtype=float) if estimator == 'de' else None,
        )
        complete = not np.any(np.isnan(responses))

        if estimator == 'de':
            result = difference_total(sample, frame, normalize_pi=normalize_pi)
            variance_estimate, variance = de_variance_estimate, de_variance
        else:
            result = ht_total(sample, responses[indices])
            variance_estimate, variance = ht_variance_estimate, ht_variance

        if not normalize_pi:
            try:
                update: Dict[str, Any] = {
                    'variance_estimate': variance_estimate(sample, frame, sampling_design),
                    'variance_approximate': sampling_scheme == SamplingScheme.FIXED_SIZE_WEIGHTED,
                }
                if complete:
                    update['variance'] = variance(frame, sampling_design)
                result = result.model_copy(update=update)
            except UnsupportedDesignError as e:
                click.echo(f"Variance not reported: {e}", err=True)

        click.echo(json.dumps(_estimate_payload(result), indent=2))


def _estimate_payload(result: TotalEstimate) -> Dict[str, Any]:
    payload = result.model_dump(mode='json')
    payload['variance_estimate_negative'] = result.variance_estimate_negative
    return payload


@cli.command()
@click.argument('file_a', type=click.Path(dir_okay=False))
@click.argument('file_b', type=click.Path(dir_okay=False))
@click.option('--alternative', type=click.Choice(['less', 'greater']), default='less', show_default=True,
              help='less: values of FILE_A are stochastically smaller')
@click.option('--method', type=click.Choice(['auto', 'exact', 'asymptotic']), default='auto', show_default=True)
def mwu(file_a: str, file_b: str, alternative: str, method: str) -> None:
    """One-sided Mann-Whitney U test of FILE_A against FILE_B."""
    with translate_errors():
        result = mann_whitney_u(read_values(file_a), read_values(file_b), MwuAlternative(alternative), method)
    click.echo(f"U = {result.u_statistic:.15g}")
    click.echo(f"p = {result.p_value:.15g}")
    click.echo(f"method = {result.method}")


@cli.command()
@click.option('--size', 'population_size', type=int, default=1920, show_default=True)
@click.option('--dim', 'feature_dim', type=int, default=16, show_default=True)
@click.option('--length-scale', type=float, default=1.0, show_default=True)
@click.option('--signal-variance', type=float, default=1.0, show_default=True)
@click.option('--noise-variance', type=float, default=0.25, show_default=True)
@click.option('--mode', type=click.Choice(['dense', 'fourier']), default='dense', show_default=True)
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--response-column', default='y', show_default=True)
@click.option('--out', '-o', required=True, help='Output CSV path')
def synth(population_size: int, feature_dim: int, length_scale: float, signal_variance: float,
          noise_variance: float, mode: str, seed: int, response_column: str, out: str) -> None:
    """Generate a synthetic GP population and write it as CSV."""
    with translate_errors():
        spec = SyntheticSpec(
            population_size=population_size,
            feature_dim=feature_dim,
            length_scale=length_scale,
            signal_variance=signal_variance,
            noise_variance=noise_variance,
            mode=mode,
            seed=seed,
        )
        path = save_population_csv(generate_synthetic_population(spec), out, response_column)
    click.echo(f"Wrote {spec.population_size} units to {path}")


if __name__ == '__main__':
    cli()
