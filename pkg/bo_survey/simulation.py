"""
Monte Carlo comparison of sampling designs.

Each repeat draws one prior sample by SRS, then every design in the
configuration samples from the same remaining frame, refits the response
surrogate on prior plus sample and is scored against the ground truth.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from functools import partial
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from . import __version__, gp
from .acquisition import estimate_objective_records, fit_objective_surrogate, score_population
from .config import config_hash
from .design import draw, minmax_design, srs_design
from .estimators import difference_total
from .exceptions import ConfigurationError
from .metrics import (
    MwuAlternative,
    build_histogram,
    default_bin_edges,
    five_number,
    kl_divergence,
    mann_whitney_u,
    mean_abs_diff,
)
from .models import (
    METRIC_NAMES,
    AcquisitionKind,
    AcquisitionTag,
    FiveNumberSummary,
    GpPosterior,
    MetricRecord,
    ObjectiveSurrogate,
    PopulationFrame,
    Provenance,
    SamplingDesign,
    SimulationConfig,
    SimulationReport,
)
from .population import generate_synthetic_population, load_population_csv

logger = logging.getLogger(__name__)

BASELINE = "SRS"
DEGRADED_FAILURE_RATE = 0.01

PHASE_PRIOR = 0
PHASE_OBJECTIVE = 1
PHASE_SAMPLE = 2

ACQUISITION_TAGS = {
    "BO-PU": AcquisitionTag.PU,
    "BO-ILCB": AcquisitionTag.ILCB,
    "BO-EI": AcquisitionTag.EI,
    "BO-SEI": AcquisitionTag.SEI,
}


def derive_seed(master_seed: int, repeat_index: int, design_index: int, phase: int) -> np.random.SeedSequence:
    """Independent random stream for one (repeat, design, phase) cell."""
    return np.random.SeedSequence(master_seed, spawn_key=(repeat_index, design_index, phase))


def design_labels(designs: List[str]) -> List[str]:
    """Unique labels for the configured designs; repeated names get a -2, -3, ... suffix."""
    seen: Dict[str, int] = {}
    labels = []
    for name in designs:
        seen[name] = seen.get(name, 0) + 1
        labels.append(name if seen[name] == 1 else f"{name}-{seen[name]}")
    return labels


def load_population(config: SimulationConfig) -> PopulationFrame:
    """Load or generate the population described by the configuration."""
    if config.population_csv is not None:
        population = load_population_csv(config.population_csv, config.response_column)
    else:
        population = generate_synthetic_population(config.synthetic)
    required = config.prior_size + config.sample_size
    if required >= population.size:
        raise ConfigurationError(
            f"prior_size + sample_size ({required}) must be smaller than "
            f"the population size ({population.size})"
        )
    return population


def _build_design(
    name: str,
    frame: PopulationFrame,
    response_gp: GpPosterior,
    objective: Optional[ObjectiveSurrogate],
    config: SimulationConfig,
) -> SamplingDesign:
    if name == BASELINE:
        return srs_design(frame.size, config.sample_size, config.srs_pi_convention)
    kind = AcquisitionKind(tag=ACQUISITION_TAGS[name], lam=config.ilcb_lambda)
    scores = score_population(kind, frame.features, response_gp, objective)
    return minmax_design(scores, epsilon=config.epsilon, scheme=config.scheme, n=config.sample_size)


def _fit(population: PopulationFrame, indices: np.ndarray, config: SimulationConfig) -> GpPosterior:
    data = population.subset(indices).to_dataset()
    return gp.fit(data, gp.default_kernel(data, config.kernel))


def run_repeat(population: PopulationFrame, config: SimulationConfig, repeat_index: int) -> List[MetricRecord]:
    """Run every configured design once on a shared prior sample and frame."""
    N = population.size
    master = config.master_seed

    prior_draw = draw(srs_design(N, config.prior_size), derive_seed(master, repeat_index, 0, PHASE_PRIOR))
    prior_idx = prior_draw.indices
    frame_idx = np.setdiff1d(np.arange(N), prior_idx)
    frame = population.subset(frame_idx)

    response_gp = _fit(population, prior_idx, config)
    objective = None
    names = list(config.designs)
    if any(name in ACQUISITION_TAGS and name != "BO-PU" for name in names):
        prior_data = population.subset(prior_idx).to_dataset()
        records = estimate_objective_records(
            prior_data,
            config.kernel,
            rounds=config.objective_rounds,
            rng_seed=derive_seed(master, repeat_index, 0, PHASE_OBJECTIVE),
            holdout_fraction=config.holdout_fraction,
        )
        objective = fit_objective_surrogate(records, config.kernel)

    truth = population.responses
    edges = default_bin_edges(truth, config.histogram_bins)
    truth_histogram = build_histogram(truth, edges)
    true_total = float(truth.sum())
    prior_total = float(truth[prior_idx].sum())

    results = []
    for design_index, (name, label) in enumerate(zip(names, design_labels(names))):
        design = _build_design(name, frame, response_gp, objective, config)
        sample = draw(design, derive_seed(master, repeat_index, design_index, PHASE_SAMPLE))
        posterior_idx = np.concatenate([prior_idx, frame_idx[sample.indices]])

        means, _ = gp.predict_batch(_fit(population, posterior_idx, config), population.features)
        estimated = means.copy()
        estimated[posterior_idx] = truth[posterior_idx]

        predicted_frame = frame.with_predictions(means[frame_idx])
        total = prior_total + difference_total(sample, predicted_frame).value
        total_normalized = prior_total + difference_total(sample, predicted_frame, normalize_pi=True).value

        results.append(MetricRecord(
            design_name=label,
            repeat_index=repeat_index,
            mean_abs_diff=mean_abs_diff(truth, estimated),
            kl_divergence=kl_divergence(
                truth_histogram, build_histogram(estimated, edges, smoothing=config.kl_smoothing)
            ),
            total_abs_diff=abs(true_total - total),
            total_abs_diff_normalized_pi=abs(true_total - total_normalized),
        ))

    logger.debug(f"Repeat {repeat_index} finished with {len(results)} designs")
    return results


def _guarded_repeat(
    population: PopulationFrame,
    config: SimulationConfig,
    repeat_index: int,
) -> Tuple[int, Optional[List[MetricRecord]]]:
    try:
        return repeat_index, run_repeat(population, config, repeat_index)
    except (np.linalg.LinAlgError, ArithmeticError) as e:
        # factorization and variance failures; contract errors propagate
        logger.warning(f"Repeat {repeat_index} failed and is excluded: {e}")
        return repeat_index, None


def records_frame(records: List[MetricRecord]) -> pd.DataFrame:
    """One row per (design, repeat) with the four metrics."""
    columns = ["design_name", "repeat_index", *METRIC_NAMES]
    return pd.DataFrame([record.model_dump() for record in records], columns=columns)


def summarize(records: List[MetricRecord]) -> Dict[str, Dict[str, FiveNumberSummary]]:
    """Five-number summaries per design and metric, designs in first-seen order."""
    table = records_frame(records)
    summaries = {}
    for design in table["design_name"].unique():
        rows = table[table["design_name"] == design]
        summaries[str(design)] = {metric: five_number(rows[metric].to_numpy()) for metric in METRIC_NAMES}
    return summaries


def compare_to_baseline(records: List[MetricRecord], baseline: str = BASELINE) -> Dict[str, Dict[str, float]]:
    """One-sided Mann-Whitney p-values of every other design against the baseline, per metric."""
    table = records_frame(records)
    reference = table[table["design_name"] == baseline]
    if reference.empty:
        return {}
    p_values = {}
    for design in table["design_name"].unique():
        if design == baseline:
            continue
        rows = table[table["design_name"] == design]
        p_values[str(design)] = {
            metric: mann_whitney_u(
                rows[metric].to_numpy(), reference[metric].to_numpy(), MwuAlternative.LESS
            ).p_value
            for metric in METRIC_NAMES
        }
    return p_values


def run_simulation(config: SimulationConfig, population: Optional[PopulationFrame] = None) -> SimulationReport:
    """
    Run all repeats of a simulation and aggregate the results.

    Repeats run concurrently on a thread pool; results are merged in repeat
    order, so the report does not depend on the thread count.
    """
    if population is None:
        population = load_population(config)
    elif config.prior_size + config.sample_size >= population.size:
        raise ConfigurationError(
            f"prior_size + sample_size ({config.prior_size + config.sample_size}) must be smaller than "
            f"the population size ({population.size})"
        )

    threads = config.threads or os.cpu_count() or 1
    logger.info(
        f"Running {config.repeats} repeats of {', '.join(config.designs)} "
        f"on {population.size} units with {threads} threads"
    )

    with ThreadPoolExecutor(max_workers=threads) as executor:
        outcomes = list(executor.map(partial(_guarded_repeat, population, config), range(config.repeats)))

    records: List[MetricRecord] = []
    failed: List[int] = []
    for repeat_index, repeat_records in outcomes:
        if repeat_records is None:
            failed.append(repeat_index)
        else:
            records.extend(repeat_records)

    degraded = len(failed) > DEGRADED_FAILURE_RATE * config.repeats
    if degraded:
        logger.warning(f"{len(failed)} of {config.repeats} repeats failed; run is degraded")

    summaries = summarize(records) if records else {}
    p_values = compare_to_baseline(records) if records else {}

    provenance = Provenance(
        config_hash=config_hash(config),
        master_seed=config.master_seed,
        version=__version__,
        created_at=datetime.now(timezone.utc).isoformat(),
        config=config.model_dump(mode="json"),
    )
    logger.info(f"Simulation finished: {len(records)} records, {len(failed)} failed repeats")
    return SimulationReport(
        records=records,
        summaries=summaries,
        mwu=p_values,
        provenance=provenance,
        failed_repeats=failed,
        degraded=degraded,
    )
