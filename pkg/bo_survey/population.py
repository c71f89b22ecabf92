"""
Population data: numeric CSV ingestion and GP-generated synthetic populations.
"""

import logging
import math
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .exceptions import ContractViolation, DataFormatError
from .gp import cross_kernel, stable_cholesky
from .models import PopulationFrame, SyntheticSpec

logger = logging.getLogger(__name__)

MIN_POPULATION_ROWS = 3
DENSE_LIMIT = 10_000
COVARIANCE_CHUNK = 2000
DENSE_JITTER = 1e-8


def read_numeric_csv(path: Union[str, Path], optional_columns: Tuple[str, ...] = ()) -> pd.DataFrame:
    """
    Read a CSV file whose cells must all be numeric.

    Args:
        path: Path to a CSV file with a header row
        optional_columns: Columns whose blank cells are read as NaN

    Returns:
        pd.DataFrame: Float-valued table in file order

    Raises:
        FileNotFoundError: If the file does not exist
        DataFormatError: If the file is empty or a cell is blank or non-numeric
    """
    file_path = Path(path)
    if not file_path.exists():
        raise FileNotFoundError(f"File not found: {file_path}")

    try:
        raw = pd.read_csv(file_path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise DataFormatError(f"{file_path} is empty")
    except pd.errors.ParserError as e:
        raise DataFormatError(f"Failed to parse {file_path}: {e}")
    except UnicodeDecodeError as e:
        raise DataFormatError(f"{file_path.name} is not valid UTF-8 text: {e.reason} at byte {e.start}")

    table = {}
    for column in raw.columns:
        values = pd.to_numeric(raw[column].str.strip(), errors="coerce")
        invalid = values.isna() | ~np.isfinite(values.to_numpy(dtype=float))
        if column in optional_columns:
            invalid &= raw[column].str.strip() != ""
        if invalid.any():
            # data rows are numbered from 1, below the header
            row = int(np.flatnonzero(invalid.to_numpy())[0]) + 1
            raise DataFormatError(
                f"Non-numeric value '{raw[column].iloc[row - 1]}' in {file_path.name}",
                row=row,
                column=str(column),
            )
        table[str(column)] = values.to_numpy(dtype=float)

    return pd.DataFrame(table, columns=[str(column) for column in raw.columns])


def split_columns(
    table: pd.DataFrame,
    response_column: Optional[str],
) -> Tuple[np.ndarray, Optional[np.ndarray], List[str]]:
    """Split a numeric table into features (header order) and an optional response."""
    if response_column is not None and response_column not in table.columns:
        raise DataFormatError(
            f"Response column '{response_column}' not found; columns are {list(table.columns)}",
            column=response_column,
        )
    feature_names = [column for column in table.columns if column != response_column]
    if not feature_names:
        raise DataFormatError("No feature columns besides the response")
    features = table[feature_names].to_numpy(dtype=float)
    responses = None if response_column is None else table[response_column].to_numpy(dtype=float)
    return features, responses, feature_names


def load_population_csv(path: Union[str, Path], response_column: str = "y") -> PopulationFrame:
    """
    Load a population frame from a numeric CSV file.

    Features are all non-response columns in header order; row order is preserved.

    Raises:
        FileNotFoundError: If the file does not exist
        DataFormatError: Missing response column, non-numeric cell or fewer than 3 rows
    """
    table = read_numeric_csv(path)
    if len(table) < MIN_POPULATION_ROWS:
        raise DataFormatError(
            f"A population needs at least {MIN_POPULATION_ROWS} rows, {Path(path).name} has {len(table)}"
        )
    features, responses, feature_names = split_columns(table, response_column)
    logger.info(f"Loaded population of {features.shape[0]} units with {features.shape[1]} features from {path}")
    return PopulationFrame(features=features, responses=responses, feature_names=feature_names)


def load_feature_table(path: Union[str, Path], response_column: Optional[str] = None) -> Tuple[np.ndarray, List[str]]:
    """Load the feature columns of a CSV file, dropping the response column when present."""
    table = read_numeric_csv(path)
    if len(table) == 0:
        raise DataFormatError(f"{Path(path).name} has no data rows")
    if response_column is not None and response_column not in table.columns:
        response_column = None
    features, _, feature_names = split_columns(table, response_column)
    return features, feature_names


def save_population_csv(frame: PopulationFrame, path: Union[str, Path], response_column: str = "y") -> Path:
    """Write a population frame as CSV (features first, response last)."""
    names = frame.feature_names or [f"x{i + 1}" for i in range(frame.features.shape[1])]
    if response_column in names:
        raise ContractViolation(f"Response column '{response_column}' clashes with a feature name")
    table = pd.DataFrame(frame.features, columns=names)
    table[response_column] = frame.responses
    output = Path(path)
    output.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(output, index=False, float_format="%.17g")
    return output


def _dense_signal(features: np.ndarray, spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    N = features.shape[0]
    if N > DENSE_LIMIT:
        raise ContractViolation(
            f"Dense generation supports at most {DENSE_LIMIT} units, got {N}; use mode='fourier'"
        )
    covariance = np.empty((N, N))
    for start in range(0, N, COVARIANCE_CHUNK):
        stop = start + COVARIANCE_CHUNK
        covariance[start:stop] = cross_kernel(features[start:stop], features, spec.length_scale)
    covariance *= spec.signal_variance
    factor, _ = stable_cholesky(covariance, DENSE_JITTER * spec.signal_variance)
    return factor @ rng.standard_normal(N)


def _fourier_signal(features: np.ndarray, spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    # random Fourier features of the squared exponential kernel
    D = spec.fourier_features
    frequencies = rng.standard_normal((D, features.shape[1])) / spec.length_scale
    phases = rng.uniform(0.0, 2.0 * math.pi, size=D)
    weights = rng.standard_normal(D)
    scale = math.sqrt(2.0 * spec.signal_variance / D)

    signal = np.empty(features.shape[0])
    for start in range(0, features.shape[0], COVARIANCE_CHUNK):
        stop = start + COVARIANCE_CHUNK
        basis = np.cos(features[start:stop] @ frequencies.T + phases)
        signal[start:stop] = scale * (basis @ weights)
    return signal


def generate_synthetic_population(spec: SyntheticSpec) -> PopulationFrame:
    """
    Draw a synthetic population from a GP with a squared exponential covariance.

    Features are uniform on [0, 1]^m; responses are a GP draw with the given
    signal variance and length scale plus Gaussian noise. The result is a
    pure function of `spec`, seed included.
    """
    rng = np.random.default_rng(spec.seed)
    features = rng.random((spec.population_size, spec.feature_dim))

    if spec.signal_variance == 0:
        signal = np.zeros(spec.population_size)
    elif spec.mode == "dense":
        signal = _dense_signal(features, spec, rng)
    else:
        signal = _fourier_signal(features, spec, rng)

    noise = math.sqrt(spec.noise_variance) * rng.standard_normal(spec.population_size)
    logger.info(
        f"Generated synthetic population: N={spec.population_size}, m={spec.feature_dim}, mode={spec.mode}"
    )
    return PopulationFrame(
        features=features,
        responses=signal + noise,
        feature_names=[f"x{i + 1}" for i in range(spec.feature_dim)],
    )
