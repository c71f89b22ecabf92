"""
Data models for the BO Survey package.
"""

import math
from enum import Enum
from pathlib import Path
from typing import Annotated, Any, Dict, List, Optional

import numpy as np
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    field_validator,
    model_validator,
)

METRIC_NAMES = (
    "mean_abs_diff",
    "kl_divergence",
    "total_abs_diff",
    "total_abs_diff_normalized_pi",
)


def _as_float_array(value: Any) -> np.ndarray:
    array = np.array(value, dtype=float)
    array.setflags(write=False)
    return array


def _as_index_array(value: Any) -> np.ndarray:
    array = np.array(value, dtype=np.int64).reshape(-1)
    array.setflags(write=False)
    return array


FloatArray = Annotated[np.ndarray, BeforeValidator(_as_float_array)]
IndexArray = Annotated[np.ndarray, BeforeValidator(_as_index_array)]


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


class ArrayModel(BaseModel):
    """Immutable model that may hold numpy arrays."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class KernelConfig(BaseModel):
    """Hyperparameters of the squared exponential kernel."""
    model_config = ConfigDict(frozen=True)

    length_scale: float
    noise_variance: float
    jitter: float = 0.0

    @field_validator('length_scale', 'noise_variance')
    def validate_positive(cls, v):
        """Validate strictly positive hyperparameters."""
        if not math.isfinite(v) or v <= 0:
            raise ValueError('Kernel length scale and noise variance must be positive')
        return v

    @field_validator('jitter')
    def validate_jitter(cls, v):
        """Validate the diagonal jitter."""
        if not math.isfinite(v) or v < 0:
            raise ValueError('Jitter must be non-negative')
        return v


class KernelSettings(BaseModel):
    """Optional kernel overrides; unset values fall back to data-driven defaults."""
    length_scale: Optional[float] = None
    noise_variance: Optional[float] = None
    jitter: float = 0.0

    @field_validator('length_scale', 'noise_variance')
    def validate_positive(cls, v):
        if v is not None and (not math.isfinite(v) or v <= 0):
            raise ValueError('Kernel overrides must be positive')
        return v

    @field_validator('jitter')
    def validate_jitter(cls, v):
        if not math.isfinite(v) or v < 0:
            raise ValueError('Jitter must be non-negative')
        return v


class Dataset(ArrayModel):
    """Explanatory vectors paired with responses."""
    features: FloatArray
    responses: FloatArray
    feature_names: Optional[List[str]] = None

    @field_validator('features')
    def validate_features(cls, v):
        """Validate the feature matrix."""
        if v.ndim == 1:
            v = _frozen(v.reshape(-1, 1))
        if v.ndim != 2:
            raise ValueError('Features must be a 2-D matrix')
        if not np.all(np.isfinite(v)):
            raise ValueError('Features must be finite')
        return v

    @field_validator('responses')
    def validate_responses(cls, v):
        """Validate the response vector."""
        if v.ndim != 1:
            raise ValueError('Responses must be a 1-D vector')
        if not np.all(np.isfinite(v)):
            raise ValueError('Responses must be finite')
        return v

    @model_validator(mode='after')
    def validate_shapes(self):
        if self.features.shape[0] != self.responses.shape[0]:
            raise ValueError('Feature rows must match the number of responses')
        if self.feature_names is not None and len(self.feature_names) != self.features.shape[1]:
            raise ValueError('Feature names must match the number of feature columns')
        return self

    @property
    def n_points(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.features.shape[1])


class Standardizer(ArrayModel):
    """Per-feature z-score transform."""
    mean: FloatArray
    scale: FloatArray

    @classmethod
    def fit(cls, features: np.ndarray) -> "Standardizer":
        """Estimate the transform from a feature matrix; constant columns keep unit scale."""
        mean = features.mean(axis=0)
        scale = features.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        return cls(mean=mean, scale=scale)

    def transform(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features, dtype=float) - self.mean) / self.scale


class GpPosterior(ArrayModel):
    """Fitted Gaussian process regression surrogate."""
    training_features: FloatArray
    alpha: FloatArray
    cholesky_factor: FloatArray
    kernel: KernelConfig
    standardizer: Standardizer
    jitter_used: float = 0.0

    @field_validator('cholesky_factor')
    def validate_cholesky(cls, v):
        """Validate the lower-triangular factor."""
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError('Cholesky factor must be square')
        if np.any(np.triu(v, k=1) != 0):
            raise ValueError('Cholesky factor must be lower triangular')
        if np.any(np.diag(v) <= 0):
            raise ValueError('Cholesky factor must have a positive diagonal')
        return v

    @model_validator(mode='after')
    def validate_shapes(self):
        n = self.training_features.shape[0]
        if self.alpha.shape != (n,) or self.cholesky_factor.shape != (n, n):
            raise ValueError('Posterior arrays have inconsistent sizes')
        return self

    @property
    def n_features(self) -> int:
        return int(self.training_features.shape[1])


class Prediction(BaseModel):
    """Posterior predictive mean and standard deviation at one point."""
    model_config = ConfigDict(frozen=True)

    mean: float
    std_dev: float

    @field_validator('std_dev')
    def validate_std_dev(cls, v):
        if not v >= 0:
            raise ValueError('Predictive standard deviation must be non-negative')
        return v


class AcquisitionTag(str, Enum):
    PU = "PU"
    ILCB = "ILCB"
    EI = "EI"
    SEI = "SEI"


class AcquisitionKind(BaseModel):
    """Acquisition function selection."""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    tag: AcquisitionTag
    lam: float = Field(default=0.2, alias="lambda")

    @field_validator('lam')
    def validate_lambda(cls, v):
        if not math.isfinite(v) or v < 0:
            raise ValueError('ILCB lambda must be non-negative')
        return v

    @property
    def needs_objective(self) -> bool:
        return self.tag != AcquisitionTag.PU


class ObjectiveRecord(ArrayModel):
    """Observed change in surrogate holdout MAE from adding one point."""
    features: FloatArray
    delta_mae: float

    @field_validator('delta_mae')
    def validate_delta(cls, v):
        if not math.isfinite(v):
            raise ValueError('delta_mae must be finite')
        return v


class ObjectiveSurrogate(ArrayModel):
    """Surrogate of the delta-MAE objective with its observed minimum."""
    gp: GpPosterior
    g_min: float


class SamplingScheme(str, Enum):
    POISSON = "poisson"
    FIXED_SIZE_WEIGHTED = "fixed_size_weighted"
    SRS = "srs"


class PiConvention(str, Enum):
    ONE_OVER_N = "one_over_n"  # pi_k = 1/N
    CLASSICAL = "classical"    # pi_k = n/N


class SamplingDesign(ArrayModel):
    """First-order inclusion probabilities over a frame and the scheme realizing them."""
    pi: FloatArray
    scheme: SamplingScheme
    nominal_sample_size: Optional[int] = None
    epsilon: Optional[float] = None
    scores: Optional[FloatArray] = None
    pi_convention: Optional[PiConvention] = None

    @field_validator('pi')
    def validate_pi(cls, v):
        """Validate inclusion probabilities lie strictly inside (0, 1)."""
        if v.ndim != 1 or v.size == 0:
            raise ValueError('Inclusion probabilities must be a non-empty vector')
        if not np.all((v > 0) & (v < 1)):
            raise ValueError('Inclusion probabilities must lie strictly between 0 and 1')
        return v

    @field_validator('nominal_sample_size')
    def validate_sample_size(cls, v):
        if v is not None and v <= 0:
            raise ValueError('Nominal sample size must be positive')
        return v

    @field_validator('epsilon')
    def validate_epsilon(cls, v):
        if v is not None and not 0 < v < 0.5:
            raise ValueError('Epsilon must lie in (0, 0.5)')
        return v

    @model_validator(mode='after')
    def validate_design(self):
        if self.scheme == SamplingScheme.SRS:
            if not np.all(self.pi == self.pi[0]):
                raise ValueError('SRS designs carry constant inclusion probabilities')
            if self.nominal_sample_size is None:
                raise ValueError('SRS designs need a nominal sample size')
        if self.nominal_sample_size is not None and self.nominal_sample_size >= self.pi.size:
            raise ValueError('Nominal sample size must be smaller than the frame')
        if self.scores is not None and self.scores.shape != self.pi.shape:
            raise ValueError('Scores must align with inclusion probabilities')
        return self

    @property
    def population_size(self) -> int:
        return int(self.pi.size)


class SampleDraw(ArrayModel):
    """A realized sample: selected unit indices and the generating inclusion probabilities."""
    indices: IndexArray
    pi_used: FloatArray

    @model_validator(mode='after')
    def validate_indices(self):
        if np.unique(self.indices).size != self.indices.size:
            raise ValueError('Sample indices must be distinct')
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= self.pi_used.size):
            raise ValueError('Sample indices out of range')
        return self

    @property
    def realized_size(self) -> int:
        return int(self.indices.size)

    @property
    def pi_on_sample(self) -> np.ndarray:
        return self.pi_used[self.indices]


class PopulationFrame(ArrayModel):
    """All units of a population with ground truth and (optionally) surrogate predictions."""
    features: FloatArray
    responses: FloatArray
    predictions: Optional[FloatArray] = None
    feature_names: Optional[List[str]] = None

    @field_validator('features')
    def validate_features(cls, v):
        if v.ndim == 1:
            v = _frozen(v.reshape(-1, 1))
        if v.ndim != 2:
            raise ValueError('Features must be a 2-D matrix')
        if not np.all(np.isfinite(v)):
            raise ValueError('Features must be finite')
        return v

    @model_validator(mode='after')
    def validate_lengths(self):
        n = self.features.shape[0]
        if self.responses.shape != (n,):
            raise ValueError('Responses must have one value per unit')
        if self.predictions is not None and self.predictions.shape != (n,):
            raise ValueError('Predictions must have one value per unit')
        if self.feature_names is not None and len(self.feature_names) != self.features.shape[1]:
            raise ValueError('Feature names must match the number of feature columns')
        return self

    @property
    def size(self) -> int:
        return int(self.features.shape[0])

    @property
    def residuals(self) -> np.ndarray:
        """D_k = y_k - yhat_k over the whole frame."""
        if self.predictions is None:
            raise ValueError('Frame has no predictions')
        return self.responses - self.predictions

    def with_predictions(self, predictions: np.ndarray) -> "PopulationFrame":
        return self.model_copy(update={"predictions": _as_float_array(predictions)})

    def subset(self, indices: np.ndarray) -> "PopulationFrame":
        """Return the frame restricted to the given unit indices, in that order."""
        return PopulationFrame(
            features=self.features[indices],
            responses=self.responses[indices],
            predictions=None if self.predictions is None else self.predictions[indices],
            feature_names=self.feature_names,
        )

    def to_dataset(self) -> Dataset:
        return Dataset(
            features=self.features,
            responses=self.responses,
            feature_names=self.feature_names,
        )


class EstimatorKind(str, Enum):
    HT = "HT"
    DIFFERENCE = "DIFFERENCE"


class TotalEstimate(BaseModel):
    """Population total estimate with optional variance information."""
    model_config = ConfigDict(frozen=True)

    estimator: EstimatorKind
    value: float
    variance: Optional[float] = None
    variance_estimate: Optional[float] = None
    pi_normalized: bool = False
    variance_approximate: bool = False

    @field_validator('variance')
    def validate_variance(cls, v):
        if v is not None and v < 0:
            raise ValueError('Variance must be non-negative')
        return v

    @property
    def variance_estimate_negative(self) -> bool:
        return self.variance_estimate is not None and self.variance_estimate < 0


class MetricRecord(BaseModel):
    """The four evaluation metrics for one design in one repeat."""
    model_config = ConfigDict(frozen=True)

    design_name: str
    repeat_index: int
    mean_abs_diff: float
    kl_divergence: float
    total_abs_diff: float
    total_abs_diff_normalized_pi: float

    @field_validator(*METRIC_NAMES)
    def validate_metric(cls, v):
        """Validate metric values."""
        if not math.isfinite(v) or v < 0:
            raise ValueError('Metric values must be finite and non-negative')
        return v


class Histogram(ArrayModel):
    """Binned probability distribution."""
    bin_edges: FloatArray
    probabilities: FloatArray

    @model_validator(mode='after')
    def validate_histogram(self):
        if self.bin_edges.ndim != 1 or self.bin_edges.size < 2:
            raise ValueError('Histogram needs at least two bin edges')
        if np.any(np.diff(self.bin_edges) <= 0):
            raise ValueError('Bin edges must be ascending')
        if self.probabilities.shape != (self.bin_edges.size - 1,):
            raise ValueError('Histogram needs one probability per bin')
        if np.any(self.probabilities < 0) or abs(self.probabilities.sum() - 1.0) > 1e-12:
            raise ValueError('Histogram probabilities must be non-negative and sum to 1')
        return self


class SyntheticSpec(BaseModel):
    """Parameters of a GP-generated synthetic population."""
    population_size: int = 1920
    feature_dim: int = 16
    length_scale: float = 1.0
    signal_variance: float = 1.0
    noise_variance: float = 0.25
    seed: int = 0
    mode: str = "dense"
    fourier_features: int = 2000

    @field_validator('population_size', 'feature_dim', 'fourier_features')
    def validate_sizes(cls, v):
        if v <= 0:
            raise ValueError('Synthetic sizes must be positive')
        return v

    @field_validator('length_scale')
    def validate_length_scale(cls, v):
        if not v > 0:
            raise ValueError('Synthetic length scale must be positive')
        return v

    @field_validator('signal_variance', 'noise_variance')
    def validate_variances(cls, v):
        if not v >= 0:
            raise ValueError('Synthetic variances must be non-negative')
        return v

    @field_validator('mode')
    def validate_mode(cls, v):
        if v not in {'dense', 'fourier'}:
            raise ValueError("Synthetic mode must be 'dense' or 'fourier'")
        return v


DESIGN_ALIASES = {
    "srs": "SRS",
    "bo-pu": "BO-PU",
    "bo-ilcb": "BO-ILCB",
    "bo-ei": "BO-EI",
    "bo-sei": "BO-SEI",
}

# designs whose scores need the objective surrogate fitted on the prior
OBJECTIVE_DESIGNS = ("BO-ILCB", "BO-EI", "BO-SEI")
MIN_OBJECTIVE_PRIOR = 10


class SimulationConfig(BaseModel):
    """Configuration of a Monte Carlo comparison of sampling designs."""
    population_csv: Optional[Path] = None
    response_column: str = "y"
    synthetic: Optional[SyntheticSpec] = None
    prior_size: int = 100
    sample_size: int = 50
    repeats: int = 200
    designs: List[str] = Field(default_factory=lambda: ["SRS", "BO-PU", "BO-ILCB", "BO-EI", "BO-SEI"])
    kernel: KernelSettings = Field(default_factory=KernelSettings)
    epsilon: float = 1e-3
    scheme: SamplingScheme = SamplingScheme.FIXED_SIZE_WEIGHTED
    srs_pi_convention: PiConvention = PiConvention.ONE_OVER_N
    master_seed: int = 0
    histogram_bins: int = 20
    kl_smoothing: float = 0.5
    objective_rounds: int = 10
    holdout_fraction: float = 0.2
    ilcb_lambda: float = 0.2
    threads: Optional[int] = None

    @field_validator('designs', mode='before')
    def validate_designs(cls, v):
        """Normalize design names (accepts a comma separated string)."""
        if isinstance(v, str):
            v = [item for item in v.split(',') if item.strip()]
        names = []
        for item in v:
            key = str(item).strip().lower()
            if key not in DESIGN_ALIASES:
                raise ValueError(f'Design must be one of {sorted(DESIGN_ALIASES)}')
            names.append(DESIGN_ALIASES[key])
        if "SRS" not in names:
            raise ValueError('Designs must include the SRS baseline')
        return names

    @field_validator('prior_size', 'sample_size', 'repeats', 'histogram_bins', 'objective_rounds')
    def validate_counts(cls, v):
        if v < 1:
            raise ValueError('Sizes, repeats, bins and rounds must be at least 1')
        return v

    @field_validator('epsilon')
    def validate_epsilon(cls, v):
        if not 0 < v < 0.5:
            raise ValueError('Epsilon must lie in (0, 0.5)')
        return v

    @field_validator('scheme')
    def validate_scheme(cls, v):
        if v == SamplingScheme.SRS:
            raise ValueError('BO designs use the poisson or fixed_size_weighted scheme')
        return v

    @field_validator('kl_smoothing', 'ilcb_lambda')
    def validate_non_negative(cls, v):
        if v < 0:
            raise ValueError('Smoothing and lambda must be non-negative')
        return v

    @field_validator('holdout_fraction')
    def validate_holdout(cls, v):
        if not 0 < v < 1:
            raise ValueError('Holdout fraction must lie in (0, 1)')
        return v

    @field_validator('threads')
    def validate_threads(cls, v):
        if v is not None and v < 1:
            raise ValueError('Thread count must be at least 1')
        return v

    @model_validator(mode='after')
    def validate_source(self):
        if self.population_csv is not None and self.synthetic is not None:
            raise ValueError('population_csv and synthetic population are mutually exclusive')
        if self.population_csv is None and self.synthetic is None:
            self.synthetic = SyntheticSpec()
        if self.prior_size < MIN_OBJECTIVE_PRIOR and any(name in OBJECTIVE_DESIGNS for name in self.designs):
            raise ValueError(
                f'prior_size must be at least {MIN_OBJECTIVE_PRIOR} for the '
                f'{", ".join(OBJECTIVE_DESIGNS)} designs (got {self.prior_size})'
            )
        if self.synthetic is not None:
            required = self.prior_size + self.sample_size
            if required >= self.synthetic.population_size:
                raise ValueError(
                    f'prior_size + sample_size ({required}) must be smaller than '
                    f'the population size ({self.synthetic.population_size})'
                )
        return self


class FiveNumberSummary(BaseModel):
    """Boxplot statistics of one metric for one design."""
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    count: int


class Provenance(BaseModel):
    """Where a report came from."""
    config_hash: str
    master_seed: int
    version: str
    created_at: str
    config: Dict[str, Any]


class SimulationReport(BaseModel):
    """Records and aggregates of a simulation run."""
    records: List[MetricRecord]
    summaries: Dict[str, Dict[str, FiveNumberSummary]]
    mwu: Dict[str, Dict[str, float]]
    provenance: Provenance
    failed_repeats: List[int] = Field(default_factory=list)
    degraded: bool = False

    def model_dump_summary(self) -> Dict[str, Any]:
        """Convert the aggregate part to a dictionary for JSON serialization."""
        return {
            "summaries": {
                design: {metric: summary.model_dump() for metric, summary in metrics.items()}
                for design, metrics in self.summaries.items()
            },
            "mann_whitney_p_values": self.mwu,
            "failed_repeats": self.failed_repeats,
            "degraded": self.degraded,
            "provenance": self.provenance.model_dump(),
        }
