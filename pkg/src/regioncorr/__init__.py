"""Robust inter-region correlation estimation for aggregated lattice data.

A library for studying how spatial aggregation and additive noise bias
correlation estimates between regions of a voxel lattice, with exact
theoretical limits for every estimator and a reproducible Monte Carlo
harness.
"""

from .lattice import (
    CompactNoiseCorrelation,
    CorrelationFunction,
    LinearDecayCorrelation,
    Neighborhood,
    RegionSpec,
    TabulatedCorrelation,
    mean_correlation_between_boxes,
    mean_correlation_box,
    neighborhood_mean_correlation,
    paired_neighborhood_mean_correlation,
    region_mean_correlation,
    region_voxels,
    sample_neighborhood,
    uniform_distance,
)
from .model import (
    CovarianceNotPSDError,
    Dataset,
    ModelParams,
    build_signal_covariance,
    load_dataset,
    make_layout,
    noise_variance_from_snr,
    save_dataset,
    signal_factor,
    simulate,
)
from .stats import (
    DegenerateSeriesError,
    UndefinedDifferenceCorrelationError,
    cor_tilde,
    s_hat_squared,
    sample_cor,
    sample_cov,
    sample_sd,
    sample_var,
)
from .estimators import (
    METHODS,
    EstimateResult,
    EstimationError,
    EstimatorConfig,
    estimate,
)
from .limits import limit_of
from .harness import (
    EstimateSummary,
    ExperimentConfig,
    Scenario,
    default_config,
    run_experiment,
    write_outputs,
)
from .config import load_config, parse_config, reference_config_text

__version__ = "0.1.0"
