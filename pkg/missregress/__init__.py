"""
missregress: averaged SGD for linear regression with missing covariates
"""
from .errors import MissRegressError, InvalidData, NumericalError, DivergenceError, SingularError
from .config import MissRegressConfig, BenchConfig, DEFAULT_CONFIG
from .core import (
    MaskedVector, Observation, MissingnessModel, Provenance, StepPolicy, OptimizerState,
    RegularizerConfig, MaskedDataset, masked_from_na_row, estimate_missingness,
)
from .gradient import (
    GradientKind, debiased_gradient, debiased_gradient_ridge, debiased_direction_poly,
    least_squares_gradient,
)
from .optimizer import (
    AlgorithmSpec, RunConfig, TraceRecord, run, run_mean_imputed, run_complete_case,
    run_zero_imputed, mean_impute,
)
from .lipschitz import (
    LipschitzEstimate, LipschitzMethod, LipschitzTracker, lipschitz_oracle, lipschitz_from_na,
    lipschitz_poly, warmup_estimate,
)
from .polyfeat import FeatureMap, expand_row, expand_dataset, build_probability_matrix
from .synthgen import (
    SynthConfig, BoundInputs, generate, generate_poly, variance_constant, excess_risk_bound,
    ridge_iterate_bound,
)
from .risk import RiskProbe, empirical_risk, excess_risk, ols_reference, relative_prediction_error
from .ingest import ColumnScaling, IngestResult, ingest_csv
from .modelfile import ModelFile
from .tracefile import TraceFile, write_trace, read_trace
from .bench import run_scenario

__version__ = "0.1.0"

__all__ = [
    'MissRegressError',
    'InvalidData',
    'NumericalError',
    'DivergenceError',
    'SingularError',
    'MissRegressConfig',
    'BenchConfig',
    'DEFAULT_CONFIG',
    'MaskedVector',
    'Observation',
    'MissingnessModel',
    'Provenance',
    'StepPolicy',
    'OptimizerState',
    'RegularizerConfig',
    'MaskedDataset',
    'masked_from_na_row',
    'estimate_missingness',
    'GradientKind',
    'debiased_gradient',
    'debiased_gradient_ridge',
    'debiased_direction_poly',
    'least_squares_gradient',
    'AlgorithmSpec',
    'RunConfig',
    'TraceRecord',
    'run',
    'run_mean_imputed',
    'run_complete_case',
    'run_zero_imputed',
    'mean_impute',
    'LipschitzEstimate',
    'LipschitzMethod',
    'LipschitzTracker',
    'lipschitz_oracle',
    'lipschitz_from_na',
    'lipschitz_poly',
    'warmup_estimate',
    'FeatureMap',
    'expand_row',
    'expand_dataset',
    'build_probability_matrix',
    'SynthConfig',
    'BoundInputs',
    'generate',
    'generate_poly',
    'variance_constant',
    'excess_risk_bound',
    'ridge_iterate_bound',
    'RiskProbe',
    'empirical_risk',
    'excess_risk',
    'ols_reference',
    'relative_prediction_error',
    'ColumnScaling',
    'IngestResult',
    'ingest_csv',
    'ModelFile',
    'TraceFile',
    'write_trace',
    'read_trace',
    'run_scenario',
]
