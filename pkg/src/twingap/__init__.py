"""Twin-based decomposition of sex differences in early-age mortality."""

from .decompose import (
    DecompositionTable,
    PeriodDecomposition,
    bootstrap_decomposition,
    decompose_all,
    decompose_coefficients,
    decompose_period,
)
from .domain import WINDOWS, BirthRecord, MortalityWindow, TwinPair, classify_window, get_window, pair_type
from .errors import (
    ConfigurationError,
    DataError,
    EstimationError,
    MissingFitError,
    RankDeficiencyError,
    SchemaError,
    TwinGapError,
)
from .estimate import (
    ModelSpec,
    RegressionFit,
    build_design,
    cluster_vcov,
    fit_family_fe,
    fit_fixed_effects,
    fit_lpm,
    fit_ols,
    fit_twin_fe,
)
from .estimators import LinearProbabilityModel, TwinGapDecomposer, WithinEstimator
from .ingest import BirthTable, MatchDiagnostics, Sample, TwinPairSet, build_sample, match_twins, parse_births, write_births
from .pipeline import estimate_fits
from .report import covariate_summary, mortality_rate_table, render, sex_ratio_table
from .synth import SynthConfig, generate, planted_thetas, shaped_table

__version__ = "0.1.0"
