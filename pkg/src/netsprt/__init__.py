"""Robust sequential binary hypothesis testing over distributed sensor networks.

Each agent of a connected sensor network runs a sequential probability ratio
test whose statistic mixes neighborhood information (consensus) with fresh
log-likelihood ratios (innovations). The package provides the plain detector,
a clipped variant built on least-favorable densities for epsilon-contaminated
noise, estimator-based robust variants (median / Huber-M / myriad), threshold
design for both, and a reproducible Monte Carlo harness with a CLI.
"""
from .detector import DecisionRecord, NetworkDetector, Variant, VariantKind
from .estimators import HuberConfig, MyriadConfig, huber_m, mad_scale, median, myriad, sample_mean
from .hypothesis import (
    ContaminationModel,
    GaussianBinaryTest,
    LlrMoments,
    TrueState,
    llr,
    llr_moments,
    sample_measurement,
)
from .lfd import (
    ClippedLlrMoments,
    ClippedLrtParams,
    ExcessMass,
    clipped_llr,
    clipped_llr_moments,
    excess_masses,
    lfd_densities,
    solve_lfd_eps,
)
from .montecarlo import (
    ExperimentConfig,
    Metrics,
    collect_statistic_snapshots,
    config_from_json,
    metrics_to_csv,
    run_experiment,
)
from .network import (
    CombinationMatrix,
    SensorGraph,
    XiBound,
    equal_weight_matrix,
    generate_geometric_graph,
    xi_bound,
)
from .thresholds import ErrorBudget, Thresholds, closed_form, tighter_numeric

__version__ = "0.1.0"
