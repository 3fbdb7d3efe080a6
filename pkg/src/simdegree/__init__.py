"""Average similarity degree between solutions of random k-SAT and Model GB CSPs."""

from .asymptotics import (
    AnalyticContext,
    Branch,
    PhasePortrait,
    Regime,
    asymptotic_second_moment,
    avg_distance_infinity,
    branch_inverse,
    find_r_cr,
    phase_portrait,
    regime_check,
    s_av_infinity,
)
from .exact_finite import (
    LogValue,
    PairCountProfile,
    avg_similarity_finite,
    concentration_mass,
    expected_sat_pairs,
    second_moment_finite,
)
from .model_gb import (
    Constraint,
    Instance,
    ModelParams,
    generate,
    is_satisfying,
    ksat_params,
    similarity_degree,
    similarity_number,
)
from .oracle import (
    EnsembleEstimate,
    Mode,
    SimilarityHistogram,
    empirical_avg_similarity,
    ensemble_expected_counts,
    enumerate_solutions,
    histogram,
)

__version__ = "0.1.0"
