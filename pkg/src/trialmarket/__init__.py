"""Trial-offer market simulator and ranking-policy toolkit."""

from .model import (
    DegenerateInstanceError,
    InvalidInstanceError,
    MarketConfig,
    MarketState,
    PopularitySignal,
    Ranking,
    SignalMode,
    UndefinedShareError,
    derive_class_weights,
    market_shares,
    purchase_probability_next,
    trial_probabilities,
)
from .policies import (
    AQGSI,
    AQNSI,
    EXPERIMENT_POLICIES,
    SQNSI,
    SQSSI,
    PolicySpec,
    RankingKind,
    SignalMode as PolicySignalMode,  # noqa: F401  (re-export convenience)
    SizeLimitError,
    SolverKind,
    UnsupportedSolverError,
    activity_ranking,
    average_quality,
    average_quality_ranking,
    performance_ranking_bruteforce,
    performance_ranking_k1,
    performance_ranking_swap_heuristic,
    popularity_ranking,
    segmented_quality_rankings,
)
from .reduction import (
    ReductionResult,
    TwoClassLogitInstance,
    brute_force_two_class_logit,
    solve_two_class_logit,
)
from .engine import (
    EfficiencyCurve,
    MonteCarloResult,
    PurchaseProfile,
    SimulationTrace,
    StepRecord,
    default_checkpoints,
    monte_carlo,
    run_simulation,
    simulate_step,
)
from .rng import ReplicationStream, derive_stream_key

__version__ = "0.1.0"
