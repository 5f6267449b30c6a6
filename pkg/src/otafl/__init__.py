"""Differentially private over-the-air federated learning over MIMO fading channels."""

from .model import (
    RidgeDataset,
    SystemConfig,
    exact_minimizer,
    generate_channel,
    generate_ridge_dataset,
    local_gradient,
    loss,
    strong_convexity_params,
)
from .privacy import (
    DpReport,
    TransceiverDesign,
    dp_report,
    empirical_privacy_tail,
    epsilon_bs,
    mmse_extractor,
    phi_constant,
    sensitivity_bound,
    sinr,
)
from .convergence import (
    BoundReport,
    contraction_factor,
    loss_upper_bound,
    mismatch_term_Ct,
    noise_term_A,
)
from .miso import MisoSolution, check_optimality_conditions, miso_optimal_design, t0_threshold
from .conic import (
    Infeasible,
    LpProblem,
    NumericalFailure,
    RankTooHigh,
    SdpSubproblem,
    principal_eigvec,
    rank_one_factor,
    solve_dc_sdp,
    solve_lp,
    solve_rank_one,
    solve_sdp_mm_step,
)
from .planner import (
    DegenerateChannel,
    PlannerTrace,
    feasibility_check,
    optimize_transceivers,
    s1_closed_form,
)
from .airsim import TrainResult, aggregate, extract, normalized_gap, train, transmit_round
from .harness import ExperimentSpec, ResultRow, aggregate_trials, default_spec, run_experiment

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
