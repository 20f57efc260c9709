"""Concave-utility RL on finite-horizon tabular MDPs: MD-CURL and Greedy MD-CURL."""
from .env import (
    GridGeometry,
    NoiseDynamics,
    TrajectoryBatch,
    corner_start,
    four_room_geometry,
    four_room_gridworld,
    gridworld_dynamics,
    kernel_from_dynamics,
    simulate_trajectories,
)
from .mdp import (
    DimensionError,
    DomainError,
    InitialDistribution,
    MdpShape,
    OccupancyMeasure,
    Policy,
    TransitionKernel,
    bregman_gamma,
    check_bellman_flow,
    gamma_divergence,
    norm_inf_1,
    occupancy_from_policy,
    policy_from_occupancy,
)
from .objectives import (
    CurlObjective,
    entropy_objective,
    finite_difference_gradient,
    linear_objective,
    multi_objective,
)
from .online import (
    KernelEstimate,
    OnlineConfig,
    RegretReport,
    best_stationary_policy,
    default_online_tau,
    explore_mix,
    greedy_step,
    initial_estimate,
    run_online,
    update_count_estimate,
    update_noise_estimate,
)
from .solver import (
    SolveReport,
    SolverConfig,
    auxiliary_problem_oracle,
    default_learning_rate,
    exponential_twist_update,
    md_curl_solve,
    regularized_q_backup,
)

__version__ = "0.1.0"
