"""Lambda-coalescents with dust: simulation and Monte Carlo verification."""

from .measures import (
    BetaFamily,
    GammaPhi,
    Lebesgue,
    LogSingular,
    MeasureError,
    MeasureSpec,
    MomentSet,
    QuadratureError,
    RateTable,
    TabulatedTail,
    TailRho,
    dust_check,
    lambda_rate,
    laplace_exponent,
    moments,
    nu_tail,
    parse_measure,
    phi_rate,
    rate_table,
)
from .special import digamma, hurwitz_zeta, log_beta, trigamma
from .coalescent import (
    DustRun,
    RecursionProblem,
    RecursionSolution,
    RunStats,
    decrement_distribution,
    dust_decrement_problem,
    g_closed_beta,
    replicate_stats,
    simulate_dust_chain,
    simulate_full,
    solve_recursion,
    visit_probabilities,
)
from .subordinator import (
    FirstPassage,
    OccupancyFrequencies,
    SubordinatorPath,
    VTrajectory,
    exp_functional_moment,
    exp_functional_sample,
    first_passage,
    occupancy_expected,
    occupancy_sample,
    regenerative_composition,
    renewal_count,
    sample_cpp_path,
    v_chain_simulate,
    v_stationary_solve,
)
from .limits import (
    LimitRegime,
    NormConstants,
    RegimePair,
    classify,
    collisions_regvar_scale,
    collisions_slowvar_constants,
    regvar_beta_prefactor,
    slowly_varying,
    solve_cn,
    stable_cf,
    tau_normal_constants,
    tau_stable_constants,
)
from .stats import (
    MomentCI,
    Sample,
    chi_square,
    chi_square_two_sample,
    empirical_cf,
    ks_distance,
    moment_ci,
    tv_distance,
)

__version__ = "0.1.0"
