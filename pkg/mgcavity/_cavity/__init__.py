from mgcavity._cavity._quadrature import DEFAULT_ORDER as DEFAULT_ORDER, QuadratureGrid as QuadratureGrid
from mgcavity._cavity._fields import (
    Ahat as Ahat,
    EffectiveNoise as EffectiveNoise,
    ghat as ghat,
    ghat_prime as ghat_prime,
    xhat as xhat,
)
from mgcavity._cavity._reactions import (
    ESCAPE_TOLERANCE as ESCAPE_TOLERANCE,
    OrderParameters as OrderParameters,
    agent_field_variance as agent_field_variance,
    check_operating_range as check_operating_range,
    clipped_second_moment as clipped_second_moment,
    mean_price as mean_price,
    preference_moment as preference_moment,
    reaction_Rg as reaction_Rg,
    reaction_Rx as reaction_Rx,
    signal_field_variance as signal_field_variance,
    solve_bias as solve_bias,
    unfrozen_fraction as unfrozen_fraction,
    update_order_params as update_order_params,
)
from mgcavity._cavity._solver import (
    CavitySolution as CavitySolution,
    CriticalPoint as CriticalPoint,
    SolverSettings as SolverSettings,
    SweepRow as SweepRow,
    find_alpha_c as find_alpha_c,
    naive_mean_field as naive_mean_field,
    near_transition_reactions as near_transition_reactions,
    predict_A_distribution as predict_A_distribution,
    solve_self_consistent as solve_self_consistent,
    sweep as sweep,
)
