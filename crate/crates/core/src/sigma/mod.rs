//! The sufficient-statistic chain {σ_k} of the random DAG model.

pub mod chain;
pub mod curves;
pub mod mc;

pub use chain::{
    biased_rule, exact_chain, exact_step, exact_tv_at, majority_rule, DecisionRule, ExactBudget,
    SigmaDistribution,
};
pub use curves::{
    and_or_threshold, closed_form_fixed_points, fixed_points, fixed_points_by_scan, g_and, g_andor,
    g_majority, g_or, lipschitz, ChainModel, FixedPoint, FixedPointReport, MAJORITY_THRESHOLD,
};
pub use mc::{almost_sure_limit_check, coupled_mc, quenched_error_estimate};
