//! Equilibrium computation and reward design for rank-based risk-taking
//! contests.
//!
//! `n` players watch independent Brownian motions with common drift and
//! volatility, absorbed at zero, and each picks when to stop. Prizes are
//! paid by the rank of the stopping level. For every ordered reward vector
//! there is a unique symmetric equilibrium stopping law; this crate builds
//! it ([`equilibrium`]), evaluates what a principal cares about
//! ([`metrics`]), designs the reward that maximizes those objectives
//! ([`design`]) and checks everything by simulation ([`simulate`]).
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod design;
pub mod equilibrium;
pub mod error;
pub mod market;
pub mod metrics;
pub mod payoff;
pub mod quadrature;
pub mod scalar;
pub mod simulate;

pub use design::{
    grad_j, k_star, objective_j, optimize_average, optimize_first_rank, optimize_first_rank_seeded,
    optimize_rank_k, optimize_rank_k_with, project_to_simplex, AscentOptions, CutoffScheme,
    DesignDiagnostics, DesignRegime, DesignResult, SimplexWeights,
};
pub use equilibrium::{build, scale_h, Equilibrium, Regime};
pub use error::{ContestError, Result};
pub use market::{lorenz_compare, mu_bar, validate, LorenzRelation, MarketParams, RewardScheme};
pub use metrics::{
    expected_duration, expected_performance, expected_utility, order_stat_mean,
    order_stat_mean_by_quadrature, order_stat_mean_last, phi_coeff, phi_coeff_f64,
    second_order_dominance, single_crossing, CrossingDirection, CrossingReport, OrderStatQuery,
    Utility,
};
pub use payoff::{g_eval, g_inverse, payoff_against, DiscreteDistribution, RankPolynomial};
pub use scalar::Scalar;
pub use simulate::{
    analytic_rank_levels, best_response_curve, path_exit_check, play_games, sample_game,
    sample_levels, settle_ranks, BestResponseCurve, BestResponsePoint, MCEstimate, PathExit,
    PlayResult, SimConfig,
};

pub type MarketParams64 = MarketParams<f64>;
pub type RewardScheme64 = RewardScheme<f64>;
pub type Equilibrium64 = Equilibrium<f64>;
pub type DesignResult64 = DesignResult<f64>;
pub type MCEstimate64 = MCEstimate<f64>;
pub type SimConfig64 = SimConfig<f64>;
pub type DiscreteDistribution64 = DiscreteDistribution<f64>;
