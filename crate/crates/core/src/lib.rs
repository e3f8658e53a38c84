//! Nash equilibria of a two-provider pricing game with congestion-sensitive
//! demand and in-network caching.
//!
//! An ISP and a CP each charge end users a usage price. Users respond to
//! the total price `p = p1 + p2` through a linear demand that is further
//! reduced by congestion on the CP-ISP link. A side payment flows between
//! the providers. When the ISP caches a fraction `κ` of content, link load
//! and the side payment both shrink by `1 - κ` at a caching cost `c(κ)`.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`). The `*F64` and
//! `*F32` aliases below fix the precision for callers who do not need the
//! generic form.
//!
//! ```
//! use icn_game::{nash_concave_closed, DemandParams, GameSpec};
//!
//! let demand = DemandParams::from_a(12.0_f64, 1.0, 1.0).unwrap();
//! let spec = GameSpec::simple(demand, 0.0).unwrap();
//! let eq = nash_concave_closed(&spec).unwrap();
//! assert!((eq.p_total - 10.188_26).abs() < 1e-4);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod caching;
pub mod demand;
pub mod equilibrium;
pub mod error;
pub mod market;
pub mod numerics;
pub mod scalar;

pub use caching::{
    check_convexity, cost_of_kappa, f_of_kappa, kappa_of_f, CachingCostModel, ConvexityReport,
    PopularityDistribution, PopularityKind,
};
pub use demand::{
    congestion_factor, demand, demand_closed_form, demand_derivative, demand_fixed_point,
    solve_congested_demand, tilde_demand, CongestionKind, DemandParams, DemandValue,
};
pub use equilibrium::{
    best_response, best_response_dynamics, concave_total_price, equilibrium_at,
    equilibrium_candidate, foc_residual, nash_concave_closed, nash_linear, nash_numeric_foc,
    utility_cp, utility_isp, verify_nash, BestResponse, Equilibrium, GameSpec, NashReport, Player,
    SolveMethod, Trajectory, UpdateMode,
};
pub use error::{Error, Result};
pub use market::{
    kappa_sweep, optimal_kappa, solve_scenario, uniform_kappa_grid, OptimalKappa, Regime,
    ScenarioConfig, SweepRecord,
};
pub use numerics::{Bracket, Tolerance};
pub use scalar::Scalar;

pub type DemandParamsF64 = DemandParams<f64>;
pub type GameSpecF64 = GameSpec<f64>;
pub type EquilibriumF64 = Equilibrium<f64>;
pub type PopularityDistributionF64 = PopularityDistribution<f64>;
pub type CachingCostModelF64 = CachingCostModel<f64>;
pub type ScenarioConfigF64 = ScenarioConfig<f64>;
pub type SweepRecordF64 = SweepRecord<f64>;

pub type DemandParamsF32 = DemandParams<f32>;
pub type GameSpecF32 = GameSpec<f32>;
pub type EquilibriumF32 = Equilibrium<f32>;
pub type PopularityDistributionF32 = PopularityDistribution<f32>;
pub type CachingCostModelF32 = CachingCostModel<f32>;
pub type ScenarioConfigF32 = ScenarioConfig<f32>;
pub type SweepRecordF32 = SweepRecord<f32>;
