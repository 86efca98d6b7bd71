//! Nonlinear permanent market impact.
//!
//! # Sign convention
//!
//! Inventory `q` is in shares and `v = -dq/dt` is the trading rate. A
//! liquidation from `q0 > 0` to `q(T) = 0` is a **sell**: `v > 0`, the price
//! is pushed down by `F(q0)` and slippage is positive. A negative `q0` is a
//! buy and flips every signed quantity. Units are abstract but consistent
//! (shares, price, time).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arbitrage;
pub mod error;
pub mod estimation;
pub mod impact;
pub mod io;
pub mod model;
pub mod optim;
pub mod quadrature;
pub mod rng;
pub mod simulator;
pub mod stats;
pub mod trajectory;

pub use arbitrage::{
    expected_round_trip_pnl, search_arbitrage, Block, ImpactRegime, PermanentRegime, RoundTripStrategy, SearchBounds,
    SearchConfig, SearchResult,
};
pub use error::{Error, Result};
pub use estimation::{
    fit_instantaneous, fit_permanent, generate_dataset, observable_y1, observable_y2, residual_diagnostics,
    DatasetDesign, FitResult, MetaorderRecord,
};
pub use impact::{InstantaneousImpact, PermanentImpact, VelocityImpact};
pub use model::{
    cumulative_cost, error_covariance, expected_liquidation_cash_powerlaw, expected_permanent_shift,
    expected_terminal_cash, Covariance2, ModelParams,
};
pub use simulator::{
    run_ensemble, simulate_outcome, simulate_path, verify_covariance, CovarianceReport, EnsembleStats, GridConfig,
    Observable, PathOutcome, SimulatedPath,
};
pub use trajectory::{Schedule, Segment, Trajectory};
