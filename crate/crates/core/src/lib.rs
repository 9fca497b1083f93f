//! Cure-rate estimation for loan portfolios.
//!
//! The pipeline turns loan-tape snapshots into a portfolio cure rate in
//! five steps:
//!
//! 1. [`loan_tape`] — map each loan to a delinquency state and pair
//!    annual snapshots into observed transitions;
//! 2. [`chain`] — estimate the row-stochastic transition matrix, put it
//!    in canonical block form, and check that every non-absorbing state
//!    is transient (chains with closed delinquency classes are diagnosed
//!    as cyclic and the method refuses to proceed);
//! 3. [`absorption`] — invert `I - S` to get cure probabilities per
//!    state, expected resolution times and early-warning visit times;
//! 4. [`survival`] — fit a Weibull survival curve through the per-month
//!    cure probabilities and read the cure rate off the curve at the NPL
//!    threshold;
//! 5. [`simulate`] — cross-check the closed-form results with a
//!    seed-deterministic Monte Carlo path simulator.
//!
//! All numerical code is generic over [`scalar::Scalar`] (implemented by
//! `f32` and `f64`); the `*64` aliases below fix the scalar for ordinary
//! use.

pub mod absorption;
pub mod chain;
pub mod diagnostics;
pub mod loan_tape;
pub mod matrix;
pub mod scalar;
pub mod simulate;
pub mod survival;
pub mod synth;

pub use scalar::Scalar;

/// Default-precision aliases for the main pipeline types.
pub type Matrix64 = matrix::Matrix<f64>;
pub type ChainConfig64 = loan_tape::ChainConfig<f64>;
pub type ObservedTransition64 = loan_tape::ObservedTransition<f64>;
pub type TransitionMatrix64 = chain::TransitionMatrix<f64>;
pub type Blocks64 = chain::Blocks<f64>;
pub type EstimatedMatrix64 = chain::EstimatedMatrix<f64>;
pub type AbsorptionResult64 = absorption::AbsorptionResult<f64>;
pub type SurvivalPoints64 = survival::SurvivalPoints<f64>;
pub type WeibullFit64 = survival::WeibullFit<f64>;
pub type HazardProfile64 = survival::HazardProfile<f64>;
pub type OccupancyProjection64 = simulate::OccupancyProjection<f64>;

/// Single-precision aliases, mainly useful to demonstrate that the math
/// is scalar-generic.
pub type Matrix32 = matrix::Matrix<f32>;
pub type ChainConfig32 = loan_tape::ChainConfig<f32>;
pub type TransitionMatrix32 = chain::TransitionMatrix<f32>;
pub type AbsorptionResult32 = absorption::AbsorptionResult<f32>;
pub type WeibullFit32 = survival::WeibullFit<f32>;
