//! Contingent-valuation estimation with the one-and-one-half-bounded
//! dichotomous-choice spike model.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix it to double precision, which is what the CLI and the
//! survey service use.
//!
//! ```
//! use cvm_core::{data, estimation, FitOptions, ModelSpec};
//!
//! let cells = data::table3_fixture();
//! let obs = data::cells_to_observations::<f64>(&cells, &ModelSpec::default()).unwrap();
//! let fit = estimation::fit(&obs, &ModelSpec::default(), &FitOptions::default()).unwrap();
//! assert!((fit.mean_wtp - 7222.55).abs() < 1.0);
//! ```

// `!(x > 0)` style checks are deliberate: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod model;
pub mod scalar;
pub mod uncertainty;
pub mod valuation;

pub use error::{CvmError, Result};
pub use estimation::{fit, wald_joint, DeltaEstimate, FitOptions, FitResult, ModelSpec, WaldTest};
pub use linalg::SquareMatrix;
pub use model::{
    log_likelihood, log_likelihood_gradient, mean_wtp, outcome_to_interval, prob_yes, spike_cdf, spike_probability,
    Arm, BidPair, CensorKind, CensorObservation, Observation, Outcome, SpikeParams,
};
pub use scalar::Scalar;
pub use uncertainty::{krinsky_robb_ci, simulate_population, KrinskyRobbConfig, KrinskyRobbResult};
pub use valuation::{aggregate_value, NationalValue};

pub type SpikeParams64 = SpikeParams<f64>;
pub type SpikeParams32 = SpikeParams<f32>;
pub type Observation64 = Observation<f64>;
pub type CensorObservation64 = CensorObservation<f64>;
pub type FitResult64 = FitResult<f64>;
pub type FitResult32 = FitResult<f32>;
pub type KrinskyRobbResult64 = KrinskyRobbResult<f64>;
pub type Matrix64 = SquareMatrix<f64>;
