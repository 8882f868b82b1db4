//! Self-excited threshold Poisson autoregression (SETPAR) for count series.
//!
//! The conditional intensity follows one of two linear recursions depending
//! on whether the previous count exceeds an integer threshold `r`. The crate
//! provides simulation, conditional maximum likelihood with threshold search,
//! the score and information matrices, residual diagnostics, forecasting and
//! a parallel Monte Carlo driver.

pub mod diagnostics;
pub mod error;
pub mod estimation;
pub mod likelihood;
pub mod mc_study;
pub mod model;
pub mod optimizer;
pub mod poisson;
pub mod rng;

pub use error::{Error, Result};
pub use model::{CountSeries, IntensityPath, MultiRegimeParams, Regime, RegimeParams, SetparParams};
