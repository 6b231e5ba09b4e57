//! Bias/variance decomposition laboratory for overparameterized estimators.
//!
//! The crate trains an estimator three times on one dataset -- noisy
//! responses, clean responses, pure-noise responses -- from a shared
//! initialization, and studies how the excess risk of the first run is
//! controlled by the other two. See `examples/` for runnable entry points
//! covering each capability.

pub mod bounds;
pub mod decomp;
pub mod error;
pub mod harness;
pub mod linreg;
pub mod matrec;
pub mod nn;
pub mod problem;
pub mod seed;

pub use error::{Error, Result};
