//! Nonlinear impulse-response analysis for multivariate Markov models.
//!
//! The crate is organised around the nonlinear autoregressive representation
//! `y_t = g(y_{t-1}; eps_t)` with i.i.d. `N(0, Id)` innovations:
//!
//! - [`model`]: the model abstraction and a zoo of concrete families;
//! - [`innovations`]: recursive conditional-CDF extraction of Gaussian and
//!   uniform nonlinear innovations, and path reconstruction;
//! - [`identified_set`]: transformations that leave `N(0, Id)` and
//!   `U[0,1]^n` invariant, and the checks that certify them;
//! - [`irf`]: IRF/PIRF term structures by common random numbers;
//! - [`bss`]: source separation from autocovariances and GCov objectives;
//! - [`diagnostics`]: Markov, strong white noise and invariance tests.

pub mod bss;
pub mod diagnostics;
pub mod error;
pub mod identified_set;
pub mod innovations;
pub mod irf;
pub mod model;
pub mod normal;
pub mod plot;
pub mod rng;
pub mod transforms;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use model::{ModelSpec, Trajectory};
