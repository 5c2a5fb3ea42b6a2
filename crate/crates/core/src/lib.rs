//! Bayesian time-varying tensor vector autoregression.
//!
//! VAR coefficient matrices at each time point are a sum of rank-1 PARAFAC
//! bases switched on and off by binary activation paths. Paths carry an Ising
//! chain prior (equivalently an NDARMA(1) process), tensor margins carry
//! global-local shrinkage with increasing shrinkage over lags, and the model
//! is fitted with a blocked Gibbs sampler.
//!
//! Module map:
//!
//! * [`model`]: tensor bases, coefficient composition, VAR simulation
//! * [`ising`]: chain prior, NDARMA map, exact samplers
//! * [`priors`]: shrinkage hierarchy and its densities
//! * [`gibbs`]: full conditionals, chain driver, posterior summaries
//! * [`sim`]: simulation-study generators and error metrics
//! * [`io`]: configuration, CSV, fit archives, window summaries

pub mod dist;
pub mod error;
pub mod gibbs;
pub mod io;
pub mod ising;
pub mod model;
pub mod priors;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use gibbs::{run_chain, ChainConfig, FitResult, ModelState};
pub use ising::{ChainField, IsingParams, NdarmaParams};
pub use model::{ActivationPath, CoefMatrixSet, TensorComponent, TimeSeries};
pub use priors::{HyperParams, ShrinkageState};
