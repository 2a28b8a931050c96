//! Gaussian-process estimation of generalized frequency response functions (GFRFs)
//! for Volterra-series models, and an exact second-order transient decomposition.

pub mod covariance;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod mdft;
pub mod signals;
pub mod transient;
pub mod tuning;
pub mod volterra;

pub use error::{Error, Result};
pub use signals::C64;
