//! Physics-informed neural networks for Fisher's equation with steep
//! traveling-wave fronts.
//!
//! The crate trains small fully connected networks whose loss combines data
//! at the initial and boundary lines with the PDE residual at collocation
//! points. Input derivatives are propagated as second-order jets; parameter
//! gradients come from a batched reverse sweep, checked against a scalar
//! tape and finite differences.

pub mod autodiff;
mod error;
pub mod evaluation;
pub mod gradcheck;
pub mod model;
pub mod physics;
pub mod sampling;
pub mod training;

pub use error::{Error, Result};
pub use evaluation::{aggregate, l2_error, rho_sweep, wavefront_profile, SeedStats};
pub use model::{Activation, Architecture, ModelKind, Network, NetworkConfig, ParameterVector};
pub use physics::{analytical, FisherProblem, DEFAULT_MU};
pub use sampling::{Domain, Interval, Point, RhoSpec};
pub use training::{train, RunRecord, TrainConfig};
