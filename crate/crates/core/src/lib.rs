//! Coverage, error-rate and ergodic analysis for ISAC cellular networks
//! modelled as Poisson point processes.
//!
//! Two independent engines are provided: [`analytic`] evaluates the coverage
//! formulas by numerical integration, [`montecarlo`] estimates the same
//! quantities by sampling network snapshots.

pub mod analytic;
pub mod error;
pub mod geometry;
pub mod model;
pub mod montecarlo;
pub mod specfun;

pub use error::{IsacError, Result};
pub use model::{BeamPattern, BeamSpec, NetworkParams, NetworkSpec, QamOrder, XiInterpretation};
