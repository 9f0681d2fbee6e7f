//! Monte Carlo construction and statistical verification of a radial
//! Poissonian web: coalescing random paths built from Poisson marks on
//! concentric circles, their flat-level reformulation, the coordinate maps
//! and metrics that relate the two, and estimators for the quantitative laws
//! the construction is expected to satisfy (coalescence-time tails, CLT
//! variance profile, crossing-count scaling, spacing and concentration
//! bounds).

pub mod coalescence;
pub mod convergence;
pub mod error;
pub mod io;
pub mod level;
pub mod params;
pub mod radial;
pub mod rng;
pub mod stats;
pub mod transforms;

pub use error::{Error, Result};
pub use params::ModelParams;
pub use rng::RngStream;
