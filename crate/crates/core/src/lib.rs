//! Multiscale analysis and simulation of stochastic chemical reaction
//! networks: exact SSA, balance-condition checking for abundance/rate
//! exponent assignments, limiting-model construction with averaging, and
//! full-versus-reduced comparison.

pub mod cone;
pub mod gallery;
pub mod lp;
pub mod network;
pub mod ode;
pub mod parse;
pub mod rational;
pub mod reduce;
pub mod report;
pub mod rng;
pub mod scaling;
pub mod sim;

pub use network::{Network, Reaction, Species, State};
pub use scaling::ScalingSpec;
