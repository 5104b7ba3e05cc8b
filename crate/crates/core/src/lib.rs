//! Discrete martingale optimal transport on the real line.

pub mod canonical;
pub mod cli;
pub mod error;
pub mod lab;
pub mod lp;
pub mod measures;
pub mod mot;
pub mod nested;
pub mod polytope;
pub mod rearrange;
pub mod transport;

pub use error::{Error, Result};
