//! Laguerre–Freud equations and Toda flows for hypergeometric discrete weights.

pub mod error;
pub mod hankel;
pub mod lf;
pub mod operators;
pub mod pascal;
pub mod precision;
pub mod toda;
pub mod tracked;
pub mod verify;
pub mod report;
pub mod cli;
pub mod weights;

pub use error::{Error, Result};
pub use precision::PrecisionContext;
