pub mod cli;
pub mod error;
pub mod expr;
pub mod grad;
pub mod integrate;
pub mod metrics;
pub mod rng;
pub mod search;
pub mod systems;

pub use error::{Error, Result};
