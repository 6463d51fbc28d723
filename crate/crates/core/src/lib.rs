pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod eval;
pub mod generator;
pub mod ink;
pub mod mixture;
pub mod nn;
pub mod pipeline;
pub mod ranking;

pub use error::{Error, Result};
