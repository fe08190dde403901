pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod model;
pub mod numeric;
pub mod scene;
pub mod tracking;
pub mod train;

pub use error::{Error, Result};
