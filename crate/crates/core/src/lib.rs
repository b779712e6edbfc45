pub mod check;
pub mod cli;
pub mod domain;
pub mod error;
pub mod lift;
pub mod metric;
pub mod numeric;
pub mod select;
pub mod spaces;
pub mod urysohn;

pub use error::{Error, Result};
