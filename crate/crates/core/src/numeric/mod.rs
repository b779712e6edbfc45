//! Exact rationals and fast-converging streams.

mod cauchy;
mod rat;

pub use cauchy::{fc_consistency_check, fc_consistency_check_by, fc_dist, FastCauchy, SpaceTag};
pub use rat::{rat_monus, Rat};
