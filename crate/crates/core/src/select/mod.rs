//! Finite distributions, probabilistic selections on metric spaces and
//! combination operators.

mod dist;
mod harness;
mod level;
mod semiconvex;

pub use dist::{chi_square, Dist};
pub use harness::{convergence_harness, HarnessReport, HarnessRow, HarnessViolation};
pub use level::{metric_selection_level, MetricLevel, MuTrace};
pub use semiconvex::{
    banach_semiconvex, semiconvex_for, urysohn_semiconvex, SemiconvexOp, UrysohnCombine,
};
