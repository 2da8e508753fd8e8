//! Benchmark harness for the cubic-regularization solvers on joint
//! diagonalization: plan files, batch runs, trace verification and
//! summaries.

pub mod error;
pub mod plan;
pub mod runner;
pub mod summary;
pub mod verify;

pub use error::{BenchError, Result};
pub use plan::{BenchmarkPlan, Case, Solver};
pub use runner::{run_plan, RunMeta, RunOptions};
