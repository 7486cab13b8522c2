//! Numerical laboratory for sequential minimum-norm regression on two tasks
//! related by a random orthogonal transformation.
//!
//! The crate samples the latent-space data model, fits the task-A, task-B and
//! sequential estimators in closed form, evaluates their exact risk, and runs
//! seeded Monte-Carlo sweeps that compare realized quantities with the
//! closed-form risk and forgetting bounds.

pub mod bounds;
pub mod checks;
pub mod cli;
pub mod estimators;
pub mod experiments;
pub mod linalg;
pub mod model;
pub mod report;
pub mod risk;
pub mod stats;
