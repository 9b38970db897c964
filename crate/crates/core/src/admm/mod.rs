//! Model-based solver for the l1-synthesis relaxation of blind deconvolution.

mod lifted;
mod prox;
mod solver;
mod woodbury;

pub use lifted::{build_lifted, recover_sources, regularize_z, LiftedOperator, EXPLICIT_LIMIT, Z_FLOOR};
pub use prox::{shrink, soft_threshold};
pub use solver::{admm_solve, AdmmConfig, AdmmSolver, AdmmState, IterRecord};
pub use woodbury::{woodbury_solve, WoodburyFactor};
