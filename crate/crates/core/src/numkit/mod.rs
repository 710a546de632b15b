//! Vector arithmetic, matrix-free conjugate gradient and dense helpers.

mod cg;
pub mod dense;
mod vector;

pub use cg::{
    cg_solve, CgConfig, CgResult, Diagonal, FnOperator, LinearOperator, SpdOperator,
    DEFAULT_DAMPING, DEFAULT_REL_TOLERANCE,
};
pub use vector::{axpy, deterministic_sum, dot, norm, Vector};
