//! Dense linear algebra substrate: matrices and SVD.

mod matrix;
mod svd;

pub use matrix::{dot, norm2, Matrix};
pub use svd::{singular_value_curve, svd, SvdResult};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix dimensions must be positive, got {rows}x{cols}")]
    EmptyMatrix { rows: usize, cols: usize },
    #[error("entry buffer of length {len} does not match {rows}x{cols}")]
    SizeMismatch { rows: usize, cols: usize, len: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("SVD did not converge for a {rows}x{cols} matrix after {sweeps} sweeps")]
    SvdNonConvergence {
        rows: usize,
        cols: usize,
        sweeps: usize,
    },
}
