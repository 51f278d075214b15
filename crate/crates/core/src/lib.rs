//! Block-level adaptive structured (BLAST) matrices.
//!
//! A BLAST matrix tiles an `m x n` matrix into `b x b` blocks, block `(i, j)`
//! being `U_i diag(s_ij) V_j^T` with left factors shared along block-rows and
//! right factors shared along block-columns. This crate provides
//!
//! - the representation and embeddings of low-rank, block-diagonal and
//!   block low-rank matrices ([`blast`]),
//! - structured matrix-vector and batched products ([`ops`]),
//! - fitting BLAST factors to a dense matrix by plain or preconditioned
//!   alternating gradient descent ([`factorize`]),
//! - NPY, container and CSV formats ([`io`]) and synthetic convergence
//!   experiments ([`experiment`]).
//!
//! Matrix types are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below name the common instantiations.

pub mod blast;
pub mod dense;
pub mod error;
pub mod experiment;
pub mod factorize;
pub mod io;
pub mod linalg;
pub mod ops;
pub mod scalar;

pub use blast::{
    block_diagonal_embed, block_diagonal_embed_factored, blr_embed, low_rank_embed, BlastMatrix,
    BlastShape,
};
pub use dense::{relative_error, DenseMatrix};
pub use error::{Error, Result};
pub use factorize::{factorize, FactorizeConfig, FactorizeReport, Method, StepSchedule};
pub use ops::{dense_matvec, matmul, matvec, to_dense};
pub use scalar::Scalar;

pub type BlastMatrixF64 = BlastMatrix<f64>;
pub type BlastMatrixF32 = BlastMatrix<f32>;
pub type DenseMatrixF64 = DenseMatrix<f64>;
pub type DenseMatrixF32 = DenseMatrix<f32>;
