//! Dense linear algebra used by the factorization, the baselines and the
//! regression solver.

mod cg;
mod cholesky;
mod eig;
mod matrix;
mod qr;
mod svd;

pub use cg::{
    cg_solve, CgOutcome, DiagonalOperator, FnOperator, IdentityOperator, LinearOperator,
    DEFAULT_MAX_ITERS,
};
pub use cholesky::{solve_spd, Cholesky, JITTER_DOUBLINGS};
pub use eig::{eig_sym, sym_eigenvalues, SymEig};
pub use matrix::{axpy, dot, norm2, DenseMatrix};
pub use qr::qr_tall;
pub use svd::{svd_small, Svd};
