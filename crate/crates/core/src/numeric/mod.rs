//! Dense kernels, seeded randomness, thin SVD and finite-difference checks.

pub mod flops;
mod gelu;
mod gradcheck;
mod matrix;
mod rng;
mod svd;

pub use gelu::{gelu, gelu_grad, gelu_in_place, gelu_scalar, GeluMode};
pub use gradcheck::{grad_check, grad_check_with_step, DEFAULT_STEP};
pub use matrix::{matmul, matmul_nt, matmul_tn, Matrix, Scalar};
pub use rng::Rng;
pub use svd::{svd_thin, SvdResult, MAX_SWEEPS};
