//! Transformer language models whose feed-forward blocks use low-rank
//! factorized linear layers.
//!
//! The crate covers the whole loop on a desk-sized machine:
//!
//! - [`numeric`]: matmul kernels, Jacobi SVD, seeded RNG, finite-difference checks
//! - [`model`]: rotary GQA transformer with dense or low-rank FFNs, manual backward, KV cache
//! - [`spectral`]: truncated-SVD initialization of factor pairs
//! - [`accounting`]: exact parameter and matmul-FLOPs counts, token budgets
//! - [`trainer`]: AdamW with warmup + cosine, accumulation, evaluation, checkpoints
//! - [`bench`]: FFN latency sweeps and generation throughput
//! - [`scaling`]: power-law fits of loss against training compute
//! - [`cli`]: the `sffn` command line
//!
//! See `examples/` for one runnable program per capability.

pub mod accounting;
pub mod bench;
pub mod cli;
pub mod error;
pub mod kv;
pub mod model;
pub mod numeric;
pub mod scaling;
pub mod spectral;
pub mod trainer;

pub use error::{Error, Result};
