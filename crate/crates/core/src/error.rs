use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: lhs {lhs:?}, rhs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("matrix data length {len} does not match {rows}x{cols}")]
    BadLength {
        rows: usize,
        cols: usize,
        len: usize,
    },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error(
        "svd did not converge after {sweeps} sweeps (relative off-diagonal norm {off_diagonal:e})"
    )]
    SvdNotConverged { sweeps: usize, off_diagonal: f64 },

    #[error("objective is not finite at probe {index}")]
    NonFiniteProbe { index: usize },

    #[error("invalid rank {rank} for a {rows}x{cols} matrix")]
    InvalidRank {
        rank: usize,
        rows: usize,
        cols: usize,
    },

    #[error("invalid model config: {0}")]
    InvalidConfig(String),

    #[error("token id {id} out of range for vocab {vocab}")]
    TokenOutOfRange { id: u32, vocab: usize },

    #[error("kv cache overflow: {needed} positions requested, capacity {capacity}")]
    CacheOverflow { needed: usize, capacity: usize },

    #[error("backward called without a recorded forward pass")]
    BackwardWithoutForward,

    #[error("non-finite gradient in tensor {0}")]
    NonFiniteGradient(String),

    #[error("schedule step {step} outside 0..={total}")]
    StepOutOfRange { step: usize, total: usize },

    #[error("invalid training config: {0}")]
    InvalidTrainConfig(String),

    #[error(
        "token stream exhausted: step {step} needs tokens up to {needed}, stream has {available}"
    )]
    StreamExhausted {
        step: usize,
        needed: usize,
        available: usize,
    },

    #[error("token stream is empty or shorter than one window")]
    EmptyStream,

    #[error("bad token file {path}: {reason}")]
    BadTokenFile { path: PathBuf, reason: String },

    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),

    #[error("checkpoint config does not match the expected model config")]
    CheckpointConfigMismatch,

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("duplicate compute value {0:e} in scaling points")]
    DuplicateFlops(f64),

    #[error("invalid scaling point: {0}")]
    InvalidPoint(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("memory budget of {budget} bytes exceeded at smallest batch ({needed} bytes)")]
    OutOfMemory { budget: usize, needed: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
