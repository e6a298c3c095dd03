//! Spectral initialization of low-rank factor pairs.
//!
//! A dense reference weight `W` (M×N) is replaced by `u` (M×r) and `v` (r×N)
//! taken from its truncated SVD, with `√σ` folded into both sides so that
//! `u·v` is the best rank-r approximation of `W` and the factors carry equal
//! Frobenius norm.

use crate::error::{Error, Result};
use crate::model::{FfnKind, FfnWeights, TransformerLM};
use crate::numeric::{matmul, svd_thin, Matrix, Scalar};

/// `W ≈ u · v` with `u: M×R`, `v: R×N`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorPair<T: Scalar = f64> {
    pub u: Matrix<T>,
    pub v: Matrix<T>,
}

impl<T: Scalar> FactorPair<T> {
    pub fn new(u: Matrix<T>, v: Matrix<T>) -> Result<Self> {
        if u.cols() != v.rows() {
            return Err(Error::ShapeMismatch {
                op: "factor pair",
                lhs: u.shape(),
                rhs: v.shape(),
            });
        }
        let rank = u.cols();
        if rank > u.rows().min(v.cols()) {
            return Err(Error::InvalidRank {
                rank,
                rows: u.rows(),
                cols: v.cols(),
            });
        }
        Ok(Self { u, v })
    }

    pub fn rank(&self) -> usize {
        self.u.cols()
    }

    /// `(M, N)` of the matrix this pair stands in for.
    pub fn dense_shape(&self) -> (usize, usize) {
        (self.u.rows(), self.v.cols())
    }

    pub fn param_count(&self) -> usize {
        self.u.len() + self.v.len()
    }

    /// Materialized `u·v`. Only used for inspection and tests.
    pub fn product(&self) -> Matrix<T> {
        matmul(&self.u, &self.v).expect("shapes checked at construction")
    }

    pub fn cast<U: Scalar>(&self) -> FactorPair<U> {
        FactorPair {
            u: self.u.cast(),
            v: self.v.cast(),
        }
    }
}

pub fn spectral_init(w: &Matrix, rank: usize) -> Result<FactorPair> {
    let (m, n) = w.shape();
    if rank == 0 || rank > m.min(n) {
        return Err(Error::InvalidRank {
            rank,
            rows: m,
            cols: n,
        });
    }
    let svd = svd_thin(w)?;
    let root: Vec<f64> = svd.sigma[..rank].iter().map(|s| s.sqrt()).collect();
    let u = Matrix::from_fn(m, rank, |i, k| svd.u[(i, k)] * root[k]);
    let v = Matrix::from_fn(rank, n, |k, j| root[k] * svd.vt[(k, j)]);
    FactorPair::new(u, v)
}

/// Replace the FFN weights of a dense model by spectral factor pairs following
/// `ffn` (block 0 stays dense when `first_block_dense`). Attention, norms and
/// embeddings are copied unchanged.
pub fn factorize_model_ffns(model: &TransformerLM, ffn: FfnKind) -> Result<TransformerLM> {
    let FfnKind::LowRank { .. } = ffn else {
        return Err(Error::InvalidConfig(
            "factorization needs a low-rank ffn kind".into(),
        ));
    };
    let mut config = model.config().clone();
    config.ffn = ffn;
    config.validate()?;
    let mut out = model.clone();
    out.set_config(config);
    for (layer, block) in out.blocks_mut().iter_mut().enumerate() {
        let Some(rank) = ffn.rank_for_layer(layer) else {
            continue;
        };
        if let FfnWeights::Dense { w_in, w_out } = &block.ffn {
            block.ffn = FfnWeights::LowRank {
                w_in: spectral_init(w_in, rank)?,
                w_out: spectral_init(w_out, rank)?,
            };
        }
    }
    Ok(out)
}
