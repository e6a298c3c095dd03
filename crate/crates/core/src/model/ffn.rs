use crate::error::Result;
use crate::numeric::{
    gelu_grad, gelu_in_place, matmul, matmul_nt, matmul_tn, GeluMode, Matrix, Scalar,
};
use crate::spectral::FactorPair;

/// Weights of one feed-forward block, `width → intermediate → width`.
/// Low-rank layers are applied as two thin products and never materialized.
#[derive(Clone, Debug, PartialEq)]
pub enum FfnWeights<T: Scalar = f64> {
    Dense {
        w_in: Matrix<T>,
        w_out: Matrix<T>,
    },
    LowRank {
        w_in: FactorPair<T>,
        w_out: FactorPair<T>,
    },
}

/// Activations kept for the backward pass.
#[derive(Clone, Debug)]
pub(crate) struct FfnTrace {
    input: Matrix,
    /// `x·u₁` (low-rank only).
    inner_in: Option<Matrix>,
    pre_act: Matrix,
    act: Matrix,
    /// `gelu(z)·u₂` (low-rank only).
    inner_out: Option<Matrix>,
}

fn apply<T: Scalar>(x: &Matrix<T>, w: &FactorPair<T>) -> Result<(Matrix<T>, Matrix<T>)> {
    let inner = matmul(x, &w.u)?;
    let out = matmul(&inner, &w.v)?;
    Ok((inner, out))
}

impl<T: Scalar> FfnWeights<T> {
    pub fn is_low_rank(&self) -> bool {
        matches!(self, FfnWeights::LowRank { .. })
    }

    pub fn param_count(&self) -> usize {
        match self {
            FfnWeights::Dense { w_in, w_out } => w_in.len() + w_out.len(),
            FfnWeights::LowRank { w_in, w_out } => w_in.param_count() + w_out.param_count(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let z = |m: &Matrix<T>| Matrix::zeros(m.rows(), m.cols());
        match self {
            FfnWeights::Dense { w_in, w_out } => FfnWeights::Dense {
                w_in: z(w_in),
                w_out: z(w_out),
            },
            FfnWeights::LowRank { w_in, w_out } => FfnWeights::LowRank {
                w_in: FactorPair {
                    u: z(&w_in.u),
                    v: z(&w_in.v),
                },
                w_out: FactorPair {
                    u: z(&w_out.u),
                    v: z(&w_out.v),
                },
            },
        }
    }

    pub fn width(&self) -> usize {
        match self {
            FfnWeights::Dense { w_in, .. } => w_in.rows(),
            FfnWeights::LowRank { w_in, .. } => w_in.u.rows(),
        }
    }

    /// Rows of `x` are tokens.
    pub fn forward(&self, x: &Matrix<T>, mode: GeluMode) -> Result<Matrix<T>> {
        match self {
            FfnWeights::Dense { w_in, w_out } => {
                let mut h = matmul(x, w_in)?;
                gelu_in_place(h.as_mut_slice(), mode);
                matmul(&h, w_out)
            }
            FfnWeights::LowRank { w_in, w_out } => {
                let (_, mut h) = apply(x, w_in)?;
                gelu_in_place(h.as_mut_slice(), mode);
                Ok(apply(&h, w_out)?.1)
            }
        }
    }

    pub fn cast<U: Scalar>(&self) -> FfnWeights<U> {
        match self {
            FfnWeights::Dense { w_in, w_out } => FfnWeights::Dense {
                w_in: w_in.cast(),
                w_out: w_out.cast(),
            },
            FfnWeights::LowRank { w_in, w_out } => FfnWeights::LowRank {
                w_in: w_in.cast(),
                w_out: w_out.cast(),
            },
        }
    }
}

impl FfnWeights<f64> {
    pub(crate) fn forward_traced(&self, x: &Matrix, mode: GeluMode) -> Result<(Matrix, FfnTrace)> {
        let (inner_in, pre_act) = match self {
            FfnWeights::Dense { w_in, .. } => (None, matmul(x, w_in)?),
            FfnWeights::LowRank { w_in, .. } => {
                let (inner, z) = apply(x, w_in)?;
                (Some(inner), z)
            }
        };
        let mut act = pre_act.clone();
        gelu_in_place(act.as_mut_slice(), mode);
        let (inner_out, y) = match self {
            FfnWeights::Dense { w_out, .. } => (None, matmul(&act, w_out)?),
            FfnWeights::LowRank { w_out, .. } => {
                let (inner, y) = apply(&act, w_out)?;
                (Some(inner), y)
            }
        };
        let trace = FfnTrace {
            input: x.clone(),
            inner_in,
            pre_act,
            act,
            inner_out,
        };
        Ok((y, trace))
    }

    /// Accumulates parameter gradients into `grads` and returns `dL/dx`.
    pub(crate) fn backward(
        &self,
        trace: &FfnTrace,
        dy: &Matrix,
        grads: &mut FfnWeights,
        mode: GeluMode,
    ) -> Result<Matrix> {
        let mut d_act = match (self, &mut *grads) {
            (FfnWeights::Dense { w_out, .. }, FfnWeights::Dense { w_out: g_out, .. }) => {
                g_out.add_assign(&matmul_tn(&trace.act, dy)?)?;
                matmul_nt(dy, w_out)?
            }
            (FfnWeights::LowRank { w_out, .. }, FfnWeights::LowRank { w_out: g_out, .. }) => {
                let inner = trace.inner_out.as_ref().expect("low-rank trace");
                g_out.v.add_assign(&matmul_tn(inner, dy)?)?;
                let d_inner = matmul_nt(dy, &w_out.v)?;
                g_out.u.add_assign(&matmul_tn(&trace.act, &d_inner)?)?;
                matmul_nt(&d_inner, &w_out.u)?
            }
            _ => unreachable!("gradient buffers mirror the weights"),
        };
        for (d, &z) in d_act
            .as_mut_slice()
            .iter_mut()
            .zip(trace.pre_act.as_slice())
        {
            *d *= gelu_grad(z, mode);
        }
        let d_pre = d_act;
        match (self, grads) {
            (FfnWeights::Dense { w_in, .. }, FfnWeights::Dense { w_in: g_in, .. }) => {
                g_in.add_assign(&matmul_tn(&trace.input, &d_pre)?)?;
                matmul_nt(&d_pre, w_in)
            }
            (FfnWeights::LowRank { w_in, .. }, FfnWeights::LowRank { w_in: g_in, .. }) => {
                let inner = trace.inner_in.as_ref().expect("low-rank trace");
                g_in.v.add_assign(&matmul_tn(inner, &d_pre)?)?;
                let d_inner = matmul_nt(&d_pre, &w_in.v)?;
                g_in.u.add_assign(&matmul_tn(&trace.input, &d_inner)?)?;
                matmul_nt(&d_inner, &w_in.u)
            }
            _ => unreachable!("gradient buffers mirror the weights"),
        }
    }
}

/// Free-function form of [`FfnWeights::forward`] with exact GeLU.
pub fn ffn_forward<T: Scalar>(x: &Matrix<T>, weights: &FfnWeights<T>) -> Result<Matrix<T>> {
    weights.forward(x, GeluMode::Exact)
}
