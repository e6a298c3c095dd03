//! Causal rotary attention with grouped key/value heads.
//!
//! Query head `h` reads key/value head `h / (n_heads / n_kv_heads)`, so
//! consecutive query heads share a kv head. With `n_kv_heads == n_heads` this
//! is plain multi-head attention.

use crate::error::{Error, Result};
use crate::numeric::{matmul, matmul_nt, matmul_tn, Matrix};

use super::ModelConfig;

/// Rotation of consecutive pairs `(2i, 2i+1)` by `pos · base^(-2i/head_dim)`.
#[derive(Clone, Debug)]
pub struct Rotary {
    inv_freq: Vec<f64>,
}

impl Rotary {
    pub fn new(head_dim: usize, base: f64) -> Self {
        assert!(head_dim.is_multiple_of(2), "rotary needs an even head_dim");
        let inv_freq = (0..head_dim / 2)
            .map(|i| base.powf(-2.0 * i as f64 / head_dim as f64))
            .collect();
        Self { inv_freq }
    }

    pub fn head_dim(&self) -> usize {
        2 * self.inv_freq.len()
    }

    /// Rotate one head vector in place; `inverse` rotates by the negative angle.
    pub fn rotate(&self, x: &mut [f64], pos: usize, inverse: bool) {
        let sign = if inverse { -1.0 } else { 1.0 };
        for (pair, &f) in x.chunks_exact_mut(2).zip(&self.inv_freq) {
            let (sin, cos) = (sign * pos as f64 * f).sin_cos();
            let (a, b) = (pair[0], pair[1]);
            pair[0] = a * cos - b * sin;
            pair[1] = a * sin + b * cos;
        }
    }

    /// Rotate every head of every row; row `r` sits at position `start + r`.
    pub fn rotate_rows(&self, m: &mut Matrix, start: usize, inverse: bool) {
        let hd = self.head_dim();
        for r in 0..m.rows() {
            for head in m.row_mut(r).chunks_exact_mut(hd) {
                self.rotate(head, start + r, inverse);
            }
        }
    }
}

/// Rotate single-head query and key rows (row `i` at `positions[i]`).
pub fn rotary_apply(q: &Matrix, k: &Matrix, positions: &[usize], base: f64) -> (Matrix, Matrix) {
    let rot = Rotary::new(q.cols(), base);
    let mut q2 = q.clone();
    let mut k2 = k.clone();
    for (i, &p) in positions.iter().enumerate() {
        rot.rotate(q2.row_mut(i), p, false);
        rot.rotate(k2.row_mut(i), p, false);
    }
    (q2, k2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionWeights {
    /// `width × q_dim`
    pub wq: Matrix,
    /// `width × kv_dim`
    pub wk: Matrix,
    /// `width × kv_dim`
    pub wv: Matrix,
    /// `q_dim × width`
    pub wo: Matrix,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct HeadLayout {
    pub n_heads: usize,
    pub head_dim: usize,
    pub group: usize,
}

impl HeadLayout {
    pub fn new(cfg: &ModelConfig) -> Self {
        Self {
            n_heads: cfg.n_heads,
            head_dim: cfg.head_dim(),
            group: cfg.n_heads / cfg.n_kv_heads(),
        }
    }
}

/// Causal softmax attention of `q` (T×q_dim, already rotated) over `k`, `v`
/// (T_all×kv_dim). Query row `i` sits at absolute position `past + i` and sees
/// keys `0..=past+i`. Returns the concatenated head outputs and, per query
/// head, the attention probabilities (T×T_all).
pub(crate) fn attend(
    q: &Matrix,
    k: &Matrix,
    v: &Matrix,
    past: usize,
    layout: HeadLayout,
) -> Result<(Matrix, Vec<Matrix>)> {
    let (t, t_all) = (q.rows(), k.rows());
    let hd = layout.head_dim;
    let scale = 1.0 / (hd as f64).sqrt();
    let mut out = Matrix::zeros(t, q.cols());
    let mut all_probs = Vec::with_capacity(layout.n_heads);
    let mut kv_heads: Vec<Option<(Matrix, Matrix)>> = vec![None; k.cols() / hd];
    for h in 0..layout.n_heads {
        let g = h / layout.group;
        let (kh, vh) = kv_heads[g].get_or_insert_with(|| {
            (
                k.columns(g * hd, (g + 1) * hd),
                v.columns(g * hd, (g + 1) * hd),
            )
        });
        let qh = q.columns(h * hd, (h + 1) * hd);
        let mut probs = matmul_nt(&qh, kh)?;
        for i in 0..t {
            let visible = (past + i + 1).min(t_all);
            let row = probs.row_mut(i);
            let max = row[..visible]
                .iter()
                .fold(f64::NEG_INFINITY, |m, &s| m.max(s * scale));
            let mut sum = 0.0;
            for s in &mut row[..visible] {
                *s = (*s * scale - max).exp();
                sum += *s;
            }
            for s in &mut row[..visible] {
                *s /= sum;
            }
            row[visible..].fill(0.0);
        }
        let oh = matmul(&probs, vh)?;
        out.set_columns(h * hd, &oh);
        all_probs.push(probs);
    }
    Ok((out, all_probs))
}

/// Activations of one uncached attention call, kept for backward.
#[derive(Clone, Debug)]
pub(crate) struct AttnTrace {
    input: Matrix,
    q: Matrix,
    k: Matrix,
    v: Matrix,
    probs: Vec<Matrix>,
    att: Matrix,
}

impl AttentionWeights {
    pub fn zeros_like(&self) -> Self {
        let z = |m: &Matrix| Matrix::zeros(m.rows(), m.cols());
        Self {
            wq: z(&self.wq),
            wk: z(&self.wk),
            wv: z(&self.wv),
            wo: z(&self.wo),
        }
    }

    pub fn param_count(&self) -> usize {
        self.wq.len() + self.wk.len() + self.wv.len() + self.wo.len()
    }

    pub(crate) fn project(
        &self,
        h: &Matrix,
        rot: &Rotary,
        start: usize,
    ) -> Result<(Matrix, Matrix, Matrix)> {
        let mut q = matmul(h, &self.wq)?;
        let mut k = matmul(h, &self.wk)?;
        let v = matmul(h, &self.wv)?;
        rot.rotate_rows(&mut q, start, false);
        rot.rotate_rows(&mut k, start, false);
        Ok((q, k, v))
    }

    /// Full causal self-attention over `h` (positions `0..T`), no cache.
    pub(crate) fn forward_traced(
        &self,
        h: &Matrix,
        rot: &Rotary,
        layout: HeadLayout,
    ) -> Result<(Matrix, AttnTrace)> {
        let (q, k, v) = self.project(h, rot, 0)?;
        let (att, probs) = attend(&q, &k, &v, 0, layout)?;
        let out = matmul(&att, &self.wo)?;
        let trace = AttnTrace {
            input: h.clone(),
            q,
            k,
            v,
            probs,
            att,
        };
        Ok((out, trace))
    }

    pub(crate) fn backward(
        &self,
        trace: &AttnTrace,
        dout: &Matrix,
        grads: &mut AttentionWeights,
        rot: &Rotary,
        layout: HeadLayout,
    ) -> Result<Matrix> {
        let hd = layout.head_dim;
        let scale = 1.0 / (hd as f64).sqrt();
        grads.wo.add_assign(&matmul_tn(&trace.att, dout)?)?;
        let datt = matmul_nt(dout, &self.wo)?;
        let t = trace.q.rows();
        let mut dq = Matrix::zeros(t, trace.q.cols());
        let mut dk = Matrix::zeros(t, trace.k.cols());
        let mut dv = Matrix::zeros(t, trace.v.cols());
        for h in 0..layout.n_heads {
            let g = h / layout.group;
            let (lo, hi) = (g * hd, (g + 1) * hd);
            let qh = trace.q.columns(h * hd, (h + 1) * hd);
            let kh = trace.k.columns(lo, hi);
            let vh = trace.v.columns(lo, hi);
            let p = &trace.probs[h];
            let d_oh = datt.columns(h * hd, (h + 1) * hd);
            dv.add_columns(lo, &matmul_tn(p, &d_oh)?);
            let mut ds = matmul_nt(&d_oh, &vh)?;
            for i in 0..t {
                let pr = p.row(i);
                let dot: f64 = ds.row(i).iter().zip(pr).map(|(a, b)| a * b).sum();
                for (d, &pij) in ds.row_mut(i).iter_mut().zip(pr) {
                    *d = pij * (*d - dot) * scale;
                }
            }
            dq.add_columns(h * hd, &matmul(&ds, &kh)?);
            dk.add_columns(lo, &matmul_tn(&ds, &qh)?);
        }
        rot.rotate_rows(&mut dq, 0, true);
        rot.rotate_rows(&mut dk, 0, true);
        grads.wq.add_assign(&matmul_tn(&trace.input, &dq)?)?;
        grads.wk.add_assign(&matmul_tn(&trace.input, &dk)?)?;
        grads.wv.add_assign(&matmul_tn(&trace.input, &dv)?)?;
        let mut dh = matmul_nt(&dq, &self.wq)?;
        dh.add_assign(&matmul_nt(&dk, &self.wk)?)?;
        dh.add_assign(&matmul_nt(&dv, &self.wv)?)?;
        Ok(dh)
    }
}

/// Per-layer rotated keys and values of everything decoded so far.
#[derive(Clone, Debug)]
pub struct KVCache {
    keys: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    kv_dim: usize,
    len: usize,
    capacity: usize,
}

impl KVCache {
    pub fn new(config: &ModelConfig) -> Self {
        Self {
            keys: vec![Vec::new(); config.n_layers],
            values: vec![Vec::new(); config.n_layers],
            kv_dim: config.kv_dim,
            len: 0,
            capacity: config.seq_len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn kv_dim(&self) -> usize {
        self.kv_dim
    }

    pub fn clear(&mut self) {
        self.keys.iter_mut().for_each(Vec::clear);
        self.values.iter_mut().for_each(Vec::clear);
        self.len = 0;
    }

    /// Bytes a full cache of this shape occupies.
    pub fn full_bytes(config: &ModelConfig) -> usize {
        2 * config.n_layers * config.kv_dim * config.seq_len * std::mem::size_of::<f64>()
    }

    pub(crate) fn reserve(&self, new: usize) -> Result<()> {
        if self.len + new > self.capacity {
            return Err(Error::CacheOverflow {
                needed: self.len + new,
                capacity: self.capacity,
            });
        }
        Ok(())
    }

    /// Append rows for `layer` and return the layer's full key/value matrices.
    pub(crate) fn append(&mut self, layer: usize, k: &Matrix, v: &Matrix) -> (Matrix, Matrix) {
        self.keys[layer].extend_from_slice(k.as_slice());
        self.values[layer].extend_from_slice(v.as_slice());
        let rows = self.keys[layer].len() / self.kv_dim;
        (
            Matrix::new(rows, self.kv_dim, self.keys[layer].clone()).expect("whole rows"),
            Matrix::new(rows, self.kv_dim, self.values[layer].clone()).expect("whole rows"),
        )
    }

    pub(crate) fn advance(&mut self, n: usize) {
        self.len += n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Rng;

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn position_zero_is_identity() {
        let mut rng = Rng::new(1);
        let q = rng.normal_matrix(1, 8, 1.0);
        let (q2, _) = rotary_apply(&q, &q, &[0], 10000.0);
        assert_eq!(q, q2);
    }

    #[test]
    fn rotation_preserves_norm() {
        let mut rng = Rng::new(2);
        let q = rng.normal_matrix(5, 16, 1.0);
        let (q2, _) = rotary_apply(&q, &q, &[1, 7, 100, 4095, 123_456], 10000.0);
        for r in 0..5 {
            let (a, b) = (dot(q.row(r), q.row(r)), dot(q2.row(r), q2.row(r)));
            assert!((a.sqrt() - b.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn scores_depend_on_relative_position_only() {
        let mut rng = Rng::new(3);
        let rot = Rotary::new(16, 10000.0);
        let q = rng.normal_vec(16, 1.0);
        let k = rng.normal_vec(16, 1.0);
        let score = |m: usize, n: usize| {
            let (mut a, mut b) = (q.clone(), k.clone());
            rot.rotate(&mut a, m, false);
            rot.rotate(&mut b, n, false);
            dot(&a, &b)
        };
        assert!((score(5, 3) - score(7, 5)).abs() < 1e-10);
        for shift in [1, 17, 300] {
            assert!((score(9, 2) - score(9 + shift, 2 + shift)).abs() < 1e-10);
        }
    }

    #[test]
    fn inverse_undoes_rotation() {
        let mut rng = Rng::new(4);
        let rot = Rotary::new(8, 500.0);
        let x = rng.normal_vec(8, 1.0);
        let mut y = x.clone();
        rot.rotate(&mut y, 33, false);
        rot.rotate(&mut y, 33, true);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn cache_overflow() {
        let cfg = ModelConfig::dense(8, 1, 5).with_seq_len(4).with_heads(1, 1);
        let mut c = KVCache::new(&cfg);
        c.reserve(4).unwrap();
        c.advance(3);
        assert!(matches!(
            c.reserve(2),
            Err(Error::CacheOverflow {
                needed: 5,
                capacity: 4
            })
        ));
    }
}
