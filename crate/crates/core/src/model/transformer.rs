use crate::error::{Error, Result};
use crate::numeric::{matmul, matmul_nt, matmul_tn, Matrix, Rng};
use crate::spectral::factorize_model_ffns;

use super::attention::{attend, AttnTrace, HeadLayout};
use super::ffn::FfnTrace;
use super::{AttentionWeights, FfnKind, FfnWeights, KVCache, ModelConfig, Rotary};

pub const LN_EPS: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct LayerNorm {
    /// `1 × width`
    pub gain: Matrix,
    /// `1 × width`
    pub bias: Matrix,
}

#[derive(Clone, Debug)]
struct LnTrace {
    xhat: Matrix,
    rstd: Vec<f64>,
}

impl LayerNorm {
    pub fn new(width: usize) -> Self {
        Self {
            gain: Matrix::from_fn(1, width, |_, _| 1.0),
            bias: Matrix::zeros(1, width),
        }
    }

    fn forward_traced(&self, x: &Matrix) -> (Matrix, LnTrace) {
        let d = x.cols();
        let mut xhat = Matrix::zeros(x.rows(), d);
        let mut rstd = Vec::with_capacity(x.rows());
        let mut y = Matrix::zeros(x.rows(), d);
        for r in 0..x.rows() {
            let row = x.row(r);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let s = 1.0 / (var + LN_EPS).sqrt();
            rstd.push(s);
            let (g, b) = (self.gain.as_slice(), self.bias.as_slice());
            for c in 0..d {
                let xh = (row[c] - mean) * s;
                xhat[(r, c)] = xh;
                y[(r, c)] = xh * g[c] + b[c];
            }
        }
        (y, LnTrace { xhat, rstd })
    }

    fn forward(&self, x: &Matrix) -> Matrix {
        self.forward_traced(x).0
    }

    fn backward(&self, trace: &LnTrace, dy: &Matrix, grads: &mut LayerNorm) -> Matrix {
        let d = dy.cols();
        let mut dx = Matrix::zeros(dy.rows(), d);
        let g = self.gain.as_slice();
        for r in 0..dy.rows() {
            let (dyr, xh) = (dy.row(r), trace.xhat.row(r));
            let gg = grads.gain.as_mut_slice();
            for c in 0..d {
                gg[c] += dyr[c] * xh[c];
            }
            let gb = grads.bias.as_mut_slice();
            for c in 0..d {
                gb[c] += dyr[c];
            }
            let dxhat: Vec<f64> = (0..d).map(|c| dyr[c] * g[c]).collect();
            let m1 = dxhat.iter().sum::<f64>() / d as f64;
            let m2 = dxhat.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / d as f64;
            let s = trace.rstd[r];
            for (c, out) in dx.row_mut(r).iter_mut().enumerate() {
                *out = s * (dxhat[c] - m1 - xh[c] * m2);
            }
        }
        dx
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub ln_attn: LayerNorm,
    pub attn: AttentionWeights,
    pub ln_ffn: LayerNorm,
    pub ffn: FfnWeights,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TensorKind {
    Embedding,
    Norm,
    Linear,
}

/// Name, role and data of one parameter tensor.
pub struct TensorRef<'a> {
    pub name: String,
    pub kind: TensorKind,
    pub data: &'a Matrix,
}

pub struct TensorMut<'a> {
    pub name: String,
    pub kind: TensorKind,
    pub data: &'a mut Matrix,
}

/// Decoder-only LM: tied embedding/head, pre-norm blocks, bias-free projections.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformerLM {
    config: ModelConfig,
    /// `vocab × width`, also the output head.
    pub embedding: Matrix,
    pub blocks: Vec<Block>,
    pub ln_final: LayerNorm,
}

/// Gradients share the parameter layout of the model.
pub type Gradients = TransformerLM;

#[derive(Clone, Debug)]
pub struct LmOutput {
    /// `T × vocab`
    pub logits: Matrix,
    /// Mean next-token cross-entropy in nats; `None` for single-token input.
    pub loss: Option<f64>,
    /// Sum of per-position losses.
    pub loss_sum: f64,
    pub n_targets: usize,
}

impl LmOutput {
    pub fn perplexity(&self) -> Option<f64> {
        self.loss.map(f64::exp)
    }
}

#[derive(Clone, Debug)]
struct BlockTrace {
    ln_attn: LnTrace,
    attn: AttnTrace,
    ln_ffn: LnTrace,
    ffn: FfnTrace,
}

#[derive(Clone, Debug)]
struct TapeInner {
    tokens: Vec<u32>,
    blocks: Vec<BlockTrace>,
    ln_final: LnTrace,
    hidden: Matrix,
    probs: Matrix,
}

/// Activations recorded by a forward pass for the matching backward pass.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    inner: Option<TapeInner>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_recorded(&self) -> bool {
        self.inner.is_some()
    }
}

/// Seeded initialization. Low-rank configs first draw the dense twin from the
/// same stream and then factorize its FFN weights spectrally.
pub fn build_model(config: &ModelConfig, rng: &mut Rng) -> Result<TransformerLM> {
    config.validate()?;
    let dense_cfg = config.dense_twin();
    let std = config.init_std;
    let out_std = if config.n_layers > 0 {
        std / (2.0 * config.n_layers as f64).sqrt()
    } else {
        std
    };
    let (d, q, kv, i) = (
        config.width,
        config.q_dim,
        config.kv_dim,
        config.intermediate,
    );
    let embedding = rng.normal_matrix(config.vocab, d, std);
    let blocks = (0..config.n_layers)
        .map(|_| Block {
            ln_attn: LayerNorm::new(d),
            attn: AttentionWeights {
                wq: rng.normal_matrix(d, q, std),
                wk: rng.normal_matrix(d, kv, std),
                wv: rng.normal_matrix(d, kv, std),
                wo: rng.normal_matrix(q, d, out_std),
            },
            ln_ffn: LayerNorm::new(d),
            ffn: FfnWeights::Dense {
                w_in: rng.normal_matrix(d, i, std),
                w_out: rng.normal_matrix(i, d, out_std),
            },
        })
        .collect();
    let dense = TransformerLM {
        config: dense_cfg,
        embedding,
        blocks,
        ln_final: LayerNorm::new(d),
    };
    match config.ffn {
        FfnKind::Dense => Ok(dense),
        kind @ FfnKind::LowRank { .. } => factorize_model_ffns(&dense, kind),
    }
}

impl TransformerLM {
    pub fn new(config: &ModelConfig, seed: u64) -> Result<Self> {
        build_model(config, &mut Rng::new(seed))
    }

    /// Assemble from explicit parts; shapes are checked against `config`.
    pub fn from_parts(
        config: ModelConfig,
        embedding: Matrix,
        blocks: Vec<Block>,
        ln_final: LayerNorm,
    ) -> Result<Self> {
        config.validate()?;
        let model = Self {
            config,
            embedding,
            blocks,
            ln_final,
        };
        model.check_shapes()?;
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub(crate) fn set_config(&mut self, config: ModelConfig) {
        self.config = config;
    }

    pub fn blocks_mut(&mut self) -> &mut [Block] {
        &mut self.blocks
    }

    fn check_shapes(&self) -> Result<()> {
        let c = &self.config;
        let expected = crate::accounting::tensor_shapes(c);
        let actual: Vec<(usize, usize)> = self.tensors().iter().map(|t| t.data.shape()).collect();
        if expected != actual || self.blocks.len() != c.n_layers {
            return Err(Error::InvalidConfig(
                "tensor shapes do not match the config".into(),
            ));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    /// Number of factorized FFN matrices.
    pub fn factor_pair_count(&self) -> usize {
        self.blocks.iter().filter(|b| b.ffn.is_low_rank()).count() * 2
    }

    /// All parameter tensors in declaration order.
    pub fn tensors(&self) -> Vec<TensorRef<'_>> {
        use TensorKind::*;
        let mut out = vec![TensorRef {
            name: "embedding".into(),
            kind: Embedding,
            data: &self.embedding,
        }];
        let mut push = |name: String, kind, data| out.push(TensorRef { name, kind, data });
        for (l, b) in self.blocks.iter().enumerate() {
            push(format!("block{l}.ln_attn.gain"), Norm, &b.ln_attn.gain);
            push(format!("block{l}.ln_attn.bias"), Norm, &b.ln_attn.bias);
            push(format!("block{l}.attn.wq"), Linear, &b.attn.wq);
            push(format!("block{l}.attn.wk"), Linear, &b.attn.wk);
            push(format!("block{l}.attn.wv"), Linear, &b.attn.wv);
            push(format!("block{l}.attn.wo"), Linear, &b.attn.wo);
            push(format!("block{l}.ln_ffn.gain"), Norm, &b.ln_ffn.gain);
            push(format!("block{l}.ln_ffn.bias"), Norm, &b.ln_ffn.bias);
            match &b.ffn {
                FfnWeights::Dense { w_in, w_out } => {
                    push(format!("block{l}.ffn.w_in"), Linear, w_in);
                    push(format!("block{l}.ffn.w_out"), Linear, w_out);
                }
                FfnWeights::LowRank { w_in, w_out } => {
                    push(format!("block{l}.ffn.w_in.u"), Linear, &w_in.u);
                    push(format!("block{l}.ffn.w_in.v"), Linear, &w_in.v);
                    push(format!("block{l}.ffn.w_out.u"), Linear, &w_out.u);
                    push(format!("block{l}.ffn.w_out.v"), Linear, &w_out.v);
                }
            }
        }
        push("ln_final.gain".into(), Norm, &self.ln_final.gain);
        push("ln_final.bias".into(), Norm, &self.ln_final.bias);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        use TensorKind::*;
        let mut out = vec![TensorMut {
            name: "embedding".into(),
            kind: Embedding,
            data: &mut self.embedding,
        }];
        let mut push = |name: String, kind, data| out.push(TensorMut { name, kind, data });
        for (l, b) in self.blocks.iter_mut().enumerate() {
            push(format!("block{l}.ln_attn.gain"), Norm, &mut b.ln_attn.gain);
            push(format!("block{l}.ln_attn.bias"), Norm, &mut b.ln_attn.bias);
            push(format!("block{l}.attn.wq"), Linear, &mut b.attn.wq);
            push(format!("block{l}.attn.wk"), Linear, &mut b.attn.wk);
            push(format!("block{l}.attn.wv"), Linear, &mut b.attn.wv);
            push(format!("block{l}.attn.wo"), Linear, &mut b.attn.wo);
            push(format!("block{l}.ln_ffn.gain"), Norm, &mut b.ln_ffn.gain);
            push(format!("block{l}.ln_ffn.bias"), Norm, &mut b.ln_ffn.bias);
            match &mut b.ffn {
                FfnWeights::Dense { w_in, w_out } => {
                    push(format!("block{l}.ffn.w_in"), Linear, w_in);
                    push(format!("block{l}.ffn.w_out"), Linear, w_out);
                }
                FfnWeights::LowRank { w_in, w_out } => {
                    push(format!("block{l}.ffn.w_in.u"), Linear, &mut w_in.u);
                    push(format!("block{l}.ffn.w_in.v"), Linear, &mut w_in.v);
                    push(format!("block{l}.ffn.w_out.u"), Linear, &mut w_out.u);
                    push(format!("block{l}.ffn.w_out.v"), Linear, &mut w_out.v);
                }
            }
        }
        push("ln_final.gain".into(), Norm, &mut self.ln_final.gain);
        push("ln_final.bias".into(), Norm, &mut self.ln_final.bias);
        out
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.tensors_mut().into_iter().for_each(|t| t.data.fill(0.0));
        z
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            dst.data.add_assign(src.data)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        self.tensors_mut().into_iter().for_each(|t| t.data.scale(s));
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors()
            .iter()
            .flat_map(|t| t.data.as_slice().iter().copied())
            .collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::BadLength {
                rows: self.param_count(),
                cols: 1,
                len: flat.len(),
            });
        }
        let mut off = 0;
        for t in self.tensors_mut() {
            let n = t.data.len();
            t.data.as_mut_slice().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    fn layout(&self) -> HeadLayout {
        HeadLayout::new(&self.config)
    }

    fn rotary(&self) -> Rotary {
        Rotary::new(self.config.head_dim(), self.config.rotary_base)
    }

    fn check_tokens(&self, tokens: &[u32]) -> Result<()> {
        if let Some(&id) = tokens.iter().find(|&&t| t as usize >= self.config.vocab) {
            return Err(Error::TokenOutOfRange {
                id,
                vocab: self.config.vocab,
            });
        }
        Ok(())
    }

    fn embed(&self, tokens: &[u32]) -> Matrix {
        let d = self.config.width;
        let mut x = Matrix::zeros(tokens.len(), d);
        for (r, &t) in tokens.iter().enumerate() {
            x.row_mut(r).copy_from_slice(self.embedding.row(t as usize));
        }
        x
    }

    /// Logits for every position plus mean next-token loss.
    pub fn lm_forward(&self, tokens: &[u32]) -> Result<LmOutput> {
        self.forward(tokens, None)
    }

    /// Full-sequence forward from position 0. With a tape, records what
    /// [`TransformerLM::backward`] needs.
    pub fn forward(&self, tokens: &[u32], tape: Option<&mut Tape>) -> Result<LmOutput> {
        if tokens.is_empty() {
            return Err(Error::EmptyStream);
        }
        self.check_tokens(tokens)?;
        if tokens.len() > self.config.seq_len {
            return Err(Error::CacheOverflow {
                needed: tokens.len(),
                capacity: self.config.seq_len,
            });
        }
        let (rot, layout, mode) = (self.rotary(), self.layout(), self.config.gelu);
        let mut x = self.embed(tokens);
        let mut traces = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (h, ln_attn) = b.ln_attn.forward_traced(&x);
            let (a, attn) = b.attn.forward_traced(&h, &rot, layout)?;
            x.add_assign(&a)?;
            let (h2, ln_ffn) = b.ln_ffn.forward_traced(&x);
            let (f, ffn) = b.ffn.forward_traced(&h2, mode)?;
            x.add_assign(&f)?;
            traces.push(BlockTrace {
                ln_attn,
                attn,
                ln_ffn,
                ffn,
            });
        }
        let (hidden, ln_final) = self.ln_final.forward_traced(&x);
        let logits = matmul_nt(&hidden, &self.embedding)?;
        let (probs, loss_sum) = softmax_xent(&logits, tokens);
        let n_targets = tokens.len() - 1;
        if let Some(tape) = tape {
            tape.inner = Some(TapeInner {
                tokens: tokens.to_vec(),
                blocks: traces,
                ln_final,
                hidden,
                probs,
            });
        }
        Ok(LmOutput {
            logits,
            loss: (n_targets > 0).then(|| loss_sum / n_targets as f64),
            loss_sum,
            n_targets,
        })
    }

    /// Gradient of the mean loss of the recorded sequence.
    pub fn backward(&self, tape: &Tape) -> Result<Gradients> {
        let inner = tape.inner.as_ref().ok_or(Error::BackwardWithoutForward)?;
        let n = (inner.tokens.len() - 1).max(1);
        let mut grads = self.zeros_like();
        self.backward_into(tape, &mut grads, 1.0 / n as f64)?;
        Ok(grads)
    }

    /// Accumulate `scale · ∂(loss_sum)/∂θ` into `grads`.
    pub fn backward_into(&self, tape: &Tape, grads: &mut Gradients, scale: f64) -> Result<()> {
        let inner = tape.inner.as_ref().ok_or(Error::BackwardWithoutForward)?;
        let (rot, layout, mode) = (self.rotary(), self.layout(), self.config.gelu);
        let tokens = &inner.tokens;
        let t = tokens.len();

        let mut dlogits = inner.probs.clone();
        for r in 0..t {
            let row = dlogits.row_mut(r);
            if r + 1 < t {
                row[tokens[r + 1] as usize] -= 1.0;
                row.iter_mut().for_each(|v| *v *= scale);
            } else {
                row.fill(0.0);
            }
        }
        grads
            .embedding
            .add_assign(&matmul_tn(&dlogits, &inner.hidden)?)?;
        let dhidden = matmul(&dlogits, &self.embedding)?;
        let mut dx = self
            .ln_final
            .backward(&inner.ln_final, &dhidden, &mut grads.ln_final);

        for ((b, tr), g) in self
            .blocks
            .iter()
            .zip(&inner.blocks)
            .zip(grads.blocks.iter_mut())
            .rev()
        {
            let dh2 = b.ffn.backward(&tr.ffn, &dx, &mut g.ffn, mode)?;
            dx.add_assign(&b.ln_ffn.backward(&tr.ln_ffn, &dh2, &mut g.ln_ffn))?;
            let dh = b.attn.backward(&tr.attn, &dx, &mut g.attn, &rot, layout)?;
            dx.add_assign(&b.ln_attn.backward(&tr.ln_attn, &dh, &mut g.ln_attn))?;
        }
        for (r, &tok) in tokens.iter().enumerate() {
            let dst = grads.embedding.row_mut(tok as usize);
            for (a, &b) in dst.iter_mut().zip(dx.row(r)) {
                *a += b;
            }
        }
        Ok(())
    }

    /// Forward of `tokens` continuing from `cache`; returns their logits.
    pub fn forward_cached(&self, tokens: &[u32], cache: &mut KVCache) -> Result<Matrix> {
        self.forward_with_caches(&[tokens], std::slice::from_mut(cache))
    }

    /// One-token step; returns the next-token logits.
    pub fn decode_step(&self, cache: &mut KVCache, last_token: u32) -> Result<Vec<f64>> {
        Ok(self.forward_cached(&[last_token], cache)?.row(0).to_vec())
    }

    /// One token for each of several independent sequences, projections batched.
    pub fn decode_batch(&self, caches: &mut [KVCache], tokens: &[u32]) -> Result<Matrix> {
        let seqs: Vec<&[u32]> = tokens.chunks(1).collect();
        self.forward_with_caches(&seqs, caches)
    }

    fn forward_with_caches(&self, seqs: &[&[u32]], caches: &mut [KVCache]) -> Result<Matrix> {
        assert_eq!(seqs.len(), caches.len());
        let all: Vec<u32> = seqs.iter().flat_map(|s| s.iter().copied()).collect();
        self.check_tokens(&all)?;
        for (s, c) in seqs.iter().zip(caches.iter()) {
            c.reserve(s.len())?;
        }
        let (rot, layout, mode) = (self.rotary(), self.layout(), self.config.gelu);
        let mut x = self.embed(&all);
        for (l, b) in self.blocks.iter().enumerate() {
            let h = b.ln_attn.forward(&x);
            let q = matmul(&h, &b.attn.wq)?;
            let k = matmul(&h, &b.attn.wk)?;
            let v = matmul(&h, &b.attn.wv)?;
            let mut att = Matrix::zeros(all.len(), self.config.q_dim);
            let mut row = 0;
            for (s, cache) in seqs.iter().zip(caches.iter_mut()) {
                let (lo, hi) = (row, row + s.len());
                let past = cache.len();
                let mut qs = q.row_range(lo, hi);
                let mut ks = k.row_range(lo, hi);
                rot.rotate_rows(&mut qs, past, false);
                rot.rotate_rows(&mut ks, past, false);
                let (k_all, v_all) = cache.append(l, &ks, &v.row_range(lo, hi));
                let (o, _) = attend(&qs, &k_all, &v_all, past, layout)?;
                for r in 0..s.len() {
                    att.row_mut(lo + r).copy_from_slice(o.row(r));
                }
                row = hi;
            }
            x.add_assign(&matmul(&att, &b.attn.wo)?)?;
            let h2 = b.ln_ffn.forward(&x);
            x.add_assign(&b.ffn.forward(&h2, mode)?)?;
        }
        for (s, c) in seqs.iter().zip(caches.iter_mut()) {
            c.advance(s.len());
        }
        let hidden = self.ln_final.forward(&x);
        matmul_nt(&hidden, &self.embedding)
    }
}

/// Row softmax of `logits` and the summed next-token loss against `tokens`.
fn softmax_xent(logits: &Matrix, tokens: &[u32]) -> (Matrix, f64) {
    let mut probs = logits.clone();
    let mut loss = 0.0;
    for r in 0..logits.rows() {
        let row = probs.row_mut(r);
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        if r + 1 < tokens.len() {
            let target = tokens[r + 1] as usize;
            loss += max + sum.ln() - logits[(r, target)];
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    (probs, loss)
}
