//! Shared oracles for the integration and acceptance tests.
#![allow(dead_code)]

use sffn::model::{FfnWeights, LayerNorm, ModelConfig, TensorKind, TransformerLM};
use sffn::numeric::{Matrix, Rng};

/// Row-vector times matrix with plain loops.
fn vecmat(x: &[f64], w: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; w.cols()];
    for (k, &xk) in x.iter().enumerate() {
        for (o, &wkj) in out.iter_mut().zip(w.row(k)) {
            *o += xk * wkj;
        }
    }
    out
}

fn layer_norm(x: &[f64], ln: &LayerNorm) -> Vec<f64> {
    let d = x.len() as f64;
    let mean = x.iter().sum::<f64>() / d;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d;
    let s = 1.0 / (var + 1e-5).sqrt();
    x.iter()
        .enumerate()
        .map(|(c, v)| (v - mean) * s * ln.gain.as_slice()[c] + ln.bias.as_slice()[c])
        .collect()
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

fn rotate(x: &mut [f64], pos: usize, base: f64) {
    let hd = x.len();
    for i in 0..hd / 2 {
        let theta = pos as f64 * base.powf(-((2 * i) as f64) / hd as f64);
        let (a, b) = (x[2 * i], x[2 * i + 1]);
        x[2 * i] = a * theta.cos() - b * theta.sin();
        x[2 * i + 1] = a * theta.sin() + b * theta.cos();
    }
}

fn ffn(x: &[f64], w: &FfnWeights) -> Vec<f64> {
    match w {
        FfnWeights::Dense { w_in, w_out } => {
            let h: Vec<f64> = vecmat(x, w_in).into_iter().map(gelu).collect();
            vecmat(&h, w_out)
        }
        FfnWeights::LowRank { w_in, w_out } => {
            let h: Vec<f64> = vecmat(&vecmat(x, &w_in.u), &w_in.v)
                .into_iter()
                .map(gelu)
                .collect();
            vecmat(&vecmat(&h, &w_out.u), &w_out.v)
        }
    }
}

/// Logits of every position, computed token by token with explicit loops and
/// an explicit per-head attention; shares no code with the library forward.
pub fn reference_logits(model: &TransformerLM, tokens: &[u32]) -> Vec<Vec<f64>> {
    let c = model.config();
    let hd = c.head_dim();
    let group = c.n_heads / c.n_kv_heads();
    let mut xs: Vec<Vec<f64>> = tokens
        .iter()
        .map(|&t| model.embedding.row(t as usize).to_vec())
        .collect();
    for b in &model.blocks {
        let hs: Vec<Vec<f64>> = xs.iter().map(|x| layer_norm(x, &b.ln_attn)).collect();
        let mut qs = Vec::new();
        let mut ks = Vec::new();
        let mut vs = Vec::new();
        for (pos, h) in hs.iter().enumerate() {
            let mut q = vecmat(h, &b.attn.wq);
            let mut k = vecmat(h, &b.attn.wk);
            for head in q.chunks_mut(hd) {
                rotate(head, pos, c.rotary_base);
            }
            for head in k.chunks_mut(hd) {
                rotate(head, pos, c.rotary_base);
            }
            qs.push(q);
            ks.push(k);
            vs.push(vecmat(h, &b.attn.wv));
        }
        for i in 0..xs.len() {
            let mut att = vec![0.0; c.q_dim];
            for head in 0..c.n_heads {
                let kvh = head / group;
                let qh = &qs[i][head * hd..(head + 1) * hd];
                let scores: Vec<f64> = (0..=i)
                    .map(|j| {
                        let kj = &ks[j][kvh * hd..(kvh + 1) * hd];
                        qh.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() / (hd as f64).sqrt()
                    })
                    .collect();
                let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = scores.iter().map(|s| (s - m).exp()).sum();
                for (j, s) in scores.iter().enumerate() {
                    let p = (s - m).exp() / z;
                    for e in 0..hd {
                        att[head * hd + e] += p * vs[j][kvh * hd + e];
                    }
                }
            }
            let o = vecmat(&att, &b.attn.wo);
            xs[i].iter_mut().zip(o).for_each(|(x, o)| *x += o);
        }
        for x in xs.iter_mut() {
            let f = ffn(&layer_norm(x, &b.ln_ffn), &b.ffn);
            x.iter_mut().zip(f).for_each(|(x, f)| *x += f);
        }
    }
    xs.iter()
        .map(|x| {
            let h = layer_norm(x, &model.ln_final);
            (0..c.vocab)
                .map(|v| {
                    h.iter()
                        .zip(model.embedding.row(v))
                        .map(|(a, b)| a * b)
                        .sum()
                })
                .collect()
        })
        .collect()
}

/// Mean next-token cross-entropy from reference logits.
pub fn reference_loss(model: &TransformerLM, tokens: &[u32]) -> f64 {
    let logits = reference_logits(model, tokens);
    let n = tokens.len() - 1;
    (0..n)
        .map(|i| {
            let row = &logits[i];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            lse - row[tokens[i + 1] as usize]
        })
        .sum::<f64>()
        / n as f64
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Toy model with every parameter (norms included) drawn at a scale that
/// keeps gradients well above finite-difference noise. Weight matrices grow
/// tenfold; each low-rank factor grows by √10 so their product does too.
pub fn toy_model(config: &ModelConfig, seed: u64) -> TransformerLM {
    let mut model = TransformerLM::new(config, seed).unwrap();
    let mut rng = Rng::new(seed ^ 0x5eed);
    for t in model.tensors_mut() {
        let factor = t.name.ends_with(".u") || t.name.ends_with(".v");
        let scale = if factor { 10f64.sqrt() } else { 10.0 };
        let is_norm = t.kind == TensorKind::Norm;
        for v in t.data.as_mut_slice() {
            *v = if is_norm {
                *v + 0.3 * rng.normal()
            } else {
                *v * scale + 0.05 * rng.normal()
            };
        }
    }
    model
}

pub fn toy_tokens(n: usize, vocab: usize, seed: u64) -> Vec<u32> {
    let mut rng = Rng::new(seed);
    (0..n).map(|_| rng.below(vocab) as u32).collect()
}

/// Max relative finite-difference error of the model's backward pass, over
/// every parameter.
pub fn model_grad_error(model: &TransformerLM, tokens: &[u32]) -> f64 {
    let mut tape = sffn::model::Tape::new();
    model.forward(tokens, Some(&mut tape)).unwrap();
    let analytic = model.backward(&tape).unwrap().to_flat();
    let theta = model.to_flat();
    let mut probe = model.clone();
    sffn::numeric::grad_check(
        |p| {
            probe.set_flat(p).unwrap();
            probe.lm_forward(tokens).unwrap().loss.unwrap()
        },
        &theta,
        &analytic,
    )
    .unwrap()
}

/// One spectral-init optimality trial on a random `m × n` matrix at rank `r`.
pub struct SpectralTrial {
    /// ‖W − UV‖_F of the spectral factors.
    pub error: f64,
    /// √(Σ_{i>r} σ_i²) from an independent SVD.
    pub tail: f64,
    /// Smallest error among the probes.
    pub best_probe: f64,
}

/// Probes alternate between fresh Gaussian factors (scaled to the matrix
/// norm) and perturbations of the spectral optimum.
pub fn spectral_trial(rng: &mut Rng, m: usize, n: usize, r: usize, probes: usize) -> SpectralTrial {
    let w = rng.normal_matrix(m, n, 1.0);
    let pair = sffn::spectral::spectral_init(&w, r).unwrap();
    let error = w.sub(&pair.product()).unwrap().frobenius_norm();

    let na = nalgebra::DMatrix::from_row_slice(m, n, w.as_slice());
    let mut sigma: Vec<f64> = na.singular_values().iter().copied().collect();
    sigma.sort_by(|a, b| b.total_cmp(a));
    let tail = sigma[r..].iter().map(|s| s * s).sum::<f64>().sqrt();

    let scale = (w.frobenius_norm() / (m * n) as f64).sqrt().max(1e-3);
    let best_probe = (0..probes)
        .map(|k| {
            let (u, v) = if k % 2 == 0 {
                (
                    rng.normal_matrix(m, r, scale),
                    rng.normal_matrix(r, n, scale),
                )
            } else {
                let mut u = pair.u.clone();
                let mut v = pair.v.clone();
                let eps = 1e-2 * (k as f64 / probes as f64 + 0.1);
                u.as_mut_slice()
                    .iter_mut()
                    .for_each(|x| *x += eps * rng.normal());
                v.as_mut_slice()
                    .iter_mut()
                    .for_each(|x| *x += eps * rng.normal());
                (u, v)
            };
            w.sub(&sffn::numeric::matmul(&u, &v).unwrap())
                .unwrap()
                .frobenius_norm()
        })
        .fold(f64::INFINITY, f64::min);
    SpectralTrial {
        error,
        tail,
        best_probe,
    }
}
