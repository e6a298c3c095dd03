use crate::error::{Error, Result};
use crate::model::{Gradients, TensorKind, TransformerLM};

use super::TrainConfig;

/// AdamW hyper-parameters, independent of any model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl From<&TrainConfig> for AdamHyper {
    fn from(c: &TrainConfig) -> Self {
        Self {
            beta1: c.beta1,
            beta2: c.beta2,
            eps: c.eps,
            weight_decay: c.weight_decay,
        }
    }
}

/// First and second moments, one buffer per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    /// Number of updates applied so far.
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(sizes: &[usize]) -> Self {
        Self {
            step: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_model(model: &TransformerLM) -> Self {
        let sizes: Vec<usize> = model.tensors().iter().map(|t| t.data.len()).collect();
        Self::new(&sizes)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.m.iter().map(Vec::len).collect()
    }
}

/// One bias-corrected AdamW update of a single tensor; `t` is 1-based.
/// Decay is decoupled: `θ ← θ(1 − lr·λ)` before the Adam step.
#[allow(clippy::too_many_arguments)]
pub fn adamw_update(
    param: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    lr: f64,
    h: &AdamHyper,
    decay: bool,
) {
    let c1 = 1.0 - h.beta1.powi(t as i32);
    let c2 = 1.0 - h.beta2.powi(t as i32);
    let shrink = if decay {
        1.0 - lr * h.weight_decay
    } else {
        1.0
    };
    for i in 0..param.len() {
        let g = grad[i];
        m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g;
        v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
        let mh = m[i] / c1;
        let vh = v[i] / c2;
        param[i] = param[i] * shrink - lr * mh / (vh.sqrt() + h.eps);
    }
}

/// Global L2 norm over all gradient tensors.
pub fn grad_norm(grads: &Gradients) -> f64 {
    grads
        .tensors()
        .iter()
        .flat_map(|t| t.data.as_slice())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt()
}

/// Apply one AdamW step to every tensor of `model`. Linear weights (dense and
/// low-rank factors alike) are always decayed; embedding and norm tensors only
/// when the config asks for it.
pub fn adamw_step(
    model: &mut TransformerLM,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
    c: &TrainConfig,
) -> Result<()> {
    let gts = grads.tensors();
    if state.m.len() != gts.len() {
        return Err(Error::InvalidTrainConfig(
            "optimizer state does not match the model".into(),
        ));
    }
    for g in &gts {
        if g.data.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteGradient(g.name.clone()));
        }
    }
    state.step += 1;
    let h = AdamHyper::from(c);
    for (i, (p, g)) in model.tensors_mut().into_iter().zip(&gts).enumerate() {
        let decay = match p.kind {
            TensorKind::Linear => true,
            TensorKind::Embedding => c.decay_embedding,
            TensorKind::Norm => c.decay_norm,
        };
        adamw_update(
            p.data.as_mut_slice(),
            g.data.as_slice(),
            &mut state.m[i],
            &mut state.v[i],
            state.step,
            lr,
            &h,
            decay,
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    const H: AdamHyper = AdamHyper {
        beta1: 0.9,
        beta2: 0.95,
        eps: 1e-8,
        weight_decay: 0.0,
    };

    #[test]
    fn zero_grad_no_decay_is_identity() {
        let mut p = vec![0.3, -1.2];
        let (mut m, mut v) = (vec![0.0; 2], vec![0.0; 2]);
        for t in 1..=5 {
            adamw_update(&mut p, &[0.0, 0.0], &mut m, &mut v, t, 1e-2, &H, true);
        }
        assert_eq!(p, vec![0.3, -1.2]);
    }

    #[test]
    fn constant_gradient_steps_are_bounded_by_lr() {
        let lr = 1e-3;
        let mut p = vec![0.0];
        let (mut m, mut v) = (vec![0.0], vec![0.0]);
        for t in 1..=50 {
            let before = p[0];
            adamw_update(&mut p, &[1.0], &mut m, &mut v, t, lr, &H, false);
            let delta = p[0] - before;
            assert!(delta < 0.0 && delta.abs() <= lr * 1.01, "step {t}: {delta}");
        }
    }

    #[test]
    fn quadratic_bowl_descends() {
        // Reference update rule written out independently for f(θ) = θ².
        let lr = 0.05;
        let (mut th, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        let mut p = vec![1.0];
        let (mut pm, mut pv) = (vec![0.0], vec![0.0]);
        let mut prev = 1.0;
        for t in 1..=10 {
            let g = 2.0 * th;
            m = 0.9 * m + 0.1 * g;
            v = 0.95 * v + 0.05 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.95f64.powi(t));
            th -= lr * mh / (vh.sqrt() + 1e-8);

            let grad = [2.0 * p[0]];
            adamw_update(&mut p, &grad, &mut pm, &mut pv, t as u64, lr, &H, false);
            assert!((p[0] - th).abs() < 1e-15);
            assert!(p[0] * p[0] < prev);
            prev = p[0] * p[0];
        }
    }

    #[test]
    fn decoupled_decay_shrinks_parameters() {
        let h = AdamHyper {
            weight_decay: 0.1,
            ..H
        };
        let mut p = vec![2.0];
        adamw_update(&mut p, &[0.0], &mut [0.0], &mut [0.0], 1, 0.5, &h, true);
        assert!((p[0] - 2.0 * 0.95).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_names_tensor() {
        let cfg = ModelConfig::dense(8, 1, 11).with_seq_len(8);
        let mut model = TransformerLM::new(&cfg, 0).unwrap();
        let mut grads = model.zeros_like();
        grads.blocks[0].attn.wk.as_mut_slice()[3] = f64::NAN;
        let mut st = AdamState::for_model(&model);
        let err =
            adamw_step(&mut model, &grads, &mut st, 1e-3, &TrainConfig::default()).unwrap_err();
        assert!(
            matches!(err, Error::NonFiniteGradient(ref n) if n == "block0.attn.wk"),
            "{err}"
        );
        assert_eq!(st.step, 0);
    }

    #[test]
    fn decay_skips_norms_and_embedding_by_default() {
        let cfg = ModelConfig::dense(8, 1, 11).with_seq_len(8);
        let mut model = TransformerLM::new(&cfg, 0).unwrap();
        let before = model.clone();
        let grads = model.zeros_like();
        let mut st = AdamState::for_model(&model);
        adamw_step(&mut model, &grads, &mut st, 0.1, &TrainConfig::default()).unwrap();
        assert_eq!(model.embedding, before.embedding);
        assert_eq!(model.ln_final.gain, before.ln_final.gain);
        assert_ne!(model.blocks[0].attn.wq, before.blocks[0].attn.wq);
    }
}
