use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kv::{render, KvMap};

/// Optimizer, schedule and batching settings for one training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub peak_lr: f64,
    pub warmup_frac: f64,
    pub final_lr_frac: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Global-norm clip; `0` disables clipping.
    pub grad_clip: f64,
    pub global_batch_tokens: usize,
    pub micro_batch_tokens: usize,
    pub total_steps: usize,
    pub seed: u64,
    /// Wrap around at the end of the stream instead of failing.
    pub repeat: bool,
    pub decay_embedding: bool,
    pub decay_norm: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            peak_lr: 1e-3,
            warmup_frac: 0.01,
            final_lr_frac: 0.1,
            beta1: 0.9,
            beta2: 0.95,
            eps: 1e-8,
            weight_decay: 0.1,
            grad_clip: 1.0,
            global_batch_tokens: 4096,
            micro_batch_tokens: 1024,
            total_steps: 300,
            seed: 0,
            repeat: false,
            decay_embedding: false,
            decay_norm: false,
        }
    }
}

impl TrainConfig {
    pub const KEYS: [&'static str; 15] = [
        "peak_lr",
        "warmup_frac",
        "final_lr_frac",
        "beta1",
        "beta2",
        "eps",
        "weight_decay",
        "grad_clip",
        "global_batch_tokens",
        "micro_batch_tokens",
        "total_steps",
        "seed",
        "repeat",
        "decay_embedding",
        "decay_norm",
    ];

    pub fn warmup_steps(&self) -> usize {
        (self.warmup_frac * self.total_steps as f64).floor() as usize
    }

    /// Checks batching against a model's sequence length.
    pub fn validate(&self, seq_len: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidTrainConfig(m));
        if !(0.0..1.0).contains(&self.warmup_frac) {
            return bad(format!("warmup_frac {} not in [0, 1)", self.warmup_frac));
        }
        if !(0.0..=1.0).contains(&self.final_lr_frac) {
            return bad(format!(
                "final_lr_frac {} not in [0, 1]",
                self.final_lr_frac
            ));
        }
        if !(self.peak_lr > 0.0 && self.peak_lr.is_finite()) {
            return bad(format!("peak_lr {} must be positive", self.peak_lr));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("betas must lie in [0, 1)".into());
        }
        if self.total_steps == 0 {
            return bad("total_steps must be positive".into());
        }
        if self.micro_batch_tokens == 0
            || !self
                .global_batch_tokens
                .is_multiple_of(self.micro_batch_tokens)
        {
            return bad(format!(
                "micro_batch_tokens {} must divide global_batch_tokens {}",
                self.micro_batch_tokens, self.global_batch_tokens
            ));
        }
        if seq_len == 0 || !self.micro_batch_tokens.is_multiple_of(seq_len) {
            return bad(format!(
                "micro_batch_tokens {} must be a multiple of seq_len {seq_len}",
                self.micro_batch_tokens
            ));
        }
        Ok(())
    }

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("peak_lr", self.peak_lr.to_string()),
            ("warmup_frac", self.warmup_frac.to_string()),
            ("final_lr_frac", self.final_lr_frac.to_string()),
            ("beta1", self.beta1.to_string()),
            ("beta2", self.beta2.to_string()),
            ("eps", self.eps.to_string()),
            ("weight_decay", self.weight_decay.to_string()),
            ("grad_clip", self.grad_clip.to_string()),
            ("global_batch_tokens", self.global_batch_tokens.to_string()),
            ("micro_batch_tokens", self.micro_batch_tokens.to_string()),
            ("total_steps", self.total_steps.to_string()),
            ("seed", self.seed.to_string()),
            ("repeat", self.repeat.to_string()),
            ("decay_embedding", self.decay_embedding.to_string()),
            ("decay_norm", self.decay_norm.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        render(&self.to_pairs())
    }

    /// Overlay the training keys present in `map` onto `self`.
    pub fn apply_kv(mut self, map: &KvMap) -> Result<Self> {
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = map.get(stringify!($field))? {
                    self.$field = v;
                }
            )*};
        }
        take!(
            peak_lr,
            warmup_frac,
            final_lr_frac,
            beta1,
            beta2,
            eps,
            weight_decay,
            grad_clip,
            global_batch_tokens,
            micro_batch_tokens,
            total_steps,
            seed,
            repeat,
            decay_embedding,
            decay_norm
        );
        Ok(self)
    }
}

/// Linear warmup to `peak_lr`, then cosine decay to `final_lr_frac · peak_lr`
/// at `total_steps`.
pub fn lr_at(step: usize, c: &TrainConfig) -> Result<f64> {
    if step > c.total_steps {
        return Err(Error::StepOutOfRange {
            step,
            total: c.total_steps,
        });
    }
    let warm = c.warmup_steps();
    if step < warm {
        return Ok(c.peak_lr * step as f64 / warm as f64);
    }
    let floor = c.final_lr_frac * c.peak_lr;
    let span = c.total_steps - warm;
    if span == 0 {
        return Ok(c.peak_lr);
    }
    let p = (step - warm) as f64 / span as f64;
    // Written relative to the peak so that p = 0 returns it without rounding.
    Ok(c.peak_lr - (c.peak_lr - floor) * 0.5 * (1.0 - (PI * p).cos()))
}
