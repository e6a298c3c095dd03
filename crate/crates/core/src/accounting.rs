//! Exact parameter counts, matmul-FLOPs accounting and token budgets.
//!
//! Only matrix multiplications are counted. A forward pass over `s` tokens
//! costs `2·P_matmul` per token for the projections, `2·vocab·width` for the
//! tied logits head and `4·s·q_dim` per layer for `QKᵀ` and `A·V` (evaluated
//! at the full query-head width, also under grouped kv heads). Training is
//! three forward passes' worth of matmul work.

use std::fmt::Write as _;

use crate::model::ModelConfig;

/// Training tokens allotted per parameter.
pub const TOKENS_PER_PARAM: f64 = 20.0;

/// Global batch of the reference runs, in tokens (512 sequences of 1024).
pub const REFERENCE_BATCH_TOKENS: u64 = 524_288;

/// Backward costs two forwards.
pub const TRAIN_FACTOR: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamBreakdown {
    pub embedding: u64,
    pub attention: u64,
    pub ffn: u64,
    pub layernorm: u64,
    pub total: u64,
}

impl ParamBreakdown {
    pub fn rows(&self) -> [(&'static str, u64); 5] {
        [
            ("embedding", self.embedding),
            ("attention", self.attention),
            ("ffn", self.ffn),
            ("layernorm", self.layernorm),
            ("total", self.total),
        ]
    }

    pub fn to_table(&self) -> String {
        let mut s = format!("{:<12} {:>16} {:>10}\n", "component", "params", "millions");
        for (name, n) in self.rows() {
            let _ = writeln!(s, "{name:<12} {n:>16} {:>10.2}", n as f64 / 1e6);
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("component,count\n");
        for (name, n) in self.rows() {
            let _ = writeln!(s, "{name},{n}");
        }
        s
    }
}

fn attention_params_per_layer(c: &ModelConfig) -> u64 {
    let (d, q, kv) = (c.width as u64, c.q_dim as u64, c.kv_dim as u64);
    d * q + 2 * d * kv + q * d
}

fn ffn_params_for_layer(c: &ModelConfig, layer: usize) -> u64 {
    let (d, i) = (c.width as u64, c.intermediate as u64);
    match c.ffn.rank_for_layer(layer) {
        None => 2 * d * i,
        Some(r) => 2 * (d + i) * r as u64,
    }
}

pub fn count_params(c: &ModelConfig) -> ParamBreakdown {
    let d = c.width as u64;
    let embedding = c.vocab as u64 * d;
    let attention = c.n_layers as u64 * attention_params_per_layer(c);
    let ffn = (0..c.n_layers).map(|l| ffn_params_for_layer(c, l)).sum();
    let layernorm = (2 * c.n_layers as u64 + 1) * 2 * d;
    ParamBreakdown {
        embedding,
        attention,
        ffn,
        layernorm,
        total: embedding + attention + ffn + layernorm,
    }
}

/// Shapes of every parameter tensor in declaration order, mirroring
/// `TransformerLM::tensors`.
pub fn tensor_shapes(c: &ModelConfig) -> Vec<(usize, usize)> {
    let (d, q, kv, i) = (c.width, c.q_dim, c.kv_dim, c.intermediate);
    let mut out = vec![(c.vocab, d)];
    for l in 0..c.n_layers {
        out.extend([
            (1, d),
            (1, d),
            (d, q),
            (d, kv),
            (d, kv),
            (q, d),
            (1, d),
            (1, d),
        ]);
        match c.ffn.rank_for_layer(l) {
            None => out.extend([(d, i), (i, d)]),
            Some(r) => out.extend([(d, r), (r, i), (i, r), (r, d)]),
        }
    }
    out.extend([(1, d), (1, d)]);
    out
}

/// Fraction of a dense `d × intermediate` layer kept by rank `r` factors.
pub fn lowrank_ratio(d: usize, intermediate: usize, r: usize) -> f64 {
    ((d + intermediate) * r) as f64 / (d * intermediate) as f64
}

/// Rank at which factors stop saving parameters.
pub fn break_even_rank(d: usize, intermediate: usize) -> f64 {
    (d * intermediate) as f64 / (d + intermediate) as f64
}

/// Matmul parameters (everything multiplied per token except the head).
pub fn matmul_params(c: &ModelConfig) -> u64 {
    let p = count_params(c);
    p.attention + p.ffn
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlopsBreakdown {
    pub seq_len: usize,
    /// `2 · matmul params`
    pub projections_per_token: u64,
    /// `4 · seq_len · q_dim · layers`
    pub attention_quadratic_per_token: u64,
    /// `2 · vocab · width`
    pub logits_per_token: u64,
    pub fwd_per_token: u64,
    pub tokens: f64,
    pub train_total: f64,
}

impl FlopsBreakdown {
    pub fn train_total_for(&self, tokens: f64) -> f64 {
        TRAIN_FACTOR * self.fwd_per_token as f64 * tokens
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seq_len                     {}", self.seq_len);
        let _ = writeln!(
            s,
            "projections / token         {}",
            self.projections_per_token
        );
        let _ = writeln!(
            s,
            "attention (QK, AV) / token  {}",
            self.attention_quadratic_per_token
        );
        let _ = writeln!(s, "logits / token              {}", self.logits_per_token);
        let _ = writeln!(s, "forward / token             {}", self.fwd_per_token);
        let _ = writeln!(s, "tokens                      {:.4e}", self.tokens);
        let _ = writeln!(s, "training FLOPs              {:.4e}", self.train_total);
        s
    }

    pub fn to_csv(&self) -> String {
        format!(
            "component,count\nprojections_per_token,{}\nattention_per_token,{}\nlogits_per_token,{}\nfwd_per_token,{}\ntokens,{}\ntrain_total,{:e}\n",
            self.projections_per_token,
            self.attention_quadratic_per_token,
            self.logits_per_token,
            self.fwd_per_token,
            self.tokens,
            self.train_total
        )
    }
}

pub fn training_flops(c: &ModelConfig, tokens: f64, seq_len: usize) -> FlopsBreakdown {
    let projections = 2 * matmul_params(c);
    let quadratic = c.n_layers as u64 * 4 * seq_len as u64 * c.q_dim as u64;
    let logits = 2 * c.vocab as u64 * c.width as u64;
    let fwd = projections + quadratic + logits;
    FlopsBreakdown {
        seq_len,
        projections_per_token: projections,
        attention_quadratic_per_token: quadratic,
        logits_per_token: logits,
        fwd_per_token: fwd,
        tokens,
        train_total: TRAIN_FACTOR * fwd as f64 * tokens,
    }
}

/// Exact matmul FLOPs of a forward over `new` tokens that attend to `past`
/// cached positions plus themselves (logits for every new token).
pub fn forward_flops(c: &ModelConfig, new: usize, past: usize) -> u64 {
    let (new, ctx) = (new as u64, (past + new) as u64);
    new * (2 * matmul_params(c) + 2 * c.vocab as u64 * c.width as u64)
        + c.n_layers as u64 * 4 * new * ctx * c.q_dim as u64
}

/// FLOPs of one standalone FFN block over `n_tokens`; `rank = None` is dense.
pub fn ffn_flops(d: usize, intermediate: usize, rank: Option<usize>, n_tokens: usize) -> u64 {
    let per_token = match rank {
        None => 2 * d * intermediate,
        Some(r) => 2 * (d + intermediate) * r,
    };
    2 * (per_token * n_tokens) as u64
}

pub fn tokens_for_params(params: f64) -> f64 {
    TOKENS_PER_PARAM * params
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BudgetPlan {
    pub params: u64,
    pub flops_budget: f64,
    pub fwd_per_token: u64,
    /// `budget / (3 · fwd_per_token)`
    pub tokens: f64,
    /// `tokens` rounded to 0.1B.
    pub tokens_rounded: f64,
    /// Optimizer steps at [`REFERENCE_BATCH_TOKENS`] per step.
    pub steps: u64,
}

impl BudgetPlan {
    pub fn to_table(&self) -> String {
        format!(
            "params          {} ({:.1}M)\nflops budget    {:.3e}\nfwd / token     {}\ntokens          {:.4e} ({:.1}B)\nsteps @ {}   {}\n",
            self.params,
            self.params as f64 / 1e6,
            self.flops_budget,
            self.fwd_per_token,
            self.tokens,
            self.tokens_rounded / 1e9,
            REFERENCE_BATCH_TOKENS,
            self.steps
        )
    }
}

pub fn round_to_tenth_billion(tokens: f64) -> f64 {
    (tokens / 1e8).round() * 1e8
}

pub fn tokens_for_flops_budget(c: &ModelConfig, budget: f64) -> BudgetPlan {
    let fwd = training_flops(c, 0.0, c.seq_len).fwd_per_token;
    let tokens = budget / (TRAIN_FACTOR * fwd as f64);
    BudgetPlan {
        params: count_params(c).total,
        flops_budget: budget,
        fwd_per_token: fwd,
        tokens,
        tokens_rounded: round_to_tenth_billion(tokens),
        steps: (tokens / REFERENCE_BATCH_TOKENS as f64).ceil() as u64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preset(name: &str) -> ModelConfig {
        ModelConfig::preset(name).unwrap()
    }

    #[test]
    fn small_preset_breakdown() {
        let p = count_params(&preset("s"));
        assert_eq!(p.embedding, 32000 * 768);
        assert_eq!(p.ffn, 12 * 2 * 768 * 3072);
        assert!((p.ffn as f64 / 1e6 - 56.6).abs() < 0.05);
        assert!((p.total as f64 / 1e6 - 109.6).abs() < 0.1);
        assert_eq!(p.total, p.embedding + p.attention + p.ffn + p.layernorm);
    }

    #[test]
    fn small_preset_low_rank() {
        let p = count_params(&preset("s").with_low_rank(384));
        let dense_block = 2 * 768 * 3072;
        let lr_block = 2 * (768 + 3072) * 384;
        assert_eq!(p.ffn, dense_block + 11 * lr_block);
        assert!((p.ffn as f64 / 1e6 - 37.2).abs() < 0.05);
        assert!((p.total as f64 / 1e6 - 90.0).abs() < 0.5);
    }

    #[test]
    fn embedding_only() {
        let p = count_params(&ModelConfig::dense(64, 0, 10));
        assert_eq!(p.embedding, 640);
        assert_eq!(p.attention + p.ffn, 0);
    }

    #[test]
    fn ratios() {
        assert_eq!(lowrank_ratio(768, 3072, 384), 0.625);
        assert_eq!(lowrank_ratio(768, 3072, 192), 0.3125);
        // break-even for d=6, I=3 is exactly 2
        assert_eq!(break_even_rank(6, 3), 2.0);
        assert_eq!(lowrank_ratio(6, 3, 2), 1.0);
        for r in 1..6 {
            assert_eq!(
                lowrank_ratio(12, 24, r) < 1.0,
                (r as f64) < break_even_rank(12, 24)
            );
        }
    }

    #[test]
    fn flops_linear_in_tokens() {
        let c = preset("m");
        let a = training_flops(&c, 1e9, 1024);
        let b = training_flops(&c, 3e9, 1024);
        assert_eq!(b.train_total, 3.0 * a.train_total);
        assert_eq!(a.train_total_for(3e9), b.train_total);
    }

    #[test]
    fn forward_flops_agrees_with_per_token() {
        let c = preset("s");
        let per_token = training_flops(&c, 0.0, 1024).fwd_per_token;
        assert_eq!(forward_flops(&c, 1024, 0), 1024 * per_token);
    }

    #[test]
    fn budget_of_one_token() {
        let c = ModelConfig::dense(64, 2, 257).with_seq_len(64);
        let fwd = training_flops(&c, 0.0, 64).fwd_per_token;
        let plan = tokens_for_flops_budget(&c, 3.0 * fwd as f64);
        assert_eq!(plan.tokens, 1.0);
    }

    #[test]
    fn shapes_cover_param_count() {
        for name in ModelConfig::PRESETS {
            let c = preset(name);
            let n: usize = tensor_shapes(&c).iter().map(|(r, k)| r * k).sum();
            assert_eq!(n as u64, count_params(&c).total, "{name}");
        }
    }

    #[test]
    fn csv_output() {
        let csv = count_params(&ModelConfig::dense(64, 0, 10)).to_csv();
        assert!(csv.starts_with("component,count\nembedding,640\n"));
    }
}
