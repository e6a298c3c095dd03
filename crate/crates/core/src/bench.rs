//! Latency and throughput measurement.
//!
//! Every result is the median of at least five timed repetitions taken after
//! untimed warmups. FLOP counts come from the kernel counters, not from
//! formulas, and each run is checked against [`crate::accounting`].

use std::fmt::{self, Write as _};
use std::time::Instant;

use crate::accounting::{ffn_flops, forward_flops};
use crate::error::{Error, Result};
use crate::model::{FfnKind, FfnWeights, KVCache, ModelConfig, TransformerLM};
use crate::numeric::{flops, GeluMode, Matrix, Rng};
use crate::spectral::FactorPair;

pub const CSV_HEADER: &str = "label,width,variant,n_tokens,median_s,min_s,max_s,tokens_per_s,flops";

/// Tokens per FFN measurement.
pub const FFN_TOKENS: usize = 30_000;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchResult {
    pub label: String,
    pub width: usize,
    pub variant: String,
    pub n_tokens: usize,
    pub reps: usize,
    pub median_s: f64,
    pub min_s: f64,
    pub max_s: f64,
    pub tokens_per_s: f64,
    /// Counted FLOPs of one repetition.
    pub flops: u64,
}

impl BenchResult {
    fn from_times(
        label: String,
        width: usize,
        variant: String,
        n_tokens: usize,
        times: &[f64],
        flops: u64,
    ) -> Self {
        let median_s = median(times);
        Self {
            label,
            width,
            variant,
            n_tokens,
            reps: times.len(),
            median_s,
            min_s: times.iter().copied().fold(f64::INFINITY, f64::min),
            max_s: times.iter().copied().fold(0.0, f64::max),
            tokens_per_s: n_tokens as f64 / median_s,
            flops,
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.6e},{:.6e},{:.6e},{:.1},{}",
            self.label,
            self.width,
            self.variant,
            self.n_tokens,
            self.median_s,
            self.min_s,
            self.max_s,
            self.tokens_per_s,
            self.flops
        )
    }
}

pub fn to_csv(results: &[BenchResult]) -> String {
    let mut s = format!("{CSV_HEADER}\n");
    for r in results {
        let _ = writeln!(s, "{}", r.csv_row());
    }
    s
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Protocol {
    pub warmup: usize,
    pub reps: usize,
}

impl Default for Protocol {
    fn default() -> Self {
        Self { warmup: 2, reps: 5 }
    }
}

impl Protocol {
    /// Wall-clock seconds of each timed repetition. `setup` runs before every
    /// call and is not timed.
    pub fn time<S, R>(&self, mut setup: impl FnMut() -> S, mut f: impl FnMut(S) -> R) -> Vec<f64> {
        assert!(self.reps >= 5, "at least five repetitions");
        for _ in 0..self.warmup {
            std::hint::black_box(f(setup()));
        }
        (0..self.reps)
            .map(|_| {
                let s = setup();
                let t0 = Instant::now();
                std::hint::black_box(f(s));
                t0.elapsed().as_secs_f64()
            })
            .collect()
    }
}

/// FFN variants of the latency sweep, all with `intermediate = 4·width`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FfnVariant {
    Dense,
    /// `R = width/2`: 62.5 % of the dense FFN parameters.
    Half,
    /// `R = width/4`: 31.25 %.
    Quarter,
}

impl FfnVariant {
    pub const ALL: [FfnVariant; 3] = [FfnVariant::Dense, FfnVariant::Half, FfnVariant::Quarter];

    pub fn rank(self, width: usize) -> Option<usize> {
        match self {
            FfnVariant::Dense => None,
            FfnVariant::Half => Some(width / 2),
            FfnVariant::Quarter => Some(width / 4),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "dense" => Some(FfnVariant::Dense),
            "lowrank-0.625" | "half" => Some(FfnVariant::Half),
            "lowrank-0.3125" | "quarter" => Some(FfnVariant::Quarter),
            _ => None,
        }
    }
}

impl fmt::Display for FfnVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FfnVariant::Dense => "dense",
            FfnVariant::Half => "lowrank-0.625",
            FfnVariant::Quarter => "lowrank-0.3125",
        })
    }
}

fn random_ffn(width: usize, variant: FfnVariant, rng: &mut Rng) -> FfnWeights<f32> {
    let i = 4 * width;
    let std = 0.02;
    let w: FfnWeights = match variant.rank(width) {
        None => FfnWeights::Dense {
            w_in: rng.normal_matrix(width, i, std),
            w_out: rng.normal_matrix(i, width, std),
        },
        Some(r) => {
            let pair = |rng: &mut Rng, m, n| {
                FactorPair::new(
                    rng.normal_matrix(m, r, std.sqrt()),
                    rng.normal_matrix(r, n, std.sqrt()),
                )
                .expect("factor shapes")
            };
            FfnWeights::LowRank {
                w_in: pair(rng, width, i),
                w_out: pair(rng, i, width),
            }
        }
    };
    w.cast()
}

/// Median f32 forward latency of one FFN block over `n_tokens` for every
/// (width, variant) pair, widths outermost.
pub fn bench_ffn(
    widths: &[usize],
    variants: &[FfnVariant],
    n_tokens: usize,
    protocol: Protocol,
) -> Result<Vec<BenchResult>> {
    let mut rng = Rng::new(0);
    let mut out = Vec::new();
    for &w in widths {
        if w < 4 || w % 4 != 0 {
            return Err(Error::InvalidConfig(format!(
                "bench width {w} must be a positive multiple of 4"
            )));
        }
        let x: Matrix<f32> = rng.normal_matrix(n_tokens, w, 1.0).cast();
        for &v in variants {
            let ffn = random_ffn(w, v, &mut rng);
            let (_, counted) = flops::measure(|| ffn.forward(&x, GeluMode::Exact));
            let expected = ffn_flops(w, 4 * w, v.rank(w), n_tokens);
            assert_eq!(
                counted, expected,
                "FFN FLOP counter disagrees with accounting"
            );
            let times = protocol.time(|| (), |_| ffn.forward(&x, GeluMode::Exact).expect("shapes"));
            out.push(BenchResult::from_times(
                format!("ffn-w{w}-{v}"),
                w,
                v.to_string(),
                n_tokens,
                &times,
                counted,
            ));
        }
    }
    Ok(out)
}

/// `dense_median / variant_median` for every non-dense result.
pub fn speedups(results: &[BenchResult]) -> Vec<(usize, String, f64)> {
    results
        .iter()
        .filter(|r| r.variant != "dense")
        .filter_map(|r| {
            let d = results
                .iter()
                .find(|d| d.width == r.width && d.variant == "dense")?;
            Some((r.width, r.variant.clone(), d.median_s / r.median_s))
        })
        .collect()
}

/// True when, per variant, median latency never decreases as width grows.
pub fn latency_monotone_in_width(results: &[BenchResult]) -> bool {
    let mut variants: Vec<&str> = results.iter().map(|r| r.variant.as_str()).collect();
    variants.dedup();
    variants.iter().all(|v| {
        let mut rs: Vec<&BenchResult> = results.iter().filter(|r| r.variant == *v).collect();
        rs.sort_by_key(|r| r.width);
        rs.windows(2).all(|p| p[1].median_s >= p[0].median_s)
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationOptions {
    pub batch_sizes: Vec<usize>,
    pub prompt_len: usize,
    pub gen_len: usize,
    /// KV-cache budget in bytes.
    pub memory_budget: usize,
    /// Stop the sweep once throughput improves by less than this fraction.
    pub plateau_tol: f64,
    pub protocol: Protocol,
}

impl Default for GenerationOptions {
    fn default() -> Self {
        Self {
            batch_sizes: vec![1, 2, 4, 8, 16, 32, 64],
            prompt_len: 16,
            gen_len: 256,
            memory_budget: 1 << 30,
            plateau_tol: 0.05,
            protocol: Protocol::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationReport {
    /// One result per batch size tried, in sweep order.
    pub sweep: Vec<BenchResult>,
    /// Index into `sweep` of the highest throughput.
    pub best: usize,
}

impl GenerationReport {
    pub fn best(&self) -> &BenchResult {
        &self.sweep[self.best]
    }
}

/// Bytes of KV cache that `batch` sequences of `positions` tokens occupy.
pub fn cache_bytes(c: &ModelConfig, batch: usize, positions: usize) -> usize {
    2 * c.n_layers * c.kv_dim * positions * batch * std::mem::size_of::<f64>()
}

/// Counted FLOPs of decoding `gen_len` tokens for `batch` sequences after a
/// `prompt_len` prefill.
pub fn decode_flops(c: &ModelConfig, batch: usize, prompt_len: usize, gen_len: usize) -> u64 {
    (0..gen_len)
        .map(|i| batch as u64 * forward_flops(c, 1, prompt_len + i))
        .sum()
}

fn argmax(row: &[f64]) -> u32 {
    row.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        })
        .0 as u32
}

fn prefill(model: &TransformerLM, batch: usize, prompt_len: usize) -> (Vec<KVCache>, Vec<u32>) {
    let c = model.config();
    let mut rng = Rng::new(batch as u64);
    let mut caches = Vec::with_capacity(batch);
    let mut last = Vec::with_capacity(batch);
    for _ in 0..batch {
        let prompt: Vec<u32> = (0..prompt_len).map(|_| rng.below(c.vocab) as u32).collect();
        let mut cache = KVCache::new(c);
        let logits = model
            .forward_cached(&prompt, &mut cache)
            .expect("prompt fits");
        last.push(argmax(logits.row(prompt_len - 1)));
        caches.push(cache);
    }
    (caches, last)
}

/// Greedy batched decoding of `gen_len` tokens; returns the generated ids.
pub fn generate(
    model: &TransformerLM,
    caches: &mut [KVCache],
    mut last: Vec<u32>,
    gen_len: usize,
) -> Result<Vec<Vec<u32>>> {
    let mut out = vec![Vec::with_capacity(gen_len); caches.len()];
    for _ in 0..gen_len {
        let logits = model.decode_batch(caches, &last)?;
        for (b, tok) in last.iter_mut().enumerate() {
            *tok = argmax(logits.row(b));
            out[b].push(*tok);
        }
    }
    Ok(out)
}

/// Decode throughput (generated tokens per second, prefill excluded) for
/// increasing batch sizes. The sweep stops at the memory budget or when
/// throughput stops improving by at least `plateau_tol`.
pub fn bench_generation(
    model: &TransformerLM,
    label: &str,
    opts: &GenerationOptions,
) -> Result<GenerationReport> {
    let c = model.config();
    if opts.prompt_len == 0 || opts.prompt_len + opts.gen_len > c.seq_len {
        return Err(Error::InvalidConfig(format!(
            "prompt {} + generation {} must fit in seq_len {}",
            opts.prompt_len, opts.gen_len, c.seq_len
        )));
    }
    let positions = opts.prompt_len + opts.gen_len;
    let mut sweep: Vec<BenchResult> = Vec::new();
    let mut best = 0;
    for (i, &b) in opts.batch_sizes.iter().enumerate() {
        let need = cache_bytes(c, b, positions);
        if need > opts.memory_budget {
            if i == 0 {
                return Err(Error::OutOfMemory {
                    budget: opts.memory_budget,
                    needed: need,
                });
            }
            break;
        }
        let (caches, last) = prefill(model, b, opts.prompt_len);
        let ((), counted) = flops::measure(|| {
            let (mut cs, l) = (caches.clone(), last.clone());
            generate(model, &mut cs, l, opts.gen_len).expect("cache sized for generation");
        });
        assert_eq!(
            counted,
            decode_flops(c, b, opts.prompt_len, opts.gen_len),
            "decode FLOP counter disagrees with accounting"
        );
        let times = opts.protocol.time(
            || (caches.clone(), last.clone()),
            |(mut cs, l)| {
                generate(model, &mut cs, l, opts.gen_len).expect("cache sized for generation")
            },
        );
        let r = BenchResult::from_times(
            format!("{label}-b{b}"),
            c.width,
            label.to_string(),
            b * opts.gen_len,
            &times,
            counted,
        );
        let improved = sweep.is_empty()
            || r.tokens_per_s >= sweep[best].tokens_per_s * (1.0 + opts.plateau_tol);
        if sweep.is_empty() || r.tokens_per_s > sweep[best].tokens_per_s {
            best = sweep.len();
        }
        sweep.push(r);
        if !improved {
            break;
        }
    }
    Ok(GenerationReport { sweep, best })
}

/// Small analogues of the grouped-query baseline and the wide structured
/// model: the latter halves the query width and factorizes every FFN but the
/// first at `R = width/2`, with a larger intermediate size.
pub fn toy_generation_pair() -> (ModelConfig, ModelConfig) {
    let base = ModelConfig {
        n_heads: 4,
        q_dim: 128,
        ..ModelConfig::dense(128, 4, 257).with_seq_len(320)
    };
    let gqa = ModelConfig {
        intermediate: 608,
        ..base.clone()
    }
    .with_heads(4, 1);
    let wide = ModelConfig {
        intermediate: 608,
        q_dim: 64,
        ffn: FfnKind::low_rank(64),
        ..base
    }
    .with_heads(2, 1);
    (gqa, wide)
}
