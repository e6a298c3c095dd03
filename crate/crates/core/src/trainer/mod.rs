//! Desk-scale training: AdamW with warmup + cosine decay, micro-batch
//! gradient accumulation, evaluation perplexity and checkpoints.
//!
//! Batches are read sequentially. Step `s` (1-based) uses the `seq_len`-token
//! windows starting at `((s − 1)·n_seq + j)·seq_len` for `j < n_seq`, so a run
//! resumed from a checkpoint sees exactly the data the unbroken run would.
//! Per-sequence gradients are computed in parallel and summed in sequence
//! order, which makes results independent of the thread count and of how the
//! global batch is split into micro-batches.

mod checkpoint;
mod config;
mod corpus;
mod optim;
mod stream;

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

pub use checkpoint::Checkpoint;
pub use config::{lr_at, TrainConfig};
pub use corpus::{byte_tokens, synthetic_corpus, BYTE_VOCAB, EOS};
pub use optim::{adamw_step, adamw_update, grad_norm, AdamHyper, AdamState};
pub use stream::TokenStream;

use crate::error::{Error, Result};
use crate::model::{Gradients, Tape, TransformerLM};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRecord {
    pub step: usize,
    pub tokens: u64,
    /// Mean next-token loss of the step's batch, before the update.
    pub loss: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<LogRecord>,
}

impl TrainLog {
    pub const HEADER: &'static str = "step,tokens,loss,lr";

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::HEADER);
        for r in &self.records {
            writeln!(s, "{},{},{},{}", r.step, r.tokens, r.loss, r.lr).unwrap();
        }
        s
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(Self::HEADER) {
            return Err(Error::Parse(format!("expected header `{}`", Self::HEADER)));
        }
        let records = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let f: Vec<&str> = l.split(',').map(str::trim).collect();
                let bad = || Error::Parse(format!("bad log line `{l}`"));
                if f.len() != 4 {
                    return Err(bad());
                }
                Ok(LogRecord {
                    step: f[0].parse().map_err(|_| bad())?,
                    tokens: f[1].parse().map_err(|_| bad())?,
                    loss: f[2].parse().map_err(|_| bad())?,
                    lr: f[3].parse().map_err(|_| bad())?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { records })
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    /// Trailing means over `window` records, one per full window.
    pub fn moving_average(&self, window: usize) -> Vec<f64> {
        self.losses()
            .windows(window)
            .map(|w| w.iter().sum::<f64>() / window as f64)
            .collect()
    }

    pub fn extend(&mut self, other: TrainLog) {
        self.records.extend(other.records);
    }
}

/// Training state for one run: model, optimizer moments and step counter.
pub struct Trainer<'a> {
    model: TransformerLM,
    opt: AdamState,
    config: TrainConfig,
    stream: &'a TokenStream,
    step: usize,
    log: TrainLog,
}

impl<'a> Trainer<'a> {
    pub fn new(model: TransformerLM, stream: &'a TokenStream, config: TrainConfig) -> Result<Self> {
        let opt = AdamState::for_model(&model);
        Self::from_state(model, opt, 0, stream, config)
    }

    /// Continue from a checkpoint written by [`Trainer::checkpoint`].
    pub fn resume(ckpt: Checkpoint, stream: &'a TokenStream, config: TrainConfig) -> Result<Self> {
        let opt = ckpt
            .optimizer
            .ok_or_else(|| Error::BadCheckpoint("no optimizer state to resume from".into()))?;
        Self::from_state(ckpt.model, opt, ckpt.step, stream, config)
    }

    fn from_state(
        model: TransformerLM,
        opt: AdamState,
        step: usize,
        stream: &'a TokenStream,
        config: TrainConfig,
    ) -> Result<Self> {
        config.validate(model.config().seq_len)?;
        stream.check_vocab(model.config().vocab)?;
        if stream.len() < model.config().seq_len {
            return Err(Error::EmptyStream);
        }
        if opt.sizes() != AdamState::for_model(&model).sizes() {
            return Err(Error::CheckpointConfigMismatch);
        }
        if step > config.total_steps {
            return Err(Error::StepOutOfRange {
                step,
                total: config.total_steps,
            });
        }
        Ok(Self {
            model,
            opt,
            config,
            stream,
            step,
            log: TrainLog::default(),
        })
    }

    pub fn model(&self) -> &TransformerLM {
        &self.model
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Steps completed so far.
    pub fn step(&self) -> usize {
        self.step
    }

    /// Records produced by this trainer (not by the run it resumed from).
    pub fn log(&self) -> &TrainLog {
        &self.log
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.config.total_steps
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            model: self.model.clone(),
            optimizer: Some(self.opt.clone()),
            step: self.step,
        }
    }

    pub fn into_parts(self) -> (TransformerLM, TrainLog) {
        (self.model, self.log)
    }

    fn seqs_per_step(&self) -> usize {
        self.config.global_batch_tokens / self.model.config().seq_len
    }

    /// Token windows of the given (1-based) step.
    pub fn batch(&self, step: usize) -> Result<Vec<&'a [u32]>> {
        let seq = self.model.config().seq_len;
        let n = self.seqs_per_step();
        let toks = self.stream.tokens();
        let usable = toks.len() / seq * seq;
        (0..n)
            .map(|j| {
                let mut off = ((step - 1) * n + j) * seq;
                if off + seq > toks.len() {
                    if !self.config.repeat {
                        return Err(Error::StreamExhausted {
                            step,
                            needed: off + seq,
                            available: toks.len(),
                        });
                    }
                    off %= usable;
                }
                Ok(&toks[off..off + seq])
            })
            .collect()
    }

    /// Mean-loss gradient over `windows` and the summed loss and target count.
    pub fn gradients(&self, windows: &[&[u32]]) -> Result<(Gradients, f64, usize)> {
        let micro = self.config.micro_batch_tokens / self.model.config().seq_len;
        let mut total = self.model.zeros_like();
        let (mut loss_sum, mut targets) = (0.0, 0usize);
        for chunk in windows.chunks(micro) {
            let parts: Vec<Result<(Gradients, f64, usize)>> = chunk
                .par_iter()
                .map(|w| {
                    let mut tape = Tape::new();
                    let out = self.model.forward(w, Some(&mut tape))?;
                    let mut g = self.model.zeros_like();
                    self.model.backward_into(&tape, &mut g, 1.0)?;
                    Ok((g, out.loss_sum, out.n_targets))
                })
                .collect();
            for part in parts {
                let (g, l, n) = part?;
                total.add_assign(&g)?;
                loss_sum += l;
                targets += n;
            }
        }
        total.scale(1.0 / targets.max(1) as f64);
        Ok((total, loss_sum, targets))
    }

    /// Run one optimizer step and return its log record.
    pub fn train_step(&mut self) -> Result<LogRecord> {
        if self.is_done() {
            return Err(Error::StepOutOfRange {
                step: self.step + 1,
                total: self.config.total_steps,
            });
        }
        let step = self.step + 1;
        let windows = self.batch(step)?;
        let (mut grads, loss_sum, targets) = self.gradients(&windows)?;
        let loss = loss_sum / targets.max(1) as f64;
        if !loss.is_finite() {
            return Err(Error::NonFiniteGradient(format!("loss at step {step}")));
        }
        if self.config.grad_clip > 0.0 {
            let norm = grad_norm(&grads);
            if norm > self.config.grad_clip {
                grads.scale(self.config.grad_clip / norm);
            }
        }
        let lr = lr_at(step, &self.config)?;
        adamw_step(&mut self.model, &grads, &mut self.opt, lr, &self.config)?;
        self.step = step;
        let rec = LogRecord {
            step,
            tokens: (step * self.config.global_batch_tokens) as u64,
            loss,
            lr,
        };
        self.log.records.push(rec);
        Ok(rec)
    }

    /// Train until `step` steps have completed (capped at `total_steps`).
    pub fn run_until(&mut self, step: usize) -> Result<()> {
        while self.step < step.min(self.config.total_steps) {
            self.train_step()?;
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<()> {
        self.run_until(self.config.total_steps)
    }
}

/// Train `model` for `config.total_steps` steps on `stream`.
pub fn train(
    model: TransformerLM,
    stream: &TokenStream,
    config: TrainConfig,
) -> Result<(TrainLog, TransformerLM)> {
    let mut t = Trainer::new(model, stream, config)?;
    t.run()?;
    let (model, log) = t.into_parts();
    Ok((log, model))
}

/// Mean next-token loss over non-overlapping `seq_len` windows of the first
/// `max_tokens` ids, and its exponential.
pub fn evaluate_ppl(
    model: &TransformerLM,
    stream: &TokenStream,
    max_tokens: usize,
) -> Result<(f64, f64)> {
    let toks = &stream.tokens()[..stream.len().min(max_tokens)];
    let windows: Vec<&[u32]> = toks
        .chunks(model.config().seq_len)
        .filter(|w| w.len() >= 2)
        .collect();
    if windows.is_empty() {
        return Err(Error::EmptyStream);
    }
    let parts: Vec<Result<(f64, usize)>> = windows
        .par_iter()
        .map(|w| model.lm_forward(w).map(|o| (o.loss_sum, o.n_targets)))
        .collect();
    let (mut sum, mut n) = (0.0, 0);
    for p in parts {
        let (l, k) = p?;
        sum += l;
        n += k;
    }
    let loss = sum / n as f64;
    Ok((loss, loss.exp()))
}

/// Train, then write `log.csv` and the final checkpoint into `dir`.
pub fn train_to_dir(
    model: TransformerLM,
    stream: &TokenStream,
    config: TrainConfig,
    dir: &Path,
) -> Result<(TrainLog, TransformerLM)> {
    std::fs::create_dir_all(dir)?;
    let mut t = Trainer::new(model, stream, config)?;
    t.run()?;
    t.checkpoint().save(dir.join("final.ckpt"))?;
    std::fs::write(dir.join("log.csv"), t.log().to_csv())?;
    let (model, log) = t.into_parts();
    Ok((log, model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn setup() -> (TransformerLM, TokenStream) {
        let cfg = ModelConfig::dense(16, 1, BYTE_VOCAB).with_seq_len(16);
        (
            TransformerLM::new(&cfg, 1).unwrap(),
            synthetic_corpus(4000, 2),
        )
    }

    fn small() -> TrainConfig {
        TrainConfig {
            peak_lr: 3e-3,
            global_batch_tokens: 64,
            micro_batch_tokens: 32,
            total_steps: 8,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn log_csv_round_trip() {
        let log = TrainLog {
            records: vec![
                LogRecord {
                    step: 1,
                    tokens: 64,
                    loss: 5.551_234_567_890_123,
                    lr: 1e-3 / 3.0,
                },
                LogRecord {
                    step: 2,
                    tokens: 128,
                    loss: 4.0,
                    lr: 0.0,
                },
            ],
        };
        assert_eq!(TrainLog::parse_csv(&log.to_csv()).unwrap(), log);
        assert!(TrainLog::parse_csv("a,b\n").is_err());
    }

    #[test]
    fn batches_are_sequential_and_exhaust() {
        let (model, stream) = setup();
        let t = Trainer::new(model.clone(), &stream, small()).unwrap();
        let b1 = t.batch(1).unwrap();
        let b2 = t.batch(2).unwrap();
        assert_eq!(b1.len(), 4);
        assert_eq!(b1[0], &stream.tokens()[0..16]);
        assert_eq!(b2[0], &stream.tokens()[64..80]);
        assert!(matches!(t.batch(63), Err(Error::StreamExhausted { .. })));
        let t = Trainer::new(
            model,
            &stream,
            TrainConfig {
                repeat: true,
                ..small()
            },
        )
        .unwrap();
        assert_eq!(t.batch(63).unwrap()[2], &stream.tokens()[0..16]);
    }

    #[test]
    fn micro_batching_does_not_change_the_gradient() {
        let (model, stream) = setup();
        let a = Trainer::new(model.clone(), &stream, small()).unwrap();
        let b = Trainer::new(
            model,
            &stream,
            TrainConfig {
                micro_batch_tokens: 64,
                ..small()
            },
        )
        .unwrap();
        let w = a.batch(1).unwrap();
        let (ga, la, _) = a.gradients(&w).unwrap();
        let (gb, lb, _) = b.gradients(&w).unwrap();
        assert_eq!(la, lb);
        let diff = ga
            .to_flat()
            .iter()
            .zip(gb.to_flat())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff <= 1e-10, "{diff}");
    }

    #[test]
    fn accumulated_gradient_is_the_batch_mean() {
        let (model, stream) = setup();
        let t = Trainer::new(model.clone(), &stream, small()).unwrap();
        let w = t.batch(1).unwrap();
        let (g, _, n) = t.gradients(&w).unwrap();
        assert_eq!(n, 4 * 15);
        let mut expect = model.zeros_like();
        for win in &w {
            let mut tape = Tape::new();
            model.forward(win, Some(&mut tape)).unwrap();
            let mut gi = model.backward(&tape).unwrap();
            gi.scale(0.25);
            expect.add_assign(&gi).unwrap();
        }
        let diff = g
            .to_flat()
            .iter()
            .zip(expect.to_flat())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let (model, stream) = setup();
        let (log, _) = train(model.clone(), &stream, small()).unwrap();
        let (log2, _) = train(model, &stream, small()).unwrap();
        assert_eq!(log.to_csv(), log2.to_csv());
        assert_eq!(log.records.len(), 8);
        assert_eq!(log.records[0].step, 1);
        assert!(log.records.windows(2).all(|w| w[1].tokens > w[0].tokens));
        assert!(log.records[7].loss < log.records[0].loss);
    }

    #[test]
    fn rejects_bad_setups() {
        let (model, stream) = setup();
        let short = TokenStream::from_tokens(vec![1, 2, 3]);
        assert!(matches!(
            Trainer::new(model.clone(), &short, small()),
            Err(Error::EmptyStream)
        ));
        let wide = TokenStream::from_tokens(vec![300; 100]);
        assert!(matches!(
            Trainer::new(model.clone(), &wide, small()),
            Err(Error::TokenOutOfRange { .. })
        ));
        let mut t = Trainer::new(
            model,
            &stream,
            TrainConfig {
                total_steps: 1,
                ..small()
            },
        )
        .unwrap();
        t.run().unwrap();
        assert!(t.train_step().is_err());
    }

    #[test]
    fn uniform_model_has_log_vocab_loss() {
        let cfg = ModelConfig::dense(16, 1, BYTE_VOCAB).with_seq_len(32);
        let mut model = TransformerLM::new(&cfg, 0).unwrap();
        // Zero embeddings make every logit zero.
        model.embedding.fill(0.0);
        let (loss, ppl) = evaluate_ppl(&model, &synthetic_corpus(500, 0), 500).unwrap();
        assert!((loss - (BYTE_VOCAB as f64).ln()).abs() < 1e-12);
        assert!((ppl - BYTE_VOCAB as f64).abs() < 1e-9);
    }

    #[test]
    fn single_symbol_vocab_is_certain() {
        let cfg = ModelConfig::dense(16, 1, 1).with_seq_len(8);
        let model = TransformerLM::new(&cfg, 0).unwrap();
        let (loss, ppl) = evaluate_ppl(&model, &TokenStream::from_tokens(vec![0; 40]), 40).unwrap();
        assert_eq!((loss, ppl), (0.0, 1.0));
        assert!(matches!(
            evaluate_ppl(&model, &TokenStream::from_tokens(vec![0]), 10),
            Err(Error::EmptyStream)
        ));
    }
}
