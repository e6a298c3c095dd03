//! Train a small byte model briefly, then decode greedily with a KV cache and
//! confirm every cached step matches a full recomputation.
//!
//!     cargo run --release --example kv_cache_decoding

use sffn::model::{KVCache, ModelConfig, TransformerLM};
use sffn::trainer::{byte_tokens, synthetic_corpus, train, TrainConfig, BYTE_VOCAB};

fn main() -> sffn::Result<()> {
    let cfg = ModelConfig::dense(64, 2, BYTE_VOCAB)
        .with_seq_len(128)
        .with_heads(2, 1);
    let tc = TrainConfig {
        peak_lr: 3e-3,
        global_batch_tokens: 1024,
        micro_batch_tokens: 512,
        total_steps: 80,
        ..TrainConfig::default()
    };
    let (_, model) = train(
        TransformerLM::new(&cfg, 0)?,
        &synthetic_corpus(200_000, 1),
        tc,
    )?;

    let mut tokens = byte_tokens("the ");
    let mut cache = KVCache::new(&cfg);
    let logits = model.forward_cached(&tokens, &mut cache)?;
    let mut next = argmax(logits.row(tokens.len() - 1));
    let mut worst = 0.0f64;
    while tokens.len() < 96 {
        tokens.push(next);
        let row = model.decode_step(&mut cache, next)?;
        let full = model.lm_forward(&tokens)?.logits;
        worst = row
            .iter()
            .zip(full.row(tokens.len() - 1))
            .fold(worst, |m, (a, b)| m.max((a - b).abs()));
        next = argmax(&row);
    }
    let text: String = tokens
        .iter()
        .map(|&t| if t < 256 { t as u8 as char } else { '|' })
        .collect();
    println!("{text}");
    println!("cached vs full logits: max |diff| {worst:.2e}");
    println!("cache holds {} positions of {}", cache.len(), cfg.seq_len);
    Ok(())
}

fn argmax(row: &[f64]) -> u32 {
    (0..row.len())
        .max_by(|&a, &b| row[a].total_cmp(&row[b]))
        .unwrap_or(0) as u32
}
