//! Train a d=64, L=2 byte-level model and its rank-16 spectral twin on the
//! synthetic corpus, then compare held-out loss.
//!
//!     cargo run --release --example train_desk_scale -- [steps]

use std::time::Instant;

use sffn::model::{ModelConfig, TransformerLM};
use sffn::trainer::{evaluate_ppl, synthetic_corpus, train, TrainConfig, BYTE_VOCAB};

fn main() -> sffn::Result<()> {
    let steps = std::env::args()
        .nth(1)
        .map_or(300, |s| s.parse().expect("steps"));
    let corpus = synthetic_corpus(2_000_000, 7);
    let (train_stream, eval_stream) = corpus.split_tail(0.05);

    let dense = ModelConfig::dense(64, 2, BYTE_VOCAB).with_seq_len(128);
    let tc = TrainConfig {
        peak_lr: 3e-3,
        global_batch_tokens: 1024,
        micro_batch_tokens: 512,
        total_steps: steps,
        ..TrainConfig::default()
    };

    for cfg in [dense.clone(), dense.with_low_rank(16)] {
        let model = TransformerLM::new(&cfg, 11)?;
        let (init_loss, _) = evaluate_ppl(&model, &eval_stream, 32_768)?;
        let t0 = Instant::now();
        let (log, model) = train(model, &train_stream, tc.clone())?;
        let (loss, ppl) = evaluate_ppl(&model, &eval_stream, 32_768)?;
        println!(
            "{:<8} params {:>7}  eval loss {init_loss:.3} -> {loss:.3} (ppl {ppl:.2})  last batch {:.3}  {:.1}s",
            if cfg.ffn.rank_for_layer(1).is_some() { "rank16" } else { "dense" },
            model.param_count(),
            log.records.last().unwrap().loss,
            t0.elapsed().as_secs_f64(),
        );
    }
    Ok(())
}
