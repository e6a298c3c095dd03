//! Batched KV-cache decoding throughput of a grouped-query baseline against a
//! wide structured model (narrow attention, low-rank FFN). Batch size grows
//! until throughput plateaus or the cache budget is hit.
//!
//!     cargo run --release --example generation_throughput

use sffn::bench::{bench_generation, to_csv, toy_generation_pair, GenerationOptions};
use sffn::model::TransformerLM;

fn main() -> sffn::Result<()> {
    let (gqa, wide) = toy_generation_pair();
    let opts = GenerationOptions {
        gen_len: 128,
        ..GenerationOptions::default()
    };
    let mut best = Vec::new();
    for (label, c) in [("gqa", gqa), ("wide", wide)] {
        let model = TransformerLM::new(&c, 0)?;
        let report = bench_generation(&model, label, &opts)?;
        print!("{}", to_csv(&report.sweep));
        best.push((label, model.param_count(), report.best().tokens_per_s));
    }
    println!();
    for (label, params, tps) in &best {
        println!("{label:<5} {params:>8} params  best {tps:>9.0} tokens/s");
    }
    println!("wide / gqa: {:.2}x", best[1].2 / best[0].2);
    Ok(())
}
