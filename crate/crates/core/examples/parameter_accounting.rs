//! Parameter and FLOP accounting for every preset and its low-rank twins,
//! plus the equal-compute token budgets of the wide structured models.
//!
//!     cargo run --example parameter_accounting

use sffn::accounting::{
    count_params, lowrank_ratio, tokens_for_flops_budget, tokens_for_params, training_flops,
};
use sffn::model::ModelConfig;

fn main() {
    println!(
        "{:<10} {:>6} {:>10} {:>10} {:>12} {:>9}",
        "model", "rank", "params(M)", "ffn(M)", "train FLOPs", "ffn kept"
    );
    for name in ["s", "m", "l", "xl"] {
        let dense = ModelConfig::preset(name).expect("preset");
        let tokens = tokens_for_params(count_params(&dense).total as f64);
        let d = dense.width;
        for rank in [None, Some(d / 2), Some(d / 4)] {
            let c = match rank {
                Some(r) => dense.clone().with_low_rank(r),
                None => dense.clone(),
            };
            let p = count_params(&c);
            let f = training_flops(&c, tokens, c.seq_len);
            let kept = rank.map_or(1.0, |r| lowrank_ratio(d, c.intermediate, r));
            println!(
                "{name:<10} {:>6} {:>10.1} {:>10.1} {:>12.3e} {:>8.2}%",
                rank.map_or("-".into(), |r| r.to_string()),
                p.total as f64 / 1e6,
                p.ffn as f64 / 1e6,
                f.train_total,
                100.0 * kept
            );
        }
    }

    println!();
    for (name, baseline) in [("wide-m", "m"), ("wide-l", "l")] {
        let base = ModelConfig::preset(baseline).expect("preset");
        let budget = training_flops(
            &base,
            tokens_for_params(count_params(&base).total as f64),
            base.seq_len,
        )
        .train_total;
        let plan = tokens_for_flops_budget(&ModelConfig::preset(name).expect("preset"), budget);
        println!("{name} at the {baseline} budget");
        print!("{}", plan.to_table());
    }
}
