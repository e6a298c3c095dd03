//! Central-difference check of the hand-written backward pass on a tiny
//! dense model and its rank-4 twin.
//!
//!     cargo run --release --example gradient_check

use sffn::model::{ModelConfig, Tape, TransformerLM};
use sffn::numeric::{grad_check, Rng};

fn check(config: &ModelConfig) -> sffn::Result<f64> {
    let mut model = TransformerLM::new(config, 5)?;
    // larger weights than the default init, so no gradient sits at round-off level
    let mut rng = Rng::new(6);
    let theta: Vec<f64> = model
        .to_flat()
        .iter()
        .map(|v| 3.0 * v + 0.05 * rng.normal())
        .collect();
    model.set_flat(&theta)?;

    let tokens: Vec<u32> = (0..8).map(|_| rng.below(config.vocab) as u32).collect();
    let mut tape = Tape::new();
    model.forward(&tokens, Some(&mut tape))?;
    let analytic = model.backward(&tape)?.to_flat();
    let mut probe = model.clone();
    grad_check(
        |p| {
            probe.set_flat(p).expect("same length");
            probe
                .lm_forward(&tokens)
                .expect("valid tokens")
                .loss
                .expect("targets")
        },
        &theta,
        &analytic,
    )
}

fn main() -> sffn::Result<()> {
    let dense = ModelConfig::dense(16, 2, 17)
        .with_seq_len(12)
        .with_heads(2, 2);
    for (label, c) in [("dense", dense.clone()), ("rank 4", dense.with_low_rank(4))] {
        let params = TransformerLM::new(&c, 0)?.param_count();
        println!(
            "{label:<7} {params:>5} params  max relative error {:.2e}",
            check(&c)?
        );
    }
    Ok(())
}
