//! Truncated-SVD initialization of a weight matrix: reconstruction error at
//! each rank against the singular-value tail, then a whole model factorized.
//!
//!     cargo run --release --example spectral_init

use sffn::model::{FfnKind, ModelConfig, TransformerLM};
use sffn::numeric::{svd_thin, Rng};
use sffn::spectral::{factorize_model_ffns, spectral_init};

fn main() -> sffn::Result<()> {
    let mut rng = Rng::new(0);
    let w = rng.normal_matrix(64, 256, 0.02);
    let sigma = svd_thin(&w)?.sigma;
    let norm = w.frobenius_norm();
    println!(
        "{:>5} {:>12} {:>12} {:>8}",
        "rank", "rel error", "tail bound", "params"
    );
    for rank in [1, 4, 8, 16, 32, 48, 64] {
        let pair = spectral_init(&w, rank)?;
        let err = w.sub(&pair.product())?.frobenius_norm() / norm;
        let tail = sigma[rank..].iter().fold(0.0, |acc, s| acc + s * s).sqrt() / norm;
        println!(
            "{rank:>5} {err:>12.6} {tail:>12.6} {:>8}",
            pair.param_count()
        );
    }

    // a low-rank model is the factorization of its dense twin
    let dense = TransformerLM::new(&ModelConfig::dense(64, 2, 257).with_seq_len(64), 1)?;
    let low = factorize_model_ffns(&dense, FfnKind::low_rank(16))?;
    let tokens: Vec<u32> = (0..32).map(|i| (i * 7 % 257) as u32).collect();
    let a = dense.lm_forward(&tokens)?.loss.expect("targets");
    let b = low.lm_forward(&tokens)?.loss.expect("targets");
    println!(
        "\nparams {} -> {}; loss on a probe sequence {a:.5} -> {b:.5}",
        dense.param_count(),
        low.param_count()
    );
    Ok(())
}
