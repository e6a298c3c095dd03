//! f32 FFN latency over 30 000 tokens for dense and rank-w/2, rank-w/4
//! factorizations, printed as CSV followed by median speed-ups.
//!
//!     cargo run --release --example ffn_latency_sweep -- [width ...]

use sffn::bench::{
    bench_ffn, latency_monotone_in_width, speedups, to_csv, FfnVariant, Protocol, FFN_TOKENS,
};

fn main() -> sffn::Result<()> {
    let mut widths: Vec<usize> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("width"))
        .collect();
    if widths.is_empty() {
        widths = vec![32, 64, 128, 256];
    }
    let results = bench_ffn(&widths, &FfnVariant::ALL, FFN_TOKENS, Protocol::default())?;
    print!("{}", to_csv(&results));
    println!();
    for (w, variant, s) in speedups(&results) {
        println!("width {w:>5}  {variant:<15} {s:.2}x");
    }
    println!(
        "medians monotone in width: {}",
        latency_monotone_in_width(&results)
    );
    Ok(())
}
