//! Fit loss = a·C^b to each curve of a `label,flops,loss` CSV (the bundled
//! reference curves by default) and rank the slopes.
//!
//!     cargo run --example scaling_slopes -- [points.csv]

use sffn::scaling::{fit_report, read_points_csv, REFERENCE_CSV};

fn main() -> sffn::Result<()> {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => REFERENCE_CSV.to_string(),
    };
    let report = fit_report(&read_points_csv(&text)?)?;
    print!("{}", report.to_text());
    for f in &report.fits {
        let loss = f.predict(1e21);
        println!("{:<12} extrapolated loss at 1e21 FLOPs: {loss:.3}", f.label);
    }
    Ok(())
}
