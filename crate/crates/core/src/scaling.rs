//! Power-law fits `loss = a · flops^b` by least squares in log-log space, and
//! slope comparisons between curves.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Final (loss, training FLOPs) points of the reference dense, 62.5 % and
/// 31.25 % FFN curves at four model sizes.
pub const REFERENCE_CSV: &str = include_str!("../data/reference_scaling.csv");

/// Attached to every report: the points are end-of-run losses, not a
/// compute-optimal frontier, so slopes compare curves rather than laws.
pub const FRONTIER_WARNING: &str =
    "points are final losses of fixed-budget runs, not compute-optimal frontiers; compare slopes, not extrapolations";

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingPoint {
    pub label: String,
    pub flops: f64,
    pub loss: f64,
}

impl ScalingPoint {
    pub fn new(label: impl Into<String>, flops: f64, loss: f64) -> Self {
        Self {
            label: label.into(),
            flops,
            loss,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingFit {
    pub label: String,
    pub a: f64,
    /// Log-log slope; more negative is steeper.
    pub b: f64,
    /// RMS of `ln loss − ln(a·flops^b)`.
    pub rms_log_residual: f64,
    pub n_points: usize,
}

impl ScalingFit {
    pub fn predict(&self, flops: f64) -> f64 {
        self.a * flops.powf(self.b)
    }
}

/// Ordinary least squares on `(ln flops, ln loss)`.
pub fn fit_power_law(points: &[ScalingPoint]) -> Result<ScalingFit> {
    if points.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: points.len(),
        });
    }
    for (i, p) in points.iter().enumerate() {
        if !(p.flops > 0.0 && p.flops.is_finite() && p.loss > 0.0 && p.loss.is_finite()) {
            return Err(Error::InvalidPoint(format!(
                "flops {} and loss {} must be positive and finite",
                p.flops, p.loss
            )));
        }
        if points[..i].iter().any(|q| q.flops == p.flops) {
            return Err(Error::DuplicateFlops(p.flops));
        }
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.flops.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.loss.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let b = sxy / sxx;
    let ln_a = my - b * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - ln_a - b * x).powi(2))
        .sum();
    Ok(ScalingFit {
        label: points[0].label.clone(),
        a: ln_a.exp(),
        b,
        rms_log_residual: (rss / n).sqrt(),
        n_points: points.len(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlopePair {
    pub first: String,
    pub second: String,
    /// `b(first) − b(second)`.
    pub delta_b: f64,
    /// FLOPs where the two fitted curves meet; `None` for parallel fits.
    pub crossover: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlopeComparison {
    /// Labels from steepest to shallowest.
    pub order: Vec<String>,
    /// Consecutive pairs along `order`, then all remaining pairs.
    pub pairs: Vec<SlopePair>,
}

/// Where `a1·C^b1 = a2·C^b2`.
pub fn crossover(f1: &ScalingFit, f2: &ScalingFit) -> Option<f64> {
    let db = f2.b - f1.b;
    if db == 0.0 {
        return None;
    }
    let c = ((f1.a.ln() - f2.a.ln()) / db).exp();
    (c.is_finite() && c > 0.0).then_some(c)
}

pub fn compare_slopes(fits: &[ScalingFit]) -> Result<SlopeComparison> {
    if fits.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: fits.len(),
        });
    }
    let mut sorted: Vec<&ScalingFit> = fits.iter().collect();
    sorted.sort_by(|x, y| x.b.total_cmp(&y.b));
    let mut pairs = Vec::new();
    for i in 0..sorted.len() {
        for j in i + 1..sorted.len() {
            let (f1, f2) = (sorted[i], sorted[j]);
            pairs.push(SlopePair {
                first: f1.label.clone(),
                second: f2.label.clone(),
                delta_b: f1.b - f2.b,
                crossover: crossover(f1, f2),
            });
        }
    }
    pairs.sort_by_key(|p| {
        let pos = |l: &str| sorted.iter().position(|f| f.label == l).unwrap();
        (pos(&p.second) - pos(&p.first), pos(&p.first))
    });
    Ok(SlopeComparison {
        order: sorted.iter().map(|f| f.label.clone()).collect(),
        pairs,
    })
}

/// Parse `label,flops,loss` rows (header required).
pub fn read_points_csv(text: &str) -> Result<Vec<ScalingPoint>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines
        .next()
        .map(|h| h.split(',').map(str::trim).collect::<Vec<_>>())
    {
        Some(h) if h == ["label", "flops", "loss"] => {}
        _ => return Err(Error::Parse("expected header `label,flops,loss`".into())),
    }
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').map(str::trim).collect();
            let bad = || Error::Parse(format!("bad scaling row `{l}`"));
            if f.len() != 3 {
                return Err(bad());
            }
            Ok(ScalingPoint::new(
                f[0],
                f[1].parse().map_err(|_| bad())?,
                f[2].parse().map_err(|_| bad())?,
            ))
        })
        .collect()
}

pub fn write_points_csv(points: &[ScalingPoint]) -> String {
    let mut s = String::from("label,flops,loss\n");
    for p in points {
        let _ = writeln!(s, "{},{:e},{}", p.label, p.flops, p.loss);
    }
    s
}

/// Points grouped by label in order of first appearance.
pub fn group_by_label(points: &[ScalingPoint]) -> Vec<(String, Vec<ScalingPoint>)> {
    let mut groups: Vec<(String, Vec<ScalingPoint>)> = Vec::new();
    for p in points {
        match groups.iter_mut().find(|(l, _)| *l == p.label) {
            Some((_, g)) => g.push(p.clone()),
            None => groups.push((p.label.clone(), vec![p.clone()])),
        }
    }
    groups
}

pub fn reference_points() -> Vec<ScalingPoint> {
    read_points_csv(REFERENCE_CSV).expect("bundled data parses")
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingReport {
    pub fits: Vec<ScalingFit>,
    pub comparison: Option<SlopeComparison>,
    pub warning: &'static str,
}

/// Fit every label separately and compare the slopes when there are several.
pub fn fit_report(points: &[ScalingPoint]) -> Result<ScalingReport> {
    let fits = group_by_label(points)
        .iter()
        .map(|(_, g)| fit_power_law(g))
        .collect::<Result<Vec<_>>>()?;
    let comparison = if fits.len() >= 2 {
        Some(compare_slopes(&fits)?)
    } else {
        None
    };
    Ok(ScalingReport {
        fits,
        comparison,
        warning: FRONTIER_WARNING,
    })
}

impl ScalingReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for f in &self.fits {
            let _ = writeln!(
                s,
                "{:<14} loss = {:.6} * C^{:.6}   rms(log) {:.2e}   n={}",
                f.label, f.a, f.b, f.rms_log_residual, f.n_points
            );
        }
        if let Some(c) = &self.comparison {
            let _ = writeln!(s, "steepest first: {}", c.order.join(" < "));
            for p in &c.pairs {
                let cross = p
                    .crossover
                    .map_or("none".to_string(), |x| format!("{x:.3e}"));
                let _ = writeln!(
                    s,
                    "  b({}) - b({}) = {:+.6}   crossover C = {}",
                    p.first, p.second, p.delta_b, cross
                );
            }
        }
        let _ = writeln!(s, "warning: {}", self.warning);
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("label,a,b,rms_log_residual,points\n");
        for f in &self.fits {
            let _ = writeln!(
                s,
                "{},{:e},{},{:e},{}",
                f.label, f.a, f.b, f.rms_log_residual, f.n_points
            );
        }
        s
    }
}
