use crate::error::{Error, Result};

/// Step of the five-point stencil. Its truncation error is O(h⁴), so a step
/// this large keeps round-off in `f` from swamping near-zero gradients.
pub const DEFAULT_STEP: f64 = 3e-4;

/// Max over coordinates of `|fd_i - g_i| / (|g_i| + 1e-8)` where `fd_i` is the
/// five-point central difference of `f` at `theta` along coordinate `i`.
pub fn grad_check<F>(f: F, theta: &[f64], analytic: &[f64]) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    grad_check_with_step(f, theta, analytic, DEFAULT_STEP)
}

pub fn grad_check_with_step<F>(mut f: F, theta: &[f64], analytic: &[f64], h: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if theta.len() != analytic.len() {
        return Err(Error::ShapeMismatch {
            op: "grad_check",
            lhs: (theta.len(), 1),
            rhs: (analytic.len(), 1),
        });
    }
    let mut probe = theta.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..theta.len() {
        let mut at = |d: f64| {
            probe[i] = theta[i] + d;
            let v = f(&probe);
            probe[i] = theta[i];
            v
        };
        let v = [at(2.0 * h), at(h), at(-h), at(-2.0 * h)];
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteProbe { index: i });
        }
        let fd = (-v[0] + 8.0 * v[1] - 8.0 * v[2] + v[3]) / (12.0 * h);
        worst = worst.max((fd - analytic[i]).abs() / (analytic[i].abs() + 1e-8));
    }
    Ok(worst)
}
