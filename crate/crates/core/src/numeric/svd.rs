//! Thin SVD by one-sided (Hestenes) Jacobi.
//!
//! Columns of the tall orientation of `W` are rotated pairwise until every
//! pair is orthogonal to `sqrt(m)·eps` relative to the pair's norms. Column
//! norms are then the singular values and the accumulated rotations are the
//! right singular vectors.

use super::Matrix;
use crate::error::{Error, Result};

pub const MAX_SWEEPS: usize = 100;

#[derive(Clone, Debug)]
pub struct SvdResult {
    /// `M×K`, orthonormal columns.
    pub u: Matrix,
    /// Length `K = min(M, N)`, non-increasing, non-negative.
    pub sigma: Vec<f64>,
    /// `K×N`, orthonormal rows.
    pub vt: Matrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix {
        let (m, k) = self.u.shape();
        let n = self.vt.cols();
        let mut out = Matrix::zeros(m, n);
        for i in 0..m {
            let row = out.row_mut(i);
            for p in 0..k {
                let s = self.u[(i, p)] * self.sigma[p];
                for (o, &v) in row.iter_mut().zip(self.vt.row(p)) {
                    *o += s * v;
                }
            }
        }
        out
    }
}

pub fn svd_thin(w: &Matrix) -> Result<SvdResult> {
    let (m, n) = w.shape();
    if m == 0 || n == 0 {
        return Err(Error::InvalidRank {
            rank: 0,
            rows: m,
            cols: n,
        });
    }
    if let Some(index) = w.as_slice().iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    if m >= n {
        let (u, sigma, v) = jacobi_tall(w)?;
        Ok(SvdResult {
            u,
            sigma,
            vt: v.transpose(),
        })
    } else {
        // W = (Wᵀ)ᵀ = (U S Vᵀ)ᵀ = V S Uᵀ
        let (u, sigma, v) = jacobi_tall(&w.transpose())?;
        Ok(SvdResult {
            u: v,
            sigma,
            vt: u.transpose(),
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let (a, b) = (*xi, *yi);
        *xi = c * a - s * b;
        *yi = s * a + c * b;
    }
}

/// Returns `(U: m×n, sigma, V: n×n)` for `m ≥ n`.
fn jacobi_tall(w: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix)> {
    let (m, n) = w.shape();
    let norm_sq: f64 = w.as_slice().iter().map(|x| x * x).sum();
    // column-major working copies
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..m).map(|i| w[(i, j)]).collect())
        .collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let tol = (m as f64).sqrt() * f64::EPSILON;

    let mut converged = n == 1 || norm_sq == 0.0;
    let mut off = 0.0;
    let mut sweeps = 0;
    while !converged && sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut rotated = false;
        off = 0.0;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let alpha = dot(&a[p], &a[p]);
                let beta = dot(&a[q], &a[q]);
                let gamma = dot(&a[p], &a[q]);
                off += gamma * gamma;
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = a.split_at_mut(q);
                rotate(&mut lo[p], &mut hi[0], c, s);
                let (lo, hi) = v.split_at_mut(q);
                rotate(&mut lo[p], &mut hi[0], c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::SvdNotConverged {
            sweeps,
            off_diagonal: off.sqrt() / norm_sq,
        });
    }

    let norms: Vec<f64> = a.iter().map(|col| dot(col, col).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let sigma_max = norms[order[0]];

    let mut u_cols: Vec<Option<Vec<f64>>> = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    for &j in &order {
        let s = norms[j];
        if s > 0.0 && s > sigma_max * 1e-200 {
            u_cols.push(Some(a[j].iter().map(|x| x / s).collect()));
            sigma.push(s);
        } else {
            u_cols.push(None);
            sigma.push(0.0);
        }
    }
    complete_basis(&mut u_cols, m);

    let mut u = Matrix::zeros(m, n);
    let mut vm = Matrix::zeros(n, n);
    for (k, (col, &j)) in u_cols.iter().zip(&order).enumerate() {
        let col = col.as_ref().expect("basis completed");
        for i in 0..m {
            u[(i, k)] = col[i];
        }
        for i in 0..n {
            vm[(i, k)] = v[j][i];
        }
    }
    Ok((u, sigma, vm))
}

/// Fill `None` slots with unit vectors orthogonal to every other column.
fn complete_basis(cols: &mut [Option<Vec<f64>>], m: usize) {
    let mut candidate = 0;
    for slot in 0..cols.len() {
        if cols[slot].is_some() {
            continue;
        }
        while candidate < m {
            let mut e = vec![0.0; m];
            e[candidate] = 1.0;
            candidate += 1;
            // two passes of modified Gram-Schmidt
            for _ in 0..2 {
                for c in cols.iter().flatten() {
                    let d = dot(&e, c);
                    e.iter_mut().zip(c).for_each(|(x, y)| *x -= d * y);
                }
            }
            let norm = dot(&e, &e).sqrt();
            if norm > 0.5 {
                e.iter_mut().for_each(|x| *x /= norm);
                cols[slot] = Some(e);
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{matmul_tn, Rng};

    fn orthonormality_error(q: &Matrix) -> f64 {
        let g = matmul_tn(q, q).unwrap();
        g.max_abs_diff(&Matrix::identity(g.rows()))
    }

    fn check(w: &Matrix) -> SvdResult {
        let r = svd_thin(w).unwrap();
        let k = w.rows().min(w.cols());
        assert_eq!(r.sigma.len(), k);
        assert!(r.sigma.windows(2).all(|p| p[0] >= p[1]));
        assert!(r.sigma.iter().all(|&s| s >= 0.0));
        assert!(orthonormality_error(&r.u) < 1e-10);
        assert!(orthonormality_error(&r.vt.transpose()) < 1e-10);
        let rel = r.reconstruct().sub(w).unwrap().frobenius_norm() / w.frobenius_norm().max(1e-300);
        assert!(rel <= 1e-8, "reconstruction {rel}");
        r
    }

    #[test]
    fn diagonal() {
        let w = Matrix::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 3.0, 0.0],
            vec![0.0, 0.0, 2.0],
        ])
        .unwrap();
        let r = check(&w);
        assert_eq!(r.sigma, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn rank_one_outer_product() {
        let mut rng = Rng::new(2);
        let u = rng.normal_vec(8, 1.0);
        let v = rng.normal_vec(6, 1.0);
        let w = Matrix::from_fn(8, 6, |i, j| u[i] * v[j]);
        let r = check(&w);
        let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((r.sigma[0] - nu * nv).abs() < 1e-12 * nu * nv);
        assert!(r.sigma[1..].iter().all(|&s| s < 1e-12));
    }

    #[test]
    fn zero_and_wide_matrices() {
        let r = check(&Matrix::zeros(3, 5).map(|_| 0.0).clone());
        assert!(r.sigma.iter().all(|&s| s == 0.0));
        let mut rng = Rng::new(4);
        check(&rng.normal_matrix(5, 13, 1.0));
        check(&rng.normal_matrix(1, 4, 1.0));
        check(&rng.normal_matrix(4, 1, 1.0));
    }

    #[test]
    fn rejects_non_finite() {
        let w = Matrix::new(1, 2, vec![1.0, f64::INFINITY]).unwrap();
        assert!(svd_thin(&w).is_err());
    }

    #[test]
    fn random_reconstruction_up_to_256x512() {
        let mut rng = Rng::new(8);
        for &(m, n) in &[(16, 40), (64, 32), (256, 512)] {
            check(&rng.normal_matrix(m, n, 1.0));
        }
    }
}
