use nalgebra::{DMatrix, DVector};

use super::{width_of, BinaryRows, LearnerKind, Predictor};
use crate::error::{Error, Result};

/// Ridge least squares: minimizes `sum (y - b.x - c)^2 + ridge * |b|^2`, the
/// intercept unpenalized. Predictions clamp to [0, 1].
pub fn fit_linear(rows: &BinaryRows<'_>, ridge: f64) -> Result<Predictor> {
    if rows.len() < 2 {
        return Err(Error::Domain("linear fit needs at least 2 rows".into()));
    }
    if !(ridge >= 0.0) {
        return Err(Error::Domain(format!("ridge must be >= 0, got {ridge}")));
    }
    let w = width_of(&rows.x)?;
    let p = w + 1;
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    let mut z = vec![0.0; p];
    for (x, &y) in rows.x.iter().zip(&rows.y) {
        z[..w].copy_from_slice(x);
        z[w] = 1.0;
        for i in 0..p {
            rhs[i] += z[i] * y;
            for j in 0..=i {
                gram[(i, j)] += z[i] * z[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            gram[(j, i)] = gram[(i, j)];
        }
    }
    for i in 0..w {
        gram[(i, i)] += ridge;
    }
    let max_diag = gram.diagonal().iter().fold(0.0_f64, |m, v| m.max(*v));
    let singular = || {
        Error::Singular(format!(
            "normal equations are singular with ridge {ridge}; use ridge > 0"
        ))
    };
    let chol = gram.clone().cholesky().ok_or_else(singular)?;
    let l = chol.l_dirty();
    if (0..p).any(|i| l[(i, i)] * l[(i, i)] <= 1e-13 * max_diag.max(1e-300)) {
        return Err(singular());
    }
    let theta = chol.solve(&rhs);
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(singular());
    }
    Ok(Predictor {
        kind: LearnerKind::Linear,
        coefficients: theta.as_slice()[..w].to_vec(),
        intercept: theta[w],
        baseline_survival: None,
        horizon: rows.horizon,
        trained_on_node: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rows<'a>(x: &'a [Vec<f64>], y: &[f64]) -> BinaryRows<'a> {
        BinaryRows {
            horizon: 1.0,
            x: x.iter().map(Vec::as_slice).collect(),
            y: y.to_vec(),
        }
    }

    #[test]
    fn exact_interpolation() {
        let x = vec![vec![0.0], vec![1.0]];
        let p = fit_linear(&rows(&x, &[0.0, 1.0]), 0.0).unwrap();
        assert!((p.coefficients[0] - 1.0).abs() < 1e-12);
        assert!(p.intercept.abs() < 1e-12);
    }

    #[test]
    fn constant_target() {
        let x = vec![vec![0.3, 1.0], vec![1.2, -1.0], vec![2.0, 0.5], vec![-0.7, 0.1]];
        let p = fit_linear(&rows(&x, &[0.4; 4]), 0.0).unwrap();
        assert!(p.coefficients.iter().all(|c| c.abs() < 1e-10));
        assert!((p.intercept - 0.4).abs() < 1e-10);
    }

    #[test]
    fn singular_without_ridge_is_an_error() {
        let x = vec![vec![1.0], vec![1.0], vec![1.0]];
        let err = fit_linear(&rows(&x, &[0.0, 1.0, 1.0]), 0.0).unwrap_err();
        assert!(err.to_string().contains("ridge > 0"), "{err}");
        assert!(fit_linear(&rows(&x, &[0.0, 1.0, 1.0]), 1e-6).is_ok());
    }

    /// Gaussian elimination with partial pivoting on the augmented system.
    fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for r in col + 1..n {
                let f = a[r][col] / a[col][col];
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
            x[r] = (b[r] - s) / a[r][r];
        }
        x
    }

    #[test]
    fn matches_normal_equations_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for ridge in [0.0, 0.3] {
            let x: Vec<Vec<f64>> = (0..5).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let y: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..1.0)).collect();
            let p = fit_linear(&rows(&x, &y), ridge).unwrap();
            let z: Vec<Vec<f64>> = x.iter().map(|r| r.iter().cloned().chain([1.0]).collect()).collect();
            let mut a = vec![vec![0.0; 4]; 4];
            let mut b = vec![0.0; 4];
            for (zr, &yv) in z.iter().zip(&y) {
                for i in 0..4 {
                    b[i] += zr[i] * yv;
                    for j in 0..4 {
                        a[i][j] += zr[i] * zr[j];
                    }
                }
            }
            for (i, row) in a.iter_mut().enumerate().take(3) {
                row[i] += ridge;
            }
            let oracle = solve_dense(a, b);
            for i in 0..3 {
                assert!((p.coefficients[i] - oracle[i]).abs() < 1e-8);
            }
            assert!((p.intercept - oracle[3]).abs() < 1e-8);
        }
    }
}
