//! Ridge and least-squares auxiliaries.

use nalgebra::{DMatrix, DVector};

use crate::data::{Dataset, LinearModel};
use crate::error::{FridgeError, Result};

/// Relative singular-value (and QR pivot) cutoff for numerical rank.
pub const RANK_TOLERANCE: f64 = 1e-10;

fn cholesky_solve(a: DMatrix<f64>, b: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    let chol = a
        .cholesky()
        .ok_or_else(|| FridgeError::LinearAlgebra(format!("{what}: system is not positive definite")))?;
    let sol = chol.solve(b);
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(FridgeError::LinearAlgebra(format!("{what}: non-finite solution")));
    }
    Ok(sol)
}

/// Minimizer of `||y - X b||^2 / n + lambda ||b||^2` (no intercept).
///
/// Uses the `n x n` dual system when `p > n`.
pub fn ridge_solve(dataset: &Dataset, lambda: f64) -> Result<Vec<f64>> {
    ridge_solve_xy(&dataset.x, &dataset.y, lambda)
}

pub(crate) fn ridge_solve_xy(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return Err(FridgeError::InvalidInput(format!(
            "ridge multiplier must be positive, got {lambda}"
        )));
    }
    let (n, p) = x.shape();
    let nf = n as f64;
    let beta = if p > n {
        let mut gram = x * x.transpose() / nf;
        for i in 0..n {
            gram[(i, i)] += lambda;
        }
        let alpha = cholesky_solve(gram, &(y / nf), "ridge dual")?;
        x.transpose() * alpha
    } else {
        let mut gram = x.transpose() * x / nf;
        for j in 0..p {
            gram[(j, j)] += lambda;
        }
        let rhs = x.transpose() * y / nf;
        cholesky_solve(gram, &rhs, "ridge")?
    };
    Ok(beta.as_slice().to_vec())
}

/// Minimizes `Q(b)/2 + lambda * sum_j w_j b_j^2`, i.e. solves
/// `(X'X/n + 2 lambda W) b = X'y/n`.
pub(crate) fn weighted_ridge(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    weights: &[f64],
    lambda: f64,
) -> Result<Vec<f64>> {
    let (n, p) = x.shape();
    let nf = n as f64;
    let mut gram = x.transpose() * x / nf;
    for j in 0..p {
        gram[(j, j)] += 2.0 * lambda * weights[j];
    }
    let rhs = x.transpose() * y / nf;
    Ok(cholesky_solve(gram, &rhs, "weighted ridge")?.as_slice().to_vec())
}

/// Least squares with intercept on the columns in `support`, on the
/// dataset's stored scale. Coefficients outside the support are zero.
/// Rank-deficient selections get the (numerically) minimum-norm solution.
pub fn ols_refit(dataset: &Dataset, support: &[usize]) -> Result<LinearModel> {
    let (n, p) = (dataset.n(), dataset.p());
    if let Some(&j) = support.iter().find(|&&j| j >= p) {
        return Err(FridgeError::Index { index: j, len: p });
    }
    if support.len() > n {
        return Err(FridgeError::InvalidInput(format!(
            "support of size {} exceeds n = {n}",
            support.len()
        )));
    }
    let nf = n as f64;
    let y_mean = dataset.y.sum() / nf;
    let mut coefficients = vec![0.0; p];
    if support.is_empty() {
        return Ok(LinearModel {
            coefficients,
            intercept: y_mean,
        });
    }
    let mut xs = dataset.x.select_columns(support);
    let means: Vec<f64> = (0..support.len())
        .map(|c| {
            let mut col = xs.column_mut(c);
            let m = col.sum() / nf;
            col.add_scalar_mut(-m);
            m
        })
        .collect();
    let yc = dataset.y.add_scalar(-y_mean);
    let beta = match ols_exact(&xs, &yc) {
        Some(b) => b,
        None => min_norm_lstsq(&xs, &yc)?,
    };
    let mut intercept = y_mean;
    for (c, &j) in support.iter().enumerate() {
        coefficients[j] = beta[c];
        intercept -= beta[c] * means[c];
    }
    Ok(LinearModel {
        coefficients,
        intercept,
    })
}

/// Pseudo-inverse solution; singular values below a relative cutoff are dropped.
fn min_norm_lstsq(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Vec<f64>> {
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = (smax * RANK_TOLERANCE).max(f64::MIN_POSITIVE);
    let beta = svd
        .solve(y, cutoff)
        .map_err(|e| FridgeError::LinearAlgebra(format!("least squares: {e}")))?;
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(FridgeError::LinearAlgebra("least squares: non-finite solution".into()));
    }
    Ok(beta.as_slice().to_vec())
}

/// Full-rank least squares through a QR factorization; `None` when the
/// columns are (numerically) dependent.
fn ols_exact(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<Vec<f64>> {
    let k = x.ncols();
    if k > x.nrows() {
        return None;
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..k).any(|i| r[(i, i)].abs() <= RANK_TOLERANCE * scale) {
        return None;
    }
    let qty = qr.q().transpose() * y;
    let beta = r.solve_upper_triangular(&qty)?;
    beta.iter().all(|v| v.is_finite()).then(|| beta.as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ridge_orthonormal_closed_form() {
        // Columns orthogonal with X'X/n = I for n = 4.
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0]);
        let y = DVector::from_vec(vec![3.0, 1.0, -2.0, 0.5]);
        let d = Dataset::new(x.clone(), y.clone(), None).unwrap();
        let lambda = 0.7;
        let beta = ridge_solve(&d, lambda).unwrap();
        for j in 0..2 {
            let xty = x.column(j).dot(&y) / 4.0;
            assert!((beta[j] - xty / (1.0 + lambda)).abs() < 1e-14);
        }
    }

    #[test]
    fn ridge_scalar_and_dual() {
        let v = DVector::from_vec(vec![-1.0, 1.0]);
        let d = Dataset::new(DMatrix::from_column_slice(2, 1, v.as_slice()), v, None).unwrap();
        assert!((ridge_solve(&d, 1.0).unwrap()[0] - 0.5).abs() < 1e-15);

        // p > n goes through the dual; compare with the primal normal equations.
        let x = DMatrix::from_fn(3, 5, |i, j| ((i + 2 * j) as f64).sin());
        let y = DVector::from_vec(vec![1.0, -0.5, 2.0]);
        let d = Dataset::new(x.clone(), y.clone(), None).unwrap();
        let beta = DVector::from_vec(ridge_solve(&d, 0.3).unwrap());
        let lhs = (x.transpose() * &x / 3.0) * &beta + &beta * 0.3;
        let rhs = x.transpose() * y / 3.0;
        assert!((lhs - rhs).amax() < 1e-12);
        assert!(ridge_solve(&d, 0.0).is_err());
    }

    #[test]
    fn ridge_tends_to_ols() {
        let x = DMatrix::from_fn(20, 3, |i, j| ((i * (j + 2)) as f64 * 0.37).cos());
        let truth = DVector::from_vec(vec![1.5, -2.0, 0.25]);
        let y = &x * &truth;
        let d = Dataset::new(x, y, None).unwrap();
        let beta = ridge_solve(&d, 1e-12).unwrap();
        for j in 0..3 {
            assert!((beta[j] - truth[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn ols_refit_cases() {
        let x = DMatrix::from_fn(10, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 + (i * j) as f64 * 0.1);
        let y = x.column(0) * 2.0;
        let d = Dataset::new(x, y, None).unwrap();
        let fit = ols_refit(&d, &[0]).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-12);
        assert_eq!(fit.coefficients[1], 0.0);

        let empty = ols_refit(&d, &[]).unwrap();
        assert!(empty.coefficients.iter().all(|b| *b == 0.0));
        assert!((empty.intercept - d.y.mean()).abs() < 1e-15);
    }

    #[test]
    fn ols_refit_collinear_support_is_min_norm() {
        // Duplicate columns: the minimum-norm fit splits the weight evenly.
        let base: Vec<f64> = (0..8).map(|i| (i as f64 * 0.9).sin()).collect();
        let mut data = base.clone();
        data.extend(&base);
        let x = DMatrix::from_column_slice(8, 2, &data);
        let y = DVector::from_vec(base.iter().map(|v| 3.0 * v).collect());
        let d = Dataset::new(x, y, None).unwrap();
        let fit = ols_refit(&d, &[0, 1]).unwrap();
        assert!((fit.coefficients[0] - 1.5).abs() < 1e-10);
        assert!((fit.coefficients[1] - 1.5).abs() < 1e-10);
    }
}
