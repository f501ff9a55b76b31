//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use fridge::Dataset;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// `P_m(g)` by summing every product of `m + 1` distinct entries.
pub fn enumerate_penalty(g: &[f64], m: usize) -> f64 {
    fn go(g: &[f64], start: usize, left: usize, acc: f64) -> f64 {
        if left == 0 {
            return acc;
        }
        (start..=g.len() - left).map(|i| go(g, i + 1, left - 1, acc * g[i])).sum()
    }
    if m + 1 > g.len() {
        return 0.0;
    }
    go(g, 0, m + 1, 1.0)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * b.abs()
}

/// Largest violation of the Lasso optimality conditions on standardized data.
pub fn lasso_kkt(data: &Dataset, beta: &[f64], lambda: f64) -> f64 {
    let n = data.n() as f64;
    let r = &data.y - &data.x * DVector::from_column_slice(beta);
    (0..data.p())
        .map(|j| {
            let c = data.x.column(j).dot(&r) / n;
            if beta[j] != 0.0 {
                (c - lambda * beta[j].signum()).abs()
            } else {
                (c.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Textbook cyclic Lasso on standardized data, run to a tight fixed point.
pub fn reference_lasso(data: &Dataset, lambda: f64) -> Vec<f64> {
    let n = data.n() as f64;
    let p = data.p();
    let mut beta = vec![0.0; p];
    let mut r = data.y.clone();
    for _ in 0..100_000 {
        let mut delta: f64 = 0.0;
        for j in 0..p {
            let xj = data.x.column(j);
            let colsq = xj.norm_squared() / n;
            let z = xj.dot(&r) / n + colsq * beta[j];
            let new = fridge::solvers::soft_threshold(z, lambda) / colsq;
            let d = new - beta[j];
            if d != 0.0 {
                r.axpy(-d, &xj, 1.0);
                beta[j] = new;
                delta = delta.max(d.abs());
            }
        }
        if delta < 1e-14 {
            break;
        }
    }
    beta
}

/// Least squares with an intercept on the given raw columns; returns the SSE.
/// Rank deficiency is handled by a pseudo-inverse.
pub fn subset_sse(x: &DMatrix<f64>, y: &DVector<f64>, cols: &[usize]) -> f64 {
    let n = x.nrows();
    let ybar = y.mean();
    let yc = y.map(|v| v - ybar);
    if cols.is_empty() {
        return yc.norm_squared();
    }
    let mut a = DMatrix::zeros(n, cols.len());
    for (k, &j) in cols.iter().enumerate() {
        let col = x.column(j);
        let mean = col.mean();
        a.set_column(k, &col.map(|v| v - mean));
    }
    let svd = a.clone().svd(true, true);
    let cutoff = svd.singular_values.max() * 1e-10;
    let b = svd.solve(&yc, cutoff).expect("svd solve");
    (yc - a * b).norm_squared()
}

/// Raw-scale SSE of a linear model.
pub fn model_sse(x: &DMatrix<f64>, y: &DVector<f64>, model: &fridge::LinearModel) -> f64 {
    (y - model.predict(x)).norm_squared()
}

/// OLS R² with an intercept, through the normal equations on the given columns.
pub fn ols_r2(x: &DMatrix<f64>, y: &DVector<f64>, cols: &[usize]) -> f64 {
    let sse = subset_sse(x, y, cols);
    let ybar = y.mean();
    let sst: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    1.0 - sse / sst
}

/// Random regression problem with correlated columns and a sparse truth.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Dataset {
    let rho: f64 = rng.random_range(0.0..0.6);
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let shared: f64 = rng.sample(rand_distr::StandardNormal);
        for j in 0..p {
            let e: f64 = rng.sample(rand_distr::StandardNormal);
            x[(i, j)] = rho.sqrt() * shared + (1.0 - rho).sqrt() * e;
        }
    }
    let beta: Vec<f64> = (0..p)
        .map(|_| if rng.random_bool(0.3) { rng.random_range(-3.0..3.0) } else { 0.0 })
        .collect();
    let y = DVector::from_fn(n, |i, _| {
        let s: f64 = (0..p).map(|j| x[(i, j)] * beta[j]).sum();
        s + rng.sample::<f64, _>(rand_distr::StandardNormal)
    });
    Dataset::new(x, y, None).expect("dataset")
}

/// Vector in `[0, 10]^p` with roughly a fifth of the entries exactly zero.
pub fn random_g(rng: &mut ChaCha8Rng, p: usize) -> Vec<f64> {
    (0..p)
        .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..10.0) })
        .collect()
}
