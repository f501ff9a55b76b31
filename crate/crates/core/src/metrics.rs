//! Evaluation quantities for simulations and real data.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FridgeError, Result};
use crate::solvers::SolutionPath;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mse: f64,
    pub model_size: usize,
    pub sensitivity_pct: f64,
    pub specificity_pct: f64,
    pub method_label: String,
}

/// `||X (beta_hat - beta_star)||^2` on raw-scale coefficients.
pub fn oracle_mse(x_eval: &DMatrix<f64>, beta_hat: &[f64], beta_star: &[f64]) -> Result<f64> {
    if beta_hat.len() != beta_star.len() || x_eval.ncols() != beta_hat.len() {
        return Err(FridgeError::InvalidInput(format!(
            "dimension mismatch: X has {} columns, estimates {} and truth {}",
            x_eval.ncols(),
            beta_hat.len(),
            beta_star.len()
        )));
    }
    let diff = DVector::from_iterator(beta_hat.len(), beta_hat.iter().zip(beta_star).map(|(a, b)| a - b));
    Ok((x_eval * diff).norm_squared())
}

/// Smallest [`oracle_mse`] along a path and the lambda achieving it
/// (the smallest such lambda on ties).
pub fn best_potential(path: &SolutionPath, x_eval: &DMatrix<f64>, beta_star: &[f64]) -> Result<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for fit in &path.fits {
        let v = oracle_mse(x_eval, &fit.raw_coefficients, beta_star)?;
        if best.is_none_or(|(b, _)| v < b) {
            best = Some((v, fit.lambda));
        }
    }
    best.ok_or_else(|| FridgeError::InvalidInput("empty solution path".into()))
}

/// Sensitivity and specificity, in percent, of an estimated support.
pub fn selection_metrics(support_hat: &[usize], support_star: &[usize], p: usize) -> Result<(f64, f64)> {
    if let Some(&j) = support_hat.iter().chain(support_star).find(|&&j| j >= p) {
        return Err(FridgeError::Index { index: j, len: p });
    }
    let hat: BTreeSet<usize> = support_hat.iter().copied().collect();
    let star: BTreeSet<usize> = support_star.iter().copied().collect();
    if star.is_empty() {
        return Err(FridgeError::InvalidInput("sensitivity undefined for an empty true support".into()));
    }
    let tp = hat.intersection(&star).count();
    let sensitivity = 100.0 * tp as f64 / star.len() as f64;
    let negatives = p - star.len();
    let specificity = if negatives == 0 {
        100.0
    } else {
        let fp = hat.difference(&star).count();
        100.0 * (negatives - fp) as f64 / negatives as f64
    };
    Ok((sensitivity, specificity))
}

/// Fraction of paired runs where `errors_a` is strictly below `errors_b`.
pub fn win_rate(errors_a: &[f64], errors_b: &[f64]) -> Result<f64> {
    if errors_a.len() != errors_b.len() {
        return Err(FridgeError::InvalidInput(format!(
            "win rate needs paired runs: {} vs {}",
            errors_a.len(),
            errors_b.len()
        )));
    }
    if errors_a.is_empty() {
        return Err(FridgeError::InvalidInput("win rate of zero runs".into()));
    }
    let wins = errors_a.iter().zip(errors_b).filter(|(a, b)| a < b).count();
    Ok(wins as f64 / errors_a.len() as f64)
}

/// Mean squared prediction error against observed responses.
pub fn residual_mse(predicted: &DVector<f64>, observed: &DVector<f64>) -> f64 {
    (predicted - observed).norm_squared() / observed.len() as f64
}
