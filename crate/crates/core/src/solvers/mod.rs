//! Fitting Fridge models.
//!
//! Every solver works on a standardized [`Dataset`] and minimizes
//!
//! ```text
//! Q(b) / 2 + lambda * P_m(g(b)),   Q(b) = ||y - X b||^2 / n
//! ```
//!
//! [`coordinate_descent_fit`] applies the closed-form soft-threshold update
//! coordinate by coordinate; [`irl_fit`] and [`irr_fit`] rewrite the penalty
//! as a weighted Lasso / ridge penalty at the current iterate and iterate.

mod coordinate;
mod path;
mod reweighted;

pub use coordinate::{coordinate_descent_fit, weighted_lasso, LassoResult, LassoTolerances};
pub use path::{solution_path, PathFailure, SolutionPath};
pub use reweighted::{irl_fit, irr_fit};

use serde::{Deserialize, Serialize};

use crate::component::{threshold_factor, ComponentKind};
use crate::data::{support_of, Dataset};
use crate::error::{FridgeError, Result};
use crate::linalg::ridge_solve;
use crate::penalty::{elementary_sums, leave_one_out_sums};

/// Default plug-in magnitude for [`lambda_max`].
pub const LAMBDA_MAX_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// Cyclic coordinate descent.
    #[default]
    Cd,
    /// Iteratively reweighted Lasso.
    Irl,
    /// Iteratively reweighted ridge (square component only).
    Irr,
}

impl std::str::FromStr for SolverKind {
    type Err = FridgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cd" => Ok(SolverKind::Cd),
            "irl" => Ok(SolverKind::Irl),
            "irr" => Ok(SolverKind::Irr),
            other => Err(FridgeError::InvalidConfig(format!("unknown solver `{other}`"))),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverKind::Cd => "cd",
            SolverKind::Irl => "irl",
            SolverKind::Irr => "irr",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub lambda: f64,
    /// Target model size `m`.
    pub tms: usize,
    pub component: ComponentKind,
    pub solver: SolverKind,
    pub max_sweeps: usize,
    /// Bound on `max_j (1/n) sum_i (x_ij * delta_j)^2` between iterates.
    pub convergence_tol: f64,
    /// Standardized-scale magnitude below which coefficients are zeroed.
    pub truncation_threshold: f64,
    /// Ridge multiplier of the default initializer.
    pub ridge_init_lambda: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            lambda: 0.0,
            tms: 0,
            component: ComponentKind::Absolute,
            solver: SolverKind::Cd,
            max_sweeps: 10_000,
            convergence_tol: 1e-9,
            truncation_threshold: 1e-4,
            ridge_init_lambda: 1e-3,
        }
    }
}

impl FitConfig {
    pub fn new(lambda: f64, tms: usize) -> Self {
        FitConfig {
            lambda,
            tms,
            ..FitConfig::default()
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        FitConfig {
            lambda,
            ..self.clone()
        }
    }

    /// Same settings at another target model size; a geometric-mean
    /// component follows the new order.
    pub fn with_tms(&self, tms: usize) -> Self {
        let component = match self.component {
            ComponentKind::GeometricMean { .. } => ComponentKind::GeometricMean { order: tms },
            ref other => other.clone(),
        };
        FitConfig {
            tms,
            component,
            ..self.clone()
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.tms >= p {
            return Err(FridgeError::InvalidOrder {
                order: self.tms,
                len: p,
            });
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(FridgeError::InvalidConfig(format!(
                "lambda must be finite and nonnegative, got {}",
                self.lambda
            )));
        }
        if !(self.convergence_tol > 0.0) || !(self.truncation_threshold >= 0.0) {
            return Err(FridgeError::InvalidConfig("tolerances must be positive".into()));
        }
        if !(self.ridge_init_lambda > 0.0) {
            return Err(FridgeError::InvalidConfig(
                "ridge initializer multiplier must be positive".into(),
            ));
        }
        if self.max_sweeps == 0 {
            return Err(FridgeError::InvalidConfig("max_sweeps must be at least 1".into()));
        }
        if let ComponentKind::GeometricMean { order } = self.component {
            if order != self.tms {
                return Err(FridgeError::InvalidConfig(format!(
                    "geometric-mean component order {order} differs from target model size {}",
                    self.tms
                )));
            }
        }
        self.component.validate(Some(p))
    }
}

/// A fitted Fridge model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FridgeFit {
    /// Standardized scale.
    pub coefficients: Vec<f64>,
    /// Original scale.
    pub raw_coefficients: Vec<f64>,
    pub intercept: f64,
    pub support: Vec<usize>,
    pub lambda: f64,
    pub tms: usize,
    pub component: ComponentKind,
    pub solver: SolverKind,
    pub sweeps_used: usize,
    pub converged: bool,
    pub kkt_residual: f64,
    pub objective: f64,
    /// Objective after every sweep (coordinate descent) or outer iteration.
    pub objective_trace: Vec<f64>,
    pub warnings: Vec<String>,
}

pub(crate) struct RawFit {
    pub beta: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
    pub warnings: Vec<String>,
}

pub(crate) fn finish_fit(dataset: &Dataset, config: &FitConfig, raw: RawFit) -> FridgeFit {
    let raw_model = dataset.to_raw(&raw.beta, 0.0);
    let objective = objective(dataset, &raw.beta, config.lambda, config.tms, &config.component);
    let mut fit = FridgeFit {
        support: support_of(&raw.beta),
        raw_coefficients: raw_model.coefficients,
        intercept: raw_model.intercept,
        coefficients: raw.beta,
        lambda: config.lambda,
        tms: config.tms,
        component: config.component.clone(),
        solver: config.solver,
        sweeps_used: raw.sweeps,
        converged: raw.converged,
        kkt_residual: f64::NAN,
        objective,
        objective_trace: raw.trace,
        warnings: raw.warnings,
    };
    fit.kkt_residual = kkt_check(dataset, &fit);
    fit
}

pub(crate) fn require_standardized(dataset: &Dataset) -> Result<()> {
    if dataset.standardized {
        Ok(())
    } else {
        Err(FridgeError::InvalidInput(
            "solvers need a standardized dataset; call Dataset::standardize first".into(),
        ))
    }
}

/// `sign(z) * max(|z| - gamma, 0)`.
#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// `Q(b)/2 + lambda * P_m(g(b))`.
pub fn objective(dataset: &Dataset, beta: &[f64], lambda: f64, m: usize, component: &ComponentKind) -> f64 {
    let n = dataset.n() as f64;
    let fitted = &dataset.x * nalgebra::DVector::from_column_slice(beta);
    let rss = (&dataset.y - fitted).norm_squared();
    rss / (2.0 * n) + lambda * penalty_value(component, beta, m)
}

pub(crate) fn penalty_value(component: &ComponentKind, beta: &[f64], m: usize) -> f64 {
    let g = beta.iter().enumerate().map(|(j, b)| component.value(j, *b));
    elementary_sums(g, m + 1)[m + 1]
}

/// Fits with the solver named in `config`; `init` defaults to a ridge fit.
pub fn fit(dataset: &Dataset, config: &FitConfig, init: Option<&[f64]>) -> Result<FridgeFit> {
    match config.solver {
        SolverKind::Cd => coordinate_descent_fit(dataset, config, init),
        SolverKind::Irl => irl_fit(dataset, config, init),
        SolverKind::Irr => irr_fit(dataset, config, init),
    }
}

pub(crate) fn initial_beta(dataset: &Dataset, config: &FitConfig, init: Option<&[f64]>) -> Result<Vec<f64>> {
    match init {
        Some(b) if b.len() != dataset.p() => Err(FridgeError::InvalidInput(format!(
            "initial vector has length {} but p = {}",
            b.len(),
            dataset.p()
        ))),
        Some(b) if b.iter().any(|v| !v.is_finite()) => {
            Err(FridgeError::InvalidInput("initial vector is not finite".into()))
        }
        Some(b) => Ok(b.to_vec()),
        None => ridge_solve(dataset, config.ridge_init_lambda),
    }
}

/// Largest violation of the stationarity conditions at `fit`.
///
/// Nonzero `b_j`: `|x_j'r/n - lambda * P_{m-1}(g_{-j}) * sign(b_j) * factor_j|`;
/// zero `b_j`: `max(0, |x_j'r/n| - lambda * P_{m-1}(g_{-j}) * factor_j)`.
/// For the square component the penalty is smooth and the plain gradient is used.
pub fn kkt_check(dataset: &Dataset, fit: &FridgeFit) -> f64 {
    let beta = &fit.coefficients;
    let n = dataset.n() as f64;
    let m = fit.tms;
    let residual = &dataset.y - &dataset.x * nalgebra::DVector::from_column_slice(beta);
    let g: Vec<f64> = beta
        .iter()
        .enumerate()
        .map(|(j, b)| fit.component.value(j, *b))
        .collect();
    let loo = leave_one_out_sums(&g, m);
    let mut worst: f64 = 0.0;
    for j in 0..beta.len() {
        let corr = dataset.x.column(j).dot(&residual) / n;
        let r = if let ComponentKind::Square = fit.component {
            (corr - 2.0 * fit.lambda * loo[j] * beta[j]).abs()
        } else {
            let gamma = fit.lambda * loo[j] * threshold_factor(&fit.component, j, beta[j], m);
            if beta[j] != 0.0 {
                (corr - gamma * beta[j].signum()).abs()
            } else {
                (corr.abs() - gamma).max(0.0)
            }
        };
        worst = worst.max(r);
    }
    worst
}

/// Penalty level above which at most `m` coefficients stay nonzero, with
/// `g*` replaced by `g(epsilon * 1)`:
/// `max_j |x_j|'|y - ybar| / (n * P_{m-1}(g*_{-j}))`.
/// For `m = 0` this is the Lasso value `max_j |x_j'y| / n`.
pub fn lambda_max(dataset: &Dataset, m: usize, component: &ComponentKind, epsilon: f64) -> Result<f64> {
    require_standardized(dataset)?;
    let p = dataset.p();
    if m >= p {
        return Err(FridgeError::InvalidOrder { order: m, len: p });
    }
    if !(epsilon > 0.0) {
        return Err(FridgeError::InvalidInput(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    component.validate(Some(p))?;
    let n = dataset.n() as f64;
    let factor = |j: usize| threshold_factor(component, j, epsilon, m);
    if m == 0 {
        let value = (0..p)
            .map(|j| dataset.x.column(j).dot(&dataset.y).abs() / (n * factor(j)))
            .fold(0.0, f64::max);
        return Ok(value);
    }
    let g: Vec<f64> = (0..p).map(|j| component.value(j, epsilon)).collect();
    let loo = leave_one_out_sums(&g, m);
    let y_mean = dataset.y.mean();
    let abs_dev: Vec<f64> = dataset.y.iter().map(|v| (v - y_mean).abs()).collect();
    let mut best: f64 = 0.0;
    for j in 0..p {
        let denom = n * loo[j] * factor(j);
        if !(denom > 0.0) {
            return Err(FridgeError::InvalidInput(
                "lambda_max denominator vanished".into(),
            ));
        }
        let num: f64 = dataset
            .x
            .column(j)
            .iter()
            .zip(&abs_dev)
            .map(|(x, d)| x.abs() * d)
            .sum();
        best = best.max(num / denom);
    }
    Ok(best)
}

/// Post-hoc form of the sparsity condition, evaluated at the fitted `g`:
/// the smallest lambda for which every currently-zero coordinate with a
/// positive leave-one-out sum stays zero. `None` when no such coordinate exists.
pub fn lambda_bound_at_fit(dataset: &Dataset, fit: &FridgeFit) -> Option<f64> {
    let n = dataset.n() as f64;
    let g: Vec<f64> = fit
        .coefficients
        .iter()
        .enumerate()
        .map(|(j, b)| fit.component.value(j, *b))
        .collect();
    let loo = leave_one_out_sums(&g, fit.tms);
    let y_mean = dataset.y.mean();
    (0..dataset.p())
        .filter(|&j| fit.coefficients[j] == 0.0 && loo[j] > 0.0)
        .map(|j| {
            let num: f64 = dataset
                .x
                .column(j)
                .iter()
                .zip(dataset.y.iter())
                .map(|(x, y)| x.abs() * (y - y_mean).abs())
                .sum();
            num / (n * loo[j] * threshold_factor(&fit.component, j, 0.0, fit.tms))
        })
        .reduce(f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(1.0, 1.0), 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(FitConfig::new(1.0, 3).validate(3).is_err());
        assert!(FitConfig::new(-1.0, 0).validate(3).is_err());
        let mut c = FitConfig::new(1.0, 1);
        c.component = ComponentKind::GeometricMean { order: 2 };
        assert!(c.validate(5).is_err());
        c.component = ComponentKind::GeometricMean { order: 1 };
        assert!(c.validate(5).is_ok());
    }

    #[test]
    fn solver_names_round_trip() {
        for s in [SolverKind::Cd, SolverKind::Irl, SolverKind::Irr] {
            assert_eq!(s.to_string().parse::<SolverKind>().unwrap(), s);
        }
        assert!("newton".parse::<SolverKind>().is_err());
    }
}
