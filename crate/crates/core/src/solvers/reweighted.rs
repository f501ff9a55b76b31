//! Iteratively reweighted Lasso and ridge.
//!
//! At the current iterate the penalty is linearized in `g`: its partial
//! derivative in `g_j` is `w_j = P_{m-1}(g_{-j})`, which is also the
//! reweighting factor of the weighted-sum form `(m + 1) P_m = sum_j w_j g_j`.
//! The inner problem is then a weighted Lasso (absolute component) or a
//! weighted ridge (square component). Weights are recomputed after every
//! inner solve from the truncated iterate; a coordinate whose weight is zero
//! is left unpenalized.

use crate::component::{threshold_factor, ComponentKind};
use crate::data::Dataset;
use crate::error::{FridgeError, Result};
use crate::linalg::weighted_ridge;
use crate::penalty::leave_one_out_sums;

use super::coordinate::{truncate, weighted_lasso, LassoTolerances};
use super::{finish_fit, initial_beta, objective, require_standardized, FitConfig, FridgeFit, RawFit};

/// Consecutive non-decreasing outer objectives that stop the outer loop.
const STAGNATION_WINDOW: usize = 5;

fn max_change(a: &[f64], b: &[f64], colsq: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(colsq)
        .map(|((x, y), c)| (x - y) * (x - y) * c)
        .fold(0.0, f64::max)
}

fn column_second_moments(dataset: &Dataset) -> Vec<f64> {
    let n = dataset.n() as f64;
    (0..dataset.p())
        .map(|j| dataset.x.column(j).norm_squared() / n)
        .collect()
}

struct Stagnation {
    last: f64,
    streak: usize,
}

impl Stagnation {
    fn new() -> Self {
        Stagnation {
            last: f64::INFINITY,
            streak: 0,
        }
    }

    /// True once the objective has failed to decrease `STAGNATION_WINDOW` times in a row.
    fn observe(&mut self, obj: f64) -> bool {
        if obj >= self.last {
            self.streak += 1;
        } else {
            self.streak = 0;
        }
        self.last = obj;
        self.streak >= STAGNATION_WINDOW
    }
}

/// Halvings tried before a reweighted step is declared unproductive.
const MAX_BACKTRACKS: usize = 40;

/// First point of `from + t (to - from)`, `t = 1, 1/2, ...`, whose truncated
/// objective does not exceed `current`. `None` when no step makes progress.
fn backtrack(
    from: &[f64],
    to: &[f64],
    current: f64,
    truncation: f64,
    objective_at: &impl Fn(&[f64]) -> f64,
) -> Option<(Vec<f64>, f64)> {
    let slack = 1e-12 * current.abs().max(1.0);
    let mut t = 1.0;
    for _ in 0..MAX_BACKTRACKS {
        let mut trial: Vec<f64> = from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect();
        truncate(&mut trial, truncation);
        let obj = objective_at(&trial);
        if obj <= current + slack {
            return Some((trial, obj));
        }
        t *= 0.5;
    }
    None
}

/// Iteratively reweighted Lasso.
///
/// Each outer step solves `Q(b)/2 + lambda * sum_j w_j factor_j |b_j|` with the
/// weights frozen at the previous iterate, then backtracks toward the previous
/// iterate until the Fridge objective does not increase. Stops when the outer iterates
/// change by less than `convergence_tol` (same metric as coordinate descent).
/// The sweep budget `max_sweeps` is shared by all inner solves.
pub fn irl_fit(dataset: &Dataset, config: &FitConfig, init: Option<&[f64]>) -> Result<FridgeFit> {
    require_standardized(dataset)?;
    config.validate(dataset.p())?;
    if !matches!(
        config.component,
        ComponentKind::Absolute | ComponentKind::AdaptiveAbsolute { .. }
    ) {
        return Err(FridgeError::InvalidConfig(format!(
            "irl supports the absolute and adaptive components, not `{}`",
            config.component.label()
        )));
    }
    let m = config.tms;
    let colsq = column_second_moments(dataset);
    let mut beta = initial_beta(dataset, config, init)?;
    truncate(&mut beta, config.truncation_threshold);

    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    let mut stagnation = Stagnation::new();
    let mut sweeps = 0;
    let mut converged = false;
    let objective_at = |b: &[f64]| objective(dataset, b, config.lambda, m, &config.component);
    let mut current = objective_at(&beta);

    while sweeps < config.max_sweeps {
        let g: Vec<f64> = beta
            .iter()
            .enumerate()
            .map(|(j, b)| config.component.value(j, *b))
            .collect();
        let weights: Vec<f64> = leave_one_out_sums(&g, m)
            .into_iter()
            .enumerate()
            .map(|(j, w)| w * threshold_factor(&config.component, j, beta[j], m))
            .collect();
        let tolerances = LassoTolerances {
            max_sweeps: config.max_sweeps - sweeps,
            ..LassoTolerances::from(config)
        };
        let inner = weighted_lasso(dataset, &weights, config.lambda, Some(&beta), &tolerances)?;
        sweeps += inner.sweeps;

        // The weighted problem shares the penalty's slope at `beta` but not its
        // curvature, so a full step can overshoot; backtrack on the true objective.
        let (next, obj) = match backtrack(&beta, &inner.coefficients, current, config.truncation_threshold, &objective_at) {
            Some(step) => step,
            None => {
                // The reweighted problem moves away from `beta`, so this is not a fixed point.
                warnings.push("reweighted step made no progress on the Fridge objective".into());
                break;
            }
        };
        if !obj.is_finite() {
            return Err(FridgeError::Divergence {
                sweeps,
                last_finite: beta,
            });
        }
        let change = max_change(&next, &beta, &colsq);
        beta = next;
        current = obj;
        trace.push(obj);

        // With m = 0 the weights do not depend on the iterate.
        if inner.converged && (change < config.convergence_tol || m == 0) {
            converged = true;
            break;
        }
        if stagnation.observe(obj) {
            warnings.push(format!(
                "objective did not decrease over {STAGNATION_WINDOW} consecutive outer iterations"
            ));
            break;
        }
    }

    Ok(finish_fit(
        dataset,
        config,
        RawFit {
            beta,
            sweeps,
            converged,
            trace,
            warnings,
        },
    ))
}

/// Iteratively reweighted ridge for the square component: each outer step
/// solves `Q(b)/2 + lambda * sum_j w_j b_j^2` exactly, then truncates.
/// `sweeps_used` counts linear solves.
pub fn irr_fit(dataset: &Dataset, config: &FitConfig, init: Option<&[f64]>) -> Result<FridgeFit> {
    require_standardized(dataset)?;
    config.validate(dataset.p())?;
    if config.component != ComponentKind::Square {
        return Err(FridgeError::InvalidConfig(format!(
            "irr needs the square component, not `{}`",
            config.component.label()
        )));
    }
    let m = config.tms;
    let colsq = column_second_moments(dataset);
    let mut beta = initial_beta(dataset, config, init)?;
    truncate(&mut beta, config.truncation_threshold);

    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    let mut stagnation = Stagnation::new();
    let mut solves = 0;
    let mut converged = false;

    while solves < config.max_sweeps {
        let g: Vec<f64> = beta.iter().map(|b| b * b).collect();
        let weights = leave_one_out_sums(&g, m);
        let mut next = weighted_ridge(&dataset.x, &dataset.y, &weights, config.lambda)?;
        truncate(&mut next, config.truncation_threshold);
        solves += 1;
        let change = max_change(&next, &beta, &colsq);
        beta = next;

        let obj = objective(dataset, &beta, config.lambda, m, &config.component);
        if !obj.is_finite() {
            return Err(FridgeError::Divergence {
                sweeps: solves,
                last_finite: beta,
            });
        }
        trace.push(obj);
        if change < config.convergence_tol || m == 0 {
            converged = true;
            break;
        }
        if stagnation.observe(obj) {
            warnings.push(format!(
                "objective did not decrease over {STAGNATION_WINDOW} consecutive outer iterations"
            ));
            break;
        }
    }

    Ok(finish_fit(
        dataset,
        config,
        RawFit {
            beta,
            sweeps: solves,
            converged,
            trace,
            warnings,
        },
    ))
}
