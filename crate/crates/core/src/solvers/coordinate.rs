use crate::component::{threshold_factor, ComponentKind};
use crate::data::Dataset;
use crate::error::{FridgeError, Result};
use crate::penalty::{leave_one_out_sums, push_value, SuffixTable};

use super::{finish_fit, initial_beta, penalty_value, require_standardized, soft_threshold, FitConfig, FridgeFit, RawFit};

/// Stopping rules shared by the coordinate solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoTolerances {
    pub max_sweeps: usize,
    pub convergence_tol: f64,
    /// Zero out `|b_j|` below this after each sweep; 0 disables truncation.
    pub truncation_threshold: f64,
}

impl Default for LassoTolerances {
    fn default() -> Self {
        let c = FitConfig::default();
        LassoTolerances {
            max_sweeps: c.max_sweeps,
            convergence_tol: c.convergence_tol,
            truncation_threshold: c.truncation_threshold,
        }
    }
}

impl From<&FitConfig> for LassoTolerances {
    fn from(c: &FitConfig) -> Self {
        LassoTolerances {
            max_sweeps: c.max_sweeps,
            convergence_tol: c.convergence_tol,
            truncation_threshold: c.truncation_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoResult {
    pub coefficients: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

/// Once the change criterion holds, sweeping continues until the
/// stationarity residual drops to this level.
pub const POLISH_KKT_TARGET: f64 = 1e-7;
/// Polishing target at `lambda = 0`, where the problem is plain least squares.
pub const OLS_KKT_TARGET: f64 = 1e-12;
/// Maximum number of polishing sweeps.
pub const POLISH_MAX_SWEEPS: usize = 200;
/// Polishing stops early when this many sweeps fail to halve the residual.
const POLISH_STALL_SWEEPS: usize = 50;
/// Squared change below which the iterate is a fixed point of the truncated update.
const FIXED_POINT_TOL: f64 = 1e-26;

enum Thresholds<'a> {
    /// `lambda * P_{m-1}(g_{-j}) * factor_j`, recomputed as the sweep moves.
    Fridge { component: &'a ComponentKind, m: usize },
    /// `lambda * w_j` with fixed weights.
    Weighted { weights: &'a [f64] },
}

struct Workspace<'a> {
    x: &'a [f64],
    y: &'a [f64],
    n: usize,
    p: usize,
    colsq: Vec<f64>,
}

impl<'a> Workspace<'a> {
    fn new(dataset: &'a Dataset) -> Self {
        let (n, p) = (dataset.n(), dataset.p());
        let x = dataset.x.as_slice();
        let colsq = (0..p)
            .map(|j| x[j * n..(j + 1) * n].iter().map(|v| v * v).sum::<f64>() / n as f64)
            .collect();
        Workspace {
            x,
            y: dataset.y.as_slice(),
            n,
            p,
            colsq,
        }
    }

    #[inline]
    fn col(&self, j: usize) -> &[f64] {
        &self.x[j * self.n..(j + 1) * self.n]
    }

    fn residual(&self, beta: &[f64]) -> Vec<f64> {
        let mut r = self.y.to_vec();
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                for (ri, xi) in r.iter_mut().zip(self.col(j)) {
                    *ri -= xi * b;
                }
            }
        }
        r
    }

    #[inline]
    fn set_coordinate(&self, r: &mut [f64], beta: &mut [f64], j: usize, new: f64) {
        let delta = new - beta[j];
        if delta != 0.0 {
            for (ri, xi) in r.iter_mut().zip(self.col(j)) {
                *ri -= xi * delta;
            }
            beta[j] = new;
        }
    }
}

impl Thresholds<'_> {
    fn all(&self, beta: &[f64], lambda: f64) -> Vec<f64> {
        match self {
            Thresholds::Fridge { component, m } => {
                let g: Vec<f64> = beta.iter().enumerate().map(|(j, b)| component.value(j, *b)).collect();
                leave_one_out_sums(&g, *m)
                    .into_iter()
                    .enumerate()
                    .map(|(j, l)| lambda * l * threshold_factor(component, j, beta[j], *m))
                    .collect()
            }
            Thresholds::Weighted { weights } => weights.iter().map(|w| lambda * w).collect(),
        }
    }

    /// The penalty at `beta`, without the lambda multiplier.
    fn penalty(&self, beta: &[f64]) -> f64 {
        match self {
            Thresholds::Fridge { component, m } => penalty_value(component, beta, *m),
            Thresholds::Weighted { weights } => beta.iter().zip(weights.iter()).map(|(b, w)| w * b.abs()).sum(),
        }
    }
}

/// Largest subgradient violation at `beta` with residual `r`.
fn stationarity(ws: &Workspace<'_>, r: &[f64], beta: &[f64], gamma: &[f64]) -> f64 {
    let nf = ws.n as f64;
    (0..ws.p)
        .map(|j| {
            let corr = ws.col(j).iter().zip(r).map(|(x, r)| x * r).sum::<f64>() / nf;
            if beta[j] != 0.0 {
                (corr - gamma[j] * beta[j].signum()).abs()
            } else {
                (corr.abs() - gamma[j]).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Cyclic coordinate descent with per-sweep truncation.
///
/// The fit counts as converged once the change criterion holds; it is then
/// polished for up to [`POLISH_MAX_SWEEPS`] further sweeps until the
/// stationarity residual reaches [`POLISH_KKT_TARGET`] ([`OLS_KKT_TARGET`] at zero penalty), the iterate stops
/// moving, or progress stalls (as it does along exactly collinear directions
/// at tiny lambda).
///
/// Truncation can trap a coordinate at zero when its one-step update is below
/// the threshold but its value at the joint optimum is not. If polishing ends
/// above the target, a release phase sweeps without truncation, truncates once
/// at the end, and is kept when it is the more stationary of the two.
fn run_sweeps(
    dataset: &Dataset,
    mut beta: Vec<f64>,
    lambda: f64,
    thresholds: Thresholds<'_>,
    tol: &LassoTolerances,
) -> Result<RawFit> {
    let ws = Workspace::new(dataset);
    truncate(&mut beta, tol.truncation_threshold);
    let mut main = sweep_phase(&ws, beta, lambda, &thresholds, tol, tol.truncation_threshold, tol.max_sweeps)?;

    if main.converged && tol.truncation_threshold > 0.0 && main.residual > POLISH_KKT_TARGET {
        let budget = (tol.max_sweeps - main.sweeps).min(POLISH_MAX_SWEEPS);
        if budget > 0 {
            let mut release = sweep_phase(&ws, main.beta.clone(), lambda, &thresholds, tol, 0.0, budget)?;
            truncate(&mut release.beta, tol.truncation_threshold);
            let r = ws.residual(&release.beta);
            let residual = stationarity(&ws, &r, &release.beta, &thresholds.all(&release.beta, lambda));
            main.sweeps += release.sweeps;
            if residual < main.residual {
                let rss: f64 = r.iter().map(|v| v * v).sum();
                release
                    .trace
                    .push(rss / (2.0 * ws.n as f64) + lambda * thresholds.penalty(&release.beta));
                main.trace.extend(release.trace);
                main.beta = release.beta;
            }
        }
    }

    Ok(RawFit {
        beta: main.beta,
        sweeps: main.sweeps,
        converged: main.converged,
        trace: main.trace,
        warnings: Vec::new(),
    })
}

struct Phase {
    beta: Vec<f64>,
    sweeps: usize,
    converged: bool,
    trace: Vec<f64>,
    /// Stationarity residual at the final iterate (infinite if never converged).
    residual: f64,
}

fn sweep_phase(
    ws: &Workspace<'_>,
    mut beta: Vec<f64>,
    lambda: f64,
    thresholds: &Thresholds<'_>,
    tol: &LassoTolerances,
    truncation: f64,
    max_sweeps: usize,
) -> Result<Phase> {
    let (n, p) = (ws.n, ws.p);
    let nf = n as f64;

    let mut trace = Vec::new();
    let mut last_finite = beta.clone();
    let mut converged = false;
    let mut sweeps = 0;
    let mut g = vec![0.0; p];
    let mut prefix = Vec::new();
    let mut polish_sweeps = 0;
    let mut polish_start = f64::INFINITY;
    let mut residual = f64::INFINITY;
    let target = if lambda == 0.0 { OLS_KKT_TARGET } else { POLISH_KKT_TARGET };

    while sweeps < max_sweeps {
        sweeps += 1;
        let start = beta.clone();
        let mut r = ws.residual(&beta);

        let suffix = match thresholds {
            Thresholds::Fridge { component, m } if *m > 0 => {
                for (j, gj) in g.iter_mut().enumerate() {
                    *gj = component.value(j, beta[j]);
                }
                prefix.clear();
                prefix.resize(m + 1, 0.0);
                prefix[0] = 1.0;
                Some(SuffixTable::new(&g, *m))
            }
            _ => None,
        };

        for j in 0..p {
            let old = beta[j];
            let z = ws.col(j).iter().zip(&r).map(|(x, r)| x * r).sum::<f64>() / nf + ws.colsq[j] * old;
            let gamma = match thresholds {
                Thresholds::Fridge { component, m } => {
                    let loo = match &suffix {
                        Some(s) => s.combine(&prefix, j + 1),
                        None => 1.0,
                    };
                    lambda * loo * threshold_factor(component, j, old, *m)
                }
                Thresholds::Weighted { weights } => lambda * weights[j],
            };
            let new = soft_threshold(z, gamma) / ws.colsq[j];
            ws.set_coordinate(&mut r, &mut beta, j, new);
            if let (Some(_), Thresholds::Fridge { component, .. }) = (&suffix, thresholds) {
                push_value(&mut prefix, component.value(j, new));
            }
        }

        for j in 0..p {
            if beta[j] != 0.0 && beta[j].abs() < truncation {
                ws.set_coordinate(&mut r, &mut beta, j, 0.0);
            }
        }

        let rss: f64 = r.iter().map(|v| v * v).sum();
        let obj = rss / (2.0 * nf) + lambda * thresholds.penalty(&beta);
        if !obj.is_finite() || beta.iter().any(|b| !b.is_finite()) {
            return Err(FridgeError::Divergence {
                sweeps,
                last_finite,
            });
        }
        trace.push(obj);
        last_finite.copy_from_slice(&beta);

        let change = (0..p)
            .map(|j| {
                let d = beta[j] - start[j];
                d * d * ws.colsq[j]
            })
            .fold(0.0, f64::max);
        if change < tol.convergence_tol {
            converged = true;
        }
        if converged {
            residual = stationarity(ws, &r, &beta, &thresholds.all(&beta, lambda));
            if change < FIXED_POINT_TOL || polish_sweeps == POLISH_MAX_SWEEPS {
                break;
            }
            if polish_sweeps == 0 {
                polish_start = residual;
            }
            polish_sweeps += 1;
            if residual <= target
                || (polish_sweeps >= POLISH_STALL_SWEEPS && residual > 0.5 * polish_start)
            {
                break;
            }
        }
    }

    Ok(Phase {
        beta,
        sweeps,
        converged,
        trace,
        residual,
    })
}

pub(crate) fn truncate(beta: &mut [f64], threshold: f64) {
    for b in beta.iter_mut() {
        if b.abs() < threshold {
            *b = 0.0;
        }
    }
}

/// Coordinate descent on the Fridge objective. Each coordinate is replaced by
/// `S(x_j'r_j/n, lambda * P_{m-1}(g_{-j}) * factor_j) / (x_j'x_j/n)`, where
/// `r_j` is the residual without predictor `j`.
///
/// Reaching `max_sweeps` is not an error; the fit comes back with
/// `converged = false`.
pub fn coordinate_descent_fit(dataset: &Dataset, config: &FitConfig, init: Option<&[f64]>) -> Result<FridgeFit> {
    require_standardized(dataset)?;
    config.validate(dataset.p())?;
    if !config.component.supports_coordinate_descent() {
        return Err(FridgeError::InvalidConfig(
            "the square component has no closed-form coordinate update; use the irr solver".into(),
        ));
    }
    let beta = initial_beta(dataset, config, init)?;
    let raw = run_sweeps(
        dataset,
        beta,
        config.lambda,
        Thresholds::Fridge {
            component: &config.component,
            m: config.tms,
        },
        &LassoTolerances::from(config),
    )?;
    Ok(finish_fit(dataset, config, raw))
}

/// Minimizes `Q(b)/2 + lambda * sum_j w_j |b_j|` by cyclic coordinate descent.
/// Coordinates with `w_j = 0` are updated without penalty.
pub fn weighted_lasso(
    dataset: &Dataset,
    weights: &[f64],
    lambda: f64,
    init: Option<&[f64]>,
    tolerances: &LassoTolerances,
) -> Result<LassoResult> {
    require_standardized(dataset)?;
    let p = dataset.p();
    if weights.len() != p {
        return Err(FridgeError::InvalidInput(format!(
            "{} weights for {p} coefficients",
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(FridgeError::InvalidInput("weights must be finite and nonnegative".into()));
    }
    if !(lambda >= 0.0) {
        return Err(FridgeError::InvalidConfig(format!("lambda must be nonnegative, got {lambda}")));
    }
    let beta = match init {
        Some(b) => b.to_vec(),
        None => vec![0.0; p],
    };
    let raw = run_sweeps(dataset, beta, lambda, Thresholds::Weighted { weights }, tolerances)?;
    Ok(LassoResult {
        coefficients: raw.beta,
        sweeps: raw.sweeps,
        converged: raw.converged,
    })
}
