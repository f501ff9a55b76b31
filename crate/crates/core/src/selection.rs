//! Tuning and model selection: lambda grids, k-fold cross-validation,
//! the extreme (lambda -> infinity) Fridge, target-model-size selection by
//! repeated split-sample validation, and bootstrap standard errors.
//!
//! Every routine here takes raw (unstandardized) data or standardized data
//! alike; standardization is recomputed on whatever subset is being fitted.
//! Repeats, folds and replicates run on the ambient rayon pool and are
//! reduced in index order, so results do not depend on the thread count.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{support_of, Dataset, LinearModel};
use crate::error::{FridgeError, Result};
use crate::linalg::ols_refit;
use crate::metrics::residual_mse;
use crate::rng::{permutation, purpose, stream_id, substream};
use crate::solvers::{fit, lambda_max, solution_path, FitConfig, FridgeFit, LAMBDA_MAX_EPSILON};

/// Smallest value of every lambda grid.
pub const LAMBDA_GRID_FLOOR: f64 = 1e-8;

/// `n_points` log-linearly spaced values on `[1e-8, lambda_max]`, ascending.
pub fn lambda_grid(lambda_max: f64, n_points: usize) -> Result<Vec<f64>> {
    if !(lambda_max > LAMBDA_GRID_FLOOR) || !lambda_max.is_finite() {
        return Err(FridgeError::InvalidInput(format!(
            "lambda_max must be finite and exceed {LAMBDA_GRID_FLOOR}, got {lambda_max}"
        )));
    }
    match n_points {
        0 => Err(FridgeError::InvalidInput("grid needs at least one point".into())),
        1 => Ok(vec![lambda_max]),
        _ => {
            let lo = LAMBDA_GRID_FLOOR.ln();
            let step = (lambda_max.ln() - lo) / (n_points - 1) as f64;
            let mut grid: Vec<f64> = (0..n_points).map(|i| (lo + step * i as f64).exp()).collect();
            grid[0] = LAMBDA_GRID_FLOOR;
            grid[n_points - 1] = lambda_max;
            Ok(grid)
        }
    }
}

/// The grid used when none is supplied: `lambda_grid(lambda_max(..), n_points)`
/// on the standardized data.
pub fn default_grid(dataset: &Dataset, config: &FitConfig, n_points: usize) -> Result<Vec<f64>> {
    let std = dataset.standardize()?;
    let top = lambda_max(&std, config.tms, &config.component, LAMBDA_MAX_EPSILON)?;
    lambda_grid(top, n_points)
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

fn sample_sd(values: &[f64]) -> f64 {
    let (_, se) = mean_and_se(values);
    se * (values.len() as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub grid: Vec<f64>,
    pub mean_cv_error: Vec<f64>,
    pub se_cv_error: Vec<f64>,
    pub best_lambda: f64,
    pub best_index: usize,
    /// Fold label of every row.
    pub fold_assignments: Vec<usize>,
    /// Held-out MSE per fold (outer) and grid point (inner).
    pub fold_errors: Vec<Vec<f64>>,
}

/// Seeded assignment of `n` rows to `k` folds of near-equal size.
pub fn fold_assignments(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(FridgeError::InvalidConfig(format!("k must be at least 2, got {k}")));
    }
    if n < 2 * k {
        return Err(FridgeError::InvalidConfig(format!(
            "{k} folds over {n} rows leave a fold with fewer than 2 observations"
        )));
    }
    let order = permutation(n, &mut substream(seed, stream_id(purpose::FOLDS, 0)));
    let mut folds = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        folds[row] = pos % k;
    }
    Ok(folds)
}

/// k-fold cross-validation of the Fridge path over `grid`, with folds drawn
/// from `seed`.
pub fn kfold_cv(dataset: &Dataset, grid: &[f64], config: &FitConfig, k: usize, seed: u64) -> Result<CvResult> {
    let folds = fold_assignments(dataset.n(), k, seed)?;
    kfold_cv_with_folds(dataset, grid, config, &folds)
}

/// Cross-validation with explicit fold labels `0..k`. Each training portion is
/// standardized on its own; the held-out error is the raw-scale MSE against
/// the observed responses. Ties in the mean curve go to the smallest lambda.
pub fn kfold_cv_with_folds(dataset: &Dataset, grid: &[f64], config: &FitConfig, folds: &[usize]) -> Result<CvResult> {
    if folds.len() != dataset.n() {
        return Err(FridgeError::InvalidInput(format!(
            "{} fold labels for {} rows",
            folds.len(),
            dataset.n()
        )));
    }
    let k = folds.iter().copied().max().map_or(0, |m| m + 1);
    if k < 2 {
        return Err(FridgeError::InvalidConfig("cross-validation needs at least 2 folds".into()));
    }
    let mut members = vec![Vec::new(); k];
    for (row, &f) in folds.iter().enumerate() {
        members[f].push(row);
    }
    if let Some(f) = members.iter().position(|m| m.len() < 2) {
        return Err(FridgeError::InvalidConfig(format!("fold {f} has fewer than 2 observations")));
    }

    let fold_errors: Vec<Vec<f64>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let train_rows: Vec<usize> = (0..dataset.n()).filter(|&i| folds[i] != f).collect();
            let train = dataset.select_rows(&train_rows).standardize()?;
            let test = dataset.select_rows(&members[f]);
            let path = solution_path(&train, grid, config)?;
            Ok(path
                .fits
                .iter()
                .map(|fit| held_out_mse(fit, &test))
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut mean_cv_error = Vec::with_capacity(grid.len());
    let mut se_cv_error = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let column: Vec<f64> = fold_errors.iter().map(|e| e[i]).collect();
        let (mean, se) = mean_and_se(&column);
        mean_cv_error.push(mean);
        se_cv_error.push(se);
    }
    let mut best_index = 0;
    for i in 1..grid.len() {
        if mean_cv_error[i] < mean_cv_error[best_index] {
            best_index = i;
        }
    }
    log::debug!("cv: best lambda {} (index {best_index})", grid[best_index]);
    Ok(CvResult {
        grid: grid.to_vec(),
        best_lambda: grid[best_index],
        best_index,
        mean_cv_error,
        se_cv_error,
        fold_assignments: folds.to_vec(),
        fold_errors,
    })
}

fn held_out_mse(fit: &FridgeFit, test: &Dataset) -> f64 {
    let model = LinearModel {
        coefficients: fit.raw_coefficients.clone(),
        intercept: fit.intercept,
    };
    residual_mse(&model.predict(&test.raw_x()), &test.raw_y())
}

/// Continuation settings for [`extreme_fridge`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremeOptions {
    /// Points on the initial path up to `lambda_max`.
    pub grid_points: usize,
    /// Consecutive doublings with an unchanged support of size at most `m`.
    pub stable_doublings: usize,
    /// Doublings allowed past `lambda_max` (the cap is `2^max_doublings * lambda_max`).
    pub max_doublings: u32,
}

impl Default for ExtremeOptions {
    fn default() -> Self {
        ExtremeOptions {
            grid_points: 100,
            stable_doublings: 3,
            max_doublings: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeFit {
    pub tms: usize,
    pub support: Vec<usize>,
    /// Least-squares refit on `support`, raw scale.
    pub ols_fit: LinearModel,
    pub lambda_used: f64,
    pub path_tail_stable: bool,
    /// The penalized fit at `lambda_used`.
    pub terminal_fit: FridgeFit,
}

/// Best `m`-variable least-squares model reached through the Fridge path:
/// an ascending warm-started path up to `lambda_max`, then doublings of lambda
/// until the support has at most `m` members and stays put for
/// `stable_doublings` steps, followed by an OLS refit on that support.
///
/// Hitting the cap is not an error; the result has `path_tail_stable = false`.
/// `m = 0` returns the intercept-only model.
pub fn extreme_fridge(dataset: &Dataset, config: &FitConfig, options: &ExtremeOptions) -> Result<ExtremeFit> {
    let std = dataset.standardize()?;
    let (n, p) = (std.n(), std.p());
    let m = config.tms;
    if m >= n.min(p) {
        return Err(FridgeError::InvalidOrder { order: m, len: n.min(p) });
    }
    if options.stable_doublings == 0 {
        return Err(FridgeError::InvalidConfig("stable_doublings must be at least 1".into()));
    }
    let top = lambda_max(&std, m, &config.component, LAMBDA_MAX_EPSILON)?;
    let grid = lambda_grid(top, options.grid_points)?;
    let path = solution_path(&std, &grid, config)?;
    let mut current = path.fits.last().cloned().expect("grid is nonempty");

    let mut lambda = top;
    let mut streak = 0;
    let mut stable = false;
    for _ in 0..options.max_doublings {
        lambda *= 2.0;
        let next = fit(&std, &config.with_lambda(lambda), Some(&current.coefficients))?;
        if next.support.len() <= m && next.support == current.support {
            streak += 1;
        } else {
            streak = 0;
        }
        current = next;
        if streak >= options.stable_doublings {
            stable = true;
            break;
        }
    }
    if !stable {
        log::warn!("extreme fridge (m = {m}): support not stable at lambda = {lambda:e}");
    }

    // The cap may leave more than m coefficients; keep the m largest in magnitude.
    let mut support = current.support.clone();
    if support.len() > m {
        support.sort_by(|&a, &b| current.coefficients[b].abs().total_cmp(&current.coefficients[a].abs()));
        support.truncate(m);
        support.sort_unstable();
    }
    let refit = ols_refit(&std, &support)?;
    let ols_fit = std.to_raw(&refit.coefficients, refit.intercept);
    Ok(ExtremeFit {
        tms: m,
        support,
        ols_fit,
        lambda_used: lambda,
        path_tail_stable: stable,
        terminal_fit: current,
    })
}

/// How [`select_tms`] turns the validation curve into a recommendation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TmsRule {
    /// Smallest `m` such that no larger candidate beats its mean validation
    /// MSE by more than that candidate's standard error.
    #[default]
    OneStandardError,
    /// The candidate with the smallest mean validation MSE.
    MinimumMean,
}

impl std::str::FromStr for TmsRule {
    type Err = FridgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-se" | "one_se" | "1se" => Ok(TmsRule::OneStandardError),
            "min" | "minimum" => Ok(TmsRule::MinimumMean),
            other => Err(FridgeError::InvalidConfig(format!("unknown TMS rule `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TmsSelection {
    /// Candidates in ascending order.
    pub candidates: Vec<usize>,
    pub mean_mse: Vec<f64>,
    pub se_mse: Vec<f64>,
    pub recommended: usize,
    /// Candidate with the smallest mean validation MSE.
    pub minimizer: usize,
    pub rule: TmsRule,
    /// Validation MSE per repeat (outer) and candidate (inner).
    pub repeat_mse: Vec<Vec<f64>>,
}

/// Applies `rule` to a validation curve over ascending `candidates`.
pub fn recommend_tms(candidates: &[usize], mean: &[f64], se: &[f64], rule: TmsRule) -> usize {
    let argmin = (0..mean.len()).fold(0, |b, i| if mean[i] < mean[b] { i } else { b });
    match rule {
        TmsRule::MinimumMean => candidates[argmin],
        TmsRule::OneStandardError => {
            let pick = (0..mean.len())
                .find(|&i| (i + 1..mean.len()).all(|l| mean[i] - mean[l] <= se[l]))
                .unwrap_or(argmin);
            candidates[pick]
        }
    }
}

/// Repeated split-sample validation of the extreme Fridge across target model
/// sizes. Each repeat splits the rows into halves (the extra row of an odd
/// `n` goes to training), fits every candidate on one half and scores
/// residual MSE on the other.
pub fn select_tms(
    dataset: &Dataset,
    candidates: &[usize],
    repeats: usize,
    seed: u64,
    config: &FitConfig,
    options: &ExtremeOptions,
    rule: TmsRule,
) -> Result<TmsSelection> {
    let n = dataset.n();
    if n < 4 {
        return Err(FridgeError::InvalidInput(format!("split-sample validation needs n >= 4, got {n}")));
    }
    if repeats == 0 {
        return Err(FridgeError::InvalidConfig("repeats must be at least 1".into()));
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.is_empty() {
        return Err(FridgeError::InvalidConfig("no candidate target model sizes".into()));
    }
    let n_train = n.div_ceil(2);
    if let Some(&m) = sorted.iter().find(|&&m| m >= n_train.min(dataset.p())) {
        return Err(FridgeError::InvalidOrder {
            order: m,
            len: n_train.min(dataset.p()),
        });
    }

    let repeat_mse: Vec<Vec<f64>> = (0..repeats)
        .into_par_iter()
        .map(|r| {
            let order = permutation(n, &mut substream(seed, stream_id(purpose::SPLITS, r as u64)));
            let train = dataset.select_rows(&order[..n_train]);
            let test = dataset.select_rows(&order[n_train..]);
            let (tx, ty) = (test.raw_x(), test.raw_y());
            sorted
                .iter()
                .map(|&m| {
                    let ext = extreme_fridge(&train, &config.with_tms(m), options)?;
                    Ok(residual_mse(&ext.ols_fit.predict(&tx), &ty))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let mut mean_mse = Vec::with_capacity(sorted.len());
    let mut se_mse = Vec::with_capacity(sorted.len());
    for c in 0..sorted.len() {
        let column: Vec<f64> = repeat_mse.iter().map(|r| r[c]).collect();
        let (mean, se) = mean_and_se(&column);
        mean_mse.push(mean);
        se_mse.push(se);
    }
    let recommended = recommend_tms(&sorted, &mean_mse, &se_mse, rule);
    let minimizer = recommend_tms(&sorted, &mean_mse, &se_mse, TmsRule::MinimumMean);
    Ok(TmsSelection {
        candidates: sorted,
        mean_mse,
        se_mse,
        recommended,
        minimizer,
        rule,
        repeat_mse,
    })
}

/// A fitting procedure with fixed hyperparameters, for resampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum FitProcedure {
    /// A Fridge fit at the configured lambda.
    Fridge { config: FitConfig },
    /// The extreme Fridge of order `config.tms`.
    Extreme { config: FitConfig, options: ExtremeOptions },
    /// Least squares on a fixed set of columns (empty: the sample mean).
    Ols { support: Vec<usize> },
}

impl FitProcedure {
    pub fn label(&self) -> String {
        match self {
            FitProcedure::Fridge { config } => format!("fridge(m={}, lambda={})", config.tms, config.lambda),
            FitProcedure::Extreme { config, .. } => format!("extreme_fridge(m={})", config.tms),
            FitProcedure::Ols { support } => format!("ols({} columns)", support.len()),
        }
    }

    /// Fits on `dataset` and returns the raw-scale model.
    pub fn run(&self, dataset: &Dataset) -> Result<LinearModel> {
        match self {
            FitProcedure::Fridge { config } => {
                let std = dataset.standardize()?;
                let f = fit(&std, config, None)?;
                Ok(LinearModel {
                    coefficients: f.raw_coefficients,
                    intercept: f.intercept,
                })
            }
            FitProcedure::Extreme { config, options } => Ok(extreme_fridge(dataset, config, options)?.ols_fit),
            FitProcedure::Ols { support } => {
                let refit = ols_refit(dataset, support)?;
                Ok(dataset.to_raw(&refit.coefficients, refit.intercept))
            }
        }
    }
}

/// Largest tolerated share of failed bootstrap replicates.
pub const MAX_BOOTSTRAP_FAILURE_RATE: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    /// Successful replicates.
    pub replicates: usize,
    pub requested: usize,
    pub coefficient_mean: Vec<f64>,
    pub coefficient_se: Vec<f64>,
    pub intercept_se: f64,
    /// Selection frequency of each coefficient.
    pub inclusion_rate: Vec<f64>,
    pub mse_mean: Option<f64>,
    pub mse_se: Option<f64>,
    /// `(replicate index, error message)` of skipped replicates.
    pub failures: Vec<(usize, String)>,
}

/// Nonparametric bootstrap of `procedure`: `replicates` resamples of the rows
/// with replacement, each refitted from scratch. Standard errors are standard
/// deviations over replicates. With `test`, also summarizes the test-set MSE.
pub fn bootstrap_se<F>(
    dataset: &Dataset,
    replicates: usize,
    seed: u64,
    test: Option<&Dataset>,
    procedure: F,
) -> Result<BootstrapSummary>
where
    F: Fn(&Dataset) -> Result<LinearModel> + Sync,
{
    if replicates < 2 {
        return Err(FridgeError::InvalidConfig(format!(
            "bootstrap needs at least 2 replicates, got {replicates}"
        )));
    }
    let n = dataset.n();
    let test_xy = test.map(|t| (t.raw_x(), t.raw_y()));
    if let Some((tx, _)) = &test_xy {
        if tx.ncols() != dataset.p() {
            return Err(FridgeError::InvalidInput("test set has a different number of columns".into()));
        }
    }

    let outcomes: Vec<Result<(LinearModel, Option<f64>)>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            use rand::Rng;
            let mut rng = substream(seed, stream_id(purpose::BOOTSTRAP, b as u64));
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let model = procedure(&dataset.select_rows(&rows))?;
            if model.coefficients.iter().any(|c| !c.is_finite()) || !model.intercept.is_finite() {
                return Err(FridgeError::LinearAlgebra("non-finite bootstrap estimate".into()));
            }
            let mse = test_xy
                .as_ref()
                .map(|(tx, ty)| residual_mse(&model.predict(tx), ty));
            Ok((model, mse))
        })
        .collect();

    let mut models = Vec::new();
    let mut mses = Vec::new();
    let mut failures = Vec::new();
    for (b, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok((model, mse)) => {
                models.push(model);
                mses.extend(mse);
            }
            Err(e) => failures.push((b, e.to_string())),
        }
    }
    if failures.len() as f64 > MAX_BOOTSTRAP_FAILURE_RATE * replicates as f64 || models.len() < 2 {
        for (b, msg) in failures.iter().take(5) {
            log::error!("bootstrap replicate {b} failed: {msg}");
        }
        return Err(FridgeError::BootstrapFailures {
            failed: failures.len(),
            total: replicates,
        });
    }
    for (b, msg) in &failures {
        log::warn!("bootstrap replicate {b} skipped: {msg}");
    }

    let p = dataset.p();
    let coefs = DMatrix::from_fn(models.len(), p, |r, j| models[r].coefficients[j]);
    let column = |j: usize| coefs.column(j).iter().copied().collect::<Vec<f64>>();
    let intercepts: Vec<f64> = models.iter().map(|m| m.intercept).collect();
    let reps = models.len() as f64;
    Ok(BootstrapSummary {
        replicates: models.len(),
        requested: replicates,
        coefficient_mean: (0..p).map(|j| column(j).iter().sum::<f64>() / reps).collect(),
        coefficient_se: (0..p).map(|j| sample_sd(&column(j))).collect(),
        intercept_se: sample_sd(&intercepts),
        inclusion_rate: (0..p)
            .map(|j| models.iter().filter(|m| m.coefficients[j] != 0.0).count() as f64 / reps)
            .collect(),
        mse_mean: (!mses.is_empty()).then(|| mses.iter().sum::<f64>() / mses.len() as f64),
        mse_se: (!mses.is_empty()).then(|| sample_sd(&mses)),
        failures,
    })
}

/// Support of the extreme fit mapped to column names.
pub fn support_names(dataset: &Dataset, support: &[usize]) -> Vec<String> {
    support.iter().map(|&j| dataset.column_names[j].clone()).collect()
}

/// Support of a raw model, for callers holding only coefficients.
pub fn model_support(model: &LinearModel) -> Vec<usize> {
    support_of(&model.coefficients)
}
