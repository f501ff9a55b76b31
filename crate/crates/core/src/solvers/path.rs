use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{FridgeError, Result};

use super::{finish_fit, fit, initial_beta, require_standardized, FitConfig, FridgeFit, RawFit};

/// One fit per grid point, computed in ascending order with warm starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionPath {
    pub grid: Vec<f64>,
    pub fits: Vec<FridgeFit>,
    pub tms: usize,
    /// Grid points whose solver failed; their entry in `fits` holds the last
    /// usable iterate with `converged = false`.
    pub failures: Vec<PathFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathFailure {
    pub index: usize,
    pub lambda: f64,
    pub message: String,
}

/// Fits `config` at every value of `grid`, smallest first. The first fit
/// starts from the ridge initializer; each later fit starts from the previous
/// solution. Solver failures are recorded without aborting the path.
pub fn solution_path(dataset: &Dataset, grid: &[f64], config: &FitConfig) -> Result<SolutionPath> {
    require_standardized(dataset)?;
    config.validate(dataset.p())?;
    if grid.is_empty() {
        return Err(FridgeError::InvalidInput("empty lambda grid".into()));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(FridgeError::InvalidInput("lambda grid must be strictly increasing".into()));
    }
    let mut warm = initial_beta(dataset, config, None)?;
    let mut fits = Vec::with_capacity(grid.len());
    let mut failures = Vec::new();
    for (index, &lambda) in grid.iter().enumerate() {
        let point = config.with_lambda(lambda);
        match fit(dataset, &point, Some(&warm)) {
            Ok(f) => {
                warm.copy_from_slice(&f.coefficients);
                fits.push(f);
            }
            Err(err) => {
                let beta = match &err {
                    FridgeError::Divergence { last_finite, .. } => last_finite.clone(),
                    _ => warm.clone(),
                };
                failures.push(PathFailure {
                    index,
                    lambda,
                    message: err.to_string(),
                });
                let mut f = finish_fit(
                    dataset,
                    &point,
                    RawFit {
                        beta,
                        sweeps: 0,
                        converged: false,
                        trace: Vec::new(),
                        warnings: Vec::new(),
                    },
                );
                f.warnings.push(err.to_string());
                fits.push(f);
            }
        }
    }
    Ok(SolutionPath {
        grid: grid.to_vec(),
        fits,
        tms: config.tms,
        failures,
    })
}
