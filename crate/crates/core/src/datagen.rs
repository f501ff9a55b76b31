//! Simulation designs with exact signal-to-noise calibration.
//!
//! **D1**: thirteen informative predictors, three of which are exact linear
//! combinations of the others,
//!
//! ```text
//! X4  = -0.65 (X1 + X2 + X3)
//! X8  = -X5/3 - X6/2 - 2 X7/3
//! X12 = -0.5 (X9 + X10 + X11)
//! y   = c (2 X4 + 2 X8 + 2 X12 + 0.75 X13) + e,   e ~ N(0, 1)
//! ```
//!
//! with all free predictors i.i.d. standard normal and `c` chosen so that the
//! theoretical R^2 is exactly 0.5.
//!
//! **D2**: predictors with correlation `(AR1(0.5) + equicorrelation(0.5)) / 2`
//! and ten nonzero coefficients of magnitudes proportional to `1..10` with
//! random signs inside a 20-predictor block.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{FridgeError, Result};
use crate::rng::{purpose, stream_id, substream, FridgeRng};

/// Target theoretical coefficient of determination.
pub const TARGET_R2: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioName {
    D1,
    D2,
}

impl std::str::FromStr for ScenarioName {
    type Err = FridgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "D1" => Ok(ScenarioName::D1),
            "D2" => Ok(ScenarioName::D2),
            other => Err(FridgeError::InvalidConfig(format!("unknown scenario `{other}`"))),
        }
    }
}

/// Placement of the D2 20-predictor block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum D2Block {
    /// Predictors 1..20.
    #[default]
    Leading,
    /// A contiguous block at a seed-random offset.
    RandomContiguous,
}

#[derive(Debug, Clone, PartialEq)]
enum Design {
    /// Free columns standard normal, collinear columns built exactly.
    D1,
    /// `x = L z` with `L L' = cov_x`.
    Correlated(DMatrix<f64>),
}

/// A fully specified data-generating process.
#[derive(Debug, Clone, PartialEq)]
pub struct SimScenario {
    pub name: ScenarioName,
    /// Sample size used by the generator that produced this scenario.
    pub n: usize,
    pub p: usize,
    pub true_beta: Vec<f64>,
    pub cov_x: DMatrix<f64>,
    pub noise_variance: f64,
    pub r2_theo: f64,
    pub seed: u64,
    design: Design,
}

impl SimScenario {
    pub fn support(&self) -> Vec<usize> {
        crate::data::support_of(&self.true_beta)
    }

    /// Same design and coefficients with a different noise level.
    pub fn with_noise_variance(&self, noise_variance: f64) -> Result<SimScenario> {
        let r2_theo = theoretical_r2(&self.true_beta, &self.cov_x, noise_variance)?;
        Ok(SimScenario {
            noise_variance,
            r2_theo,
            ..self.clone()
        })
    }

    /// Draws `n` rows `(x, y)`; `x` columns are named `x1..xp`.
    pub fn sample(&self, n: usize, rng: &mut FridgeRng) -> Result<Dataset> {
        if n == 0 {
            return Err(FridgeError::InvalidInput("sample size must be positive".into()));
        }
        let p = self.p;
        let sd = self.noise_variance.sqrt();
        let beta = DVector::from_column_slice(&self.true_beta);
        let mut rows = Vec::with_capacity(n * p);
        let mut y = Vec::with_capacity(n);
        let mut z = vec![0.0; p];
        for _ in 0..n {
            let row: Vec<f64> = match &self.design {
                Design::D1 => {
                    for (j, zj) in z.iter_mut().enumerate() {
                        *zj = if D1_COMBINED.contains(&j) {
                            0.0
                        } else {
                            rng.sample(StandardNormal)
                        };
                    }
                    let mut x = z.clone();
                    x[3] = -0.65 * (x[0] + x[1] + x[2]);
                    x[7] = -x[4] / 3.0 - x[5] / 2.0 - 2.0 * x[6] / 3.0;
                    x[11] = -0.5 * (x[8] + x[9] + x[10]);
                    x
                }
                Design::Correlated(chol) => {
                    for zj in z.iter_mut() {
                        *zj = rng.sample(StandardNormal);
                    }
                    (chol * DVector::from_column_slice(&z)).as_slice().to_vec()
                }
            };
            let noise: f64 = rng.sample(StandardNormal);
            let signal: f64 = row.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
            y.push(signal + sd * noise);
            rows.extend(row);
        }
        Dataset::new(DMatrix::from_row_slice(n, p, &rows), DVector::from_vec(y), None)
    }
}

/// Zero-based indices of the three collinear D1 columns.
pub const D1_COMBINED: [usize; 3] = [3, 7, 11];

/// Linear map from independent standard normals to D1 predictors.
fn d1_loading(p: usize) -> DMatrix<f64> {
    let mut a = DMatrix::identity(p, p);
    for j in D1_COMBINED {
        a[(j, j)] = 0.0;
    }
    for k in 0..3 {
        a[(3, k)] = -0.65;
    }
    a[(7, 4)] = -1.0 / 3.0;
    a[(7, 5)] = -0.5;
    a[(7, 6)] = -2.0 / 3.0;
    for k in 8..11 {
        a[(11, k)] = -0.5;
    }
    a
}

/// Analytic covariance of the D1 predictors.
pub fn d1_covariance(p: usize) -> Result<DMatrix<f64>> {
    if p < 13 {
        return Err(FridgeError::InvalidInput(format!("D1 needs p >= 13, got {p}")));
    }
    let a = d1_loading(p);
    Ok(&a * a.transpose())
}

/// `(AR1(rho) + equicorrelation(rho)) / 2` with unit diagonal.
pub fn d2_covariance(p: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else {
            let lag = i.abs_diff(j) as i32;
            (rho.powi(lag) + rho) / 2.0
        }
    })
}

/// The D1 process for `p` predictors, unit noise variance.
pub fn d1_scenario(p: usize) -> Result<SimScenario> {
    let cov_x = d1_covariance(p)?;
    let mut beta = vec![0.0; p];
    beta[3] = 2.0;
    beta[7] = 2.0;
    beta[11] = 2.0;
    beta[12] = 0.75;
    let (true_beta, noise_variance) = calibrate_snr(&beta, &cov_x, Calibration::ScaleBeta { noise_variance: 1.0 })?;
    let r2_theo = theoretical_r2(&true_beta, &cov_x, noise_variance)?;
    Ok(SimScenario {
        name: ScenarioName::D1,
        n: 0,
        p,
        true_beta,
        cov_x,
        noise_variance,
        r2_theo,
        seed: 0,
        design: Design::D1,
    })
}

/// The D2 process; coefficient placement and signs come from `seed`.
pub fn d2_scenario(p: usize, seed: u64, block: D2Block) -> Result<SimScenario> {
    if p < 20 {
        return Err(FridgeError::InvalidInput(format!("D2 needs p >= 20, got {p}")));
    }
    let cov_x = d2_covariance(p, 0.5);
    let chol = cov_x
        .clone()
        .cholesky()
        .ok_or_else(|| FridgeError::LinearAlgebra("D2 covariance is not positive definite".into()))?
        .l();

    let mut rng = substream(seed, stream_id(purpose::DATA, 0));
    let start = match block {
        D2Block::Leading => 0,
        D2Block::RandomContiguous => rng.random_range(0..=p - 20),
    };
    let mut members: Vec<usize> = (start..start + 20).collect();
    members.shuffle(&mut rng);
    let mut beta = vec![0.0; p];
    for (rank, &j) in members.iter().take(10).enumerate() {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        beta[j] = sign * (rank + 1) as f64;
    }
    // Unit noise and unit signal variance: both calibration readings hold.
    let (true_beta, noise_variance) = calibrate_snr(&beta, &cov_x, Calibration::ScaleBeta { noise_variance: 1.0 })?;
    let r2_theo = theoretical_r2(&true_beta, &cov_x, noise_variance)?;
    Ok(SimScenario {
        name: ScenarioName::D2,
        n: 0,
        p,
        true_beta,
        cov_x,
        noise_variance,
        r2_theo,
        seed,
        design: Design::Correlated(chol),
    })
}

fn sample_stream(seed: u64) -> FridgeRng {
    substream(seed, stream_id(purpose::DATA, 1))
}

/// `n` draws from D1 with `p` predictors.
pub fn gen_d1(n: usize, p: usize, seed: u64) -> Result<(Dataset, SimScenario)> {
    let mut scenario = d1_scenario(p)?;
    scenario.n = n;
    scenario.seed = seed;
    let data = scenario.sample(n, &mut sample_stream(seed))?;
    Ok((data, scenario))
}

/// `n` draws from D2 with `p` predictors.
pub fn gen_d2(n: usize, p: usize, seed: u64, block: D2Block) -> Result<(Dataset, SimScenario)> {
    let mut scenario = d2_scenario(p, seed, block)?;
    scenario.n = n;
    let data = scenario.sample(n, &mut sample_stream(seed))?;
    Ok((data, scenario))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Calibration {
    /// Rescale `beta` so that `beta' S beta` equals the given noise variance.
    ScaleBeta { noise_variance: f64 },
    /// Keep `beta`; set the noise variance to `beta' S beta`.
    SetNoise,
}

fn quadratic_form(beta: &[f64], cov: &DMatrix<f64>) -> Result<f64> {
    if cov.nrows() != beta.len() || cov.ncols() != beta.len() {
        return Err(FridgeError::InvalidInput("covariance and coefficient dimensions differ".into()));
    }
    let b = DVector::from_column_slice(beta);
    Ok(b.dot(&(cov * &b)))
}

/// Calibrates to unit signal-to-noise ratio (theoretical R^2 of 0.5).
/// Returns the calibrated coefficients and noise variance.
pub fn calibrate_snr(beta: &[f64], cov_x: &DMatrix<f64>, mode: Calibration) -> Result<(Vec<f64>, f64)> {
    let signal = quadratic_form(beta, cov_x)?;
    if !(signal > 0.0) {
        return Err(FridgeError::InvalidInput("zero signal variance; cannot calibrate".into()));
    }
    match mode {
        Calibration::ScaleBeta { noise_variance } => {
            if !(noise_variance > 0.0) {
                return Err(FridgeError::InvalidInput("target noise variance must be positive".into()));
            }
            let c = (noise_variance / signal).sqrt();
            Ok((beta.iter().map(|b| b * c).collect(), noise_variance))
        }
        Calibration::SetNoise => Ok((beta.to_vec(), signal)),
    }
}

/// `beta' S beta / (beta' S beta + sigma2)`.
pub fn theoretical_r2(beta: &[f64], cov_x: &DMatrix<f64>, sigma2: f64) -> Result<f64> {
    if !(sigma2 >= 0.0) {
        return Err(FridgeError::InvalidInput("noise variance must be nonnegative".into()));
    }
    let signal = quadratic_form(beta, cov_x)?;
    let total = signal + sigma2;
    if total == 0.0 {
        return Err(FridgeError::InvalidInput("R^2 undefined: no signal and no noise".into()));
    }
    Ok(signal / total)
}
