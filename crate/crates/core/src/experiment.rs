//! Monte Carlo comparison of target model sizes on the simulation designs.
//!
//! Each replicate draws a training set and an independent test set, and for
//! every target model size picks lambda by k-fold cross-validation on the
//! training set, refits the full training path and scores the chosen fit.
//! TMS 0 (the Lasso) is always run because every other row is compared to it.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{d1_scenario, d2_scenario, D2Block, ScenarioName, SimScenario};
use crate::error::{FridgeError, Result};
use crate::metrics::{best_potential, oracle_mse, selection_metrics, win_rate};
use crate::rng::{child_seed, purpose, stream_id, substream};
use crate::selection::{default_grid, kfold_cv};
use crate::solvers::{solution_path, FitConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub scenario: ScenarioName,
    pub n: usize,
    pub p: usize,
    /// Size of the independent test set of every replicate.
    pub n_test: usize,
    pub reps: usize,
    pub tms: Vec<usize>,
    pub seed: u64,
    pub grid_points: usize,
    pub k: usize,
    pub d2_block: D2Block,
    /// Solver settings shared by all fits; `tms` and `lambda` are overridden.
    pub fit: FitConfig,
}

impl SimulationConfig {
    pub fn new(scenario: ScenarioName, n: usize, p: usize, reps: usize, tms: Vec<usize>, seed: u64) -> Self {
        SimulationConfig {
            scenario,
            n,
            p,
            n_test: 1000,
            reps,
            tms,
            seed,
            grid_points: 100,
            k: 10,
            d2_block: D2Block::Leading,
            fit: FitConfig::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(FridgeError::InvalidConfig("reps must be at least 1".into()));
        }
        if self.tms.is_empty() {
            return Err(FridgeError::InvalidConfig("no target model sizes requested".into()));
        }
        if let Some(&m) = self.tms.iter().find(|&&m| m >= self.p) {
            return Err(FridgeError::InvalidOrder { order: m, len: self.p });
        }
        if self.n_test == 0 {
            return Err(FridgeError::InvalidConfig("n_test must be positive".into()));
        }
        Ok(())
    }

    /// Requested sizes plus 0, sorted and deduplicated.
    fn run_sizes(&self) -> Vec<usize> {
        let mut sizes = self.tms.clone();
        sizes.push(0);
        sizes.sort_unstable();
        sizes.dedup();
        sizes
    }
}

/// Result of one target model size in one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub tms: usize,
    pub lambda: f64,
    /// `||X_test (b - b*)||^2 / n_test` at the cross-validated lambda.
    pub test_mse: f64,
    /// Smallest `||X_train (b - b*)||^2 / n` along the training path.
    pub best_potential_mse: f64,
    pub model_size: usize,
    pub sensitivity_pct: f64,
    pub specificity_pct: f64,
    pub support: Vec<usize>,
    pub converged: bool,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub seed: u64,
    pub methods: Vec<MethodOutcome>,
}

/// One row of the summary table, averaged over replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub tms: usize,
    pub model_size: f64,
    pub mse: f64,
    pub sensitivity_pct: f64,
    pub specificity_pct: f64,
    /// Share of replicates where this TMS beat the Lasso; `None` for TMS 0.
    pub pr_beats_lasso: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub config: SimulationConfig,
    pub replicates: Vec<ReplicateOutcome>,
    pub table: Vec<TableRow>,
}

impl SimulationReport {
    pub fn row(&self, tms: usize) -> Option<&TableRow> {
        self.table.iter().find(|r| r.tms == tms)
    }

    /// Per-replicate outcomes of one target model size.
    pub fn outcomes(&self, tms: usize) -> Vec<&MethodOutcome> {
        self.replicates
            .iter()
            .filter_map(|r| r.methods.iter().find(|m| m.tms == tms))
            .collect()
    }
}

/// The data-generating process of replicate `r`.
pub fn replicate_scenario(config: &SimulationConfig, r: usize) -> Result<SimScenario> {
    let seed = child_seed(config.seed, stream_id(purpose::REPLICATE, r as u64));
    let mut scenario = match config.scenario {
        ScenarioName::D1 => d1_scenario(config.p)?,
        ScenarioName::D2 => d2_scenario(config.p, seed, config.d2_block)?,
    };
    scenario.n = config.n;
    scenario.seed = seed;
    Ok(scenario)
}

fn run_replicate(config: &SimulationConfig, r: usize) -> Result<ReplicateOutcome> {
    let scenario = replicate_scenario(config, r)?;
    let seed = scenario.seed;
    let mut rng = substream(seed, stream_id(purpose::DATA, 1));
    let train = scenario.sample(config.n, &mut rng)?;
    let test = scenario.sample(config.n_test, &mut rng)?;
    let train_std = train.standardize()?;
    let support_star = scenario.support();
    let x_train: &DMatrix<f64> = &train.x;

    let mut methods = Vec::new();
    for m in config.run_sizes() {
        let cfg = config.fit.with_tms(m);
        let grid = default_grid(&train, &cfg, config.grid_points)?;
        let cv = kfold_cv(&train, &grid, &cfg, config.k, seed)?;
        let path = solution_path(&train_std, &grid, &cfg)?;
        let chosen = &path.fits[cv.best_index];
        let test_mse = oracle_mse(&test.x, &chosen.raw_coefficients, &scenario.true_beta)? / config.n_test as f64;
        let (potential, _) = best_potential(&path, x_train, &scenario.true_beta)?;
        let (sensitivity_pct, specificity_pct) = selection_metrics(&chosen.support, &support_star, config.p)?;
        log::debug!("replicate {r}, tms {m}: lambda {:e}, test mse {test_mse:.4}", chosen.lambda);
        methods.push(MethodOutcome {
            tms: m,
            lambda: chosen.lambda,
            test_mse,
            best_potential_mse: potential / config.n as f64,
            model_size: chosen.support.len(),
            sensitivity_pct,
            specificity_pct,
            support: chosen.support.clone(),
            converged: chosen.converged,
            kkt_residual: chosen.kkt_residual,
        });
    }
    Ok(ReplicateOutcome {
        replicate: r,
        seed,
        methods,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    sum / count as f64
}

/// Runs all replicates (in parallel on the ambient rayon pool) and builds the
/// summary table for the requested target model sizes.
pub fn run_simulation(config: &SimulationConfig) -> Result<SimulationReport> {
    config.validate()?;
    let replicates: Vec<ReplicateOutcome> = (0..config.reps)
        .into_par_iter()
        .map(|r| run_replicate(config, r))
        .collect::<Result<_>>()?;

    let find = |rep: &ReplicateOutcome, m: usize| -> MethodOutcome {
        rep.methods.iter().find(|o| o.tms == m).cloned().expect("every size is run")
    };
    let lasso: Vec<f64> = replicates.iter().map(|r| find(r, 0).test_mse).collect();
    let mut sizes = config.tms.clone();
    sizes.sort_unstable();
    sizes.dedup();
    let mut table = Vec::with_capacity(sizes.len());
    for m in sizes {
        let rows: Vec<MethodOutcome> = replicates.iter().map(|r| find(r, m)).collect();
        let errors: Vec<f64> = rows.iter().map(|o| o.test_mse).collect();
        table.push(TableRow {
            tms: m,
            model_size: mean(rows.iter().map(|o| o.model_size as f64)),
            mse: mean(errors.iter().copied()),
            sensitivity_pct: mean(rows.iter().map(|o| o.sensitivity_pct)),
            specificity_pct: mean(rows.iter().map(|o| o.specificity_pct)),
            pr_beats_lasso: if m == 0 { None } else { Some(win_rate(&errors, &lasso)?) },
        });
    }
    Ok(SimulationReport {
        config: config.clone(),
        replicates,
        table,
    })
}
