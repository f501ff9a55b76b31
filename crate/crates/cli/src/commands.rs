use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::{info, warn};

use fridge::data::{load_csv, ResponseColumn};
use fridge::datagen::{D2Block, ScenarioName};
use fridge::experiment::{replicate_scenario, run_simulation, SimulationConfig};
use fridge::linalg::ridge_solve;
use fridge::component::ADAPTIVE_BASE_FLOOR;
use fridge::report;
use fridge::rng::{purpose, stream_id, substream};
use fridge::selection::{
    bootstrap_se, default_grid, extreme_fridge, kfold_cv, select_tms, ExtremeOptions, FitProcedure, TmsRule,
};
use fridge::solvers::{fit, solution_path, FitConfig, FridgeFit, SolverKind};
use fridge::{ComponentKind, Dataset, FridgeError, LinearModel};

use crate::args::{parse_tms, Block, BootstrapArgs, BootstrapMethod, Cli, Command, Common, SimulateArgs};

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    FridgeError::InvalidConfig(msg.into()).into()
}

fn load(common: &Common) -> Result<Dataset> {
    let path = common.data.as_ref().ok_or_else(|| invalid("--data is required"))?;
    let data = load_csv(path, &ResponseColumn::from(common.response.as_str()))
        .with_context(|| format!("reading {}", path.display()))?;
    info!("loaded {} rows, {} predictors from {}", data.n(), data.p(), path.display());
    Ok(data)
}

fn tms_list(common: &Common) -> Result<Option<Vec<usize>>> {
    common
        .tms
        .as_deref()
        .map(|s| parse_tms(s).map_err(invalid))
        .transpose()
}

fn single_tms(common: &Common) -> Result<usize> {
    match tms_list(common)?.as_deref() {
        None => Ok(0),
        Some([m]) => Ok(*m),
        Some(_) => Err(invalid("this command takes a single --tms value")),
    }
}

/// Builds the component; the adaptive base is a ridge fit on the standardized data.
fn component(spec: &str, tms: usize, std: &Dataset, ridge_lambda: f64) -> Result<ComponentKind> {
    match spec {
        "abs" | "absolute" => Ok(ComponentKind::Absolute),
        "square" => Ok(ComponentKind::Square),
        "geomean" => Ok(ComponentKind::GeometricMean { order: tms }),
        other => {
            let gamma = other
                .strip_prefix("adaptive:")
                .and_then(|g| g.parse::<f64>().ok())
                .ok_or_else(|| invalid(format!("unknown component `{other}`")))?;
            let base = ridge_solve(std, ridge_lambda)?
                .into_iter()
                .map(|b| if b.abs() < ADAPTIVE_BASE_FLOOR { ADAPTIVE_BASE_FLOOR.copysign(b) } else { b })
                .collect();
            Ok(ComponentKind::adaptive(gamma, base)?)
        }
    }
}

fn fit_config(common: &Common, data: &Dataset, tms: usize) -> Result<FitConfig> {
    let std = data.standardize()?;
    let mut config = FitConfig::new(common.lambda.unwrap_or(0.0), tms);
    config.component = component(&common.component, tms, &std, config.ridge_init_lambda)?;
    config.solver = match common.solver.as_deref() {
        Some(s) => s.parse::<SolverKind>()?,
        None if config.component == ComponentKind::Square => SolverKind::Irr,
        None => SolverKind::Cd,
    };
    config.validate(data.p())?;
    Ok(config)
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(())
}

fn written(path: PathBuf) -> PathBuf {
    info!("wrote {}", path.display());
    path
}

fn warn_unconverged(fit: &FridgeFit) {
    if !fit.converged {
        warn!(
            "fit at lambda {:e} did not converge in {} sweeps (kkt residual {:e})",
            fit.lambda, fit.sweeps_used, fit.kkt_residual
        );
    }
    for w in &fit.warnings {
        warn!("{w}");
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    prepare_out(&common.out)?;
    match &cli.command {
        Command::Fit => cmd_fit(common),
        Command::Path => cmd_path(common),
        Command::Cv => cmd_cv(common),
        Command::Extreme => cmd_extreme(common),
        Command::SelectTms { rule } => cmd_select_tms(common, rule),
        Command::Bootstrap(args) => cmd_bootstrap(common, args),
        Command::Simulate(args) => cmd_simulate(common, args),
    }
}

fn cmd_fit(common: &Common) -> Result<()> {
    let data = load(common)?;
    let lambda = common.lambda.ok_or_else(|| invalid("fit needs --lambda"))?;
    let config = fit_config(common, &data, single_tms(common)?)?.with_lambda(lambda);
    let std = data.standardize()?;
    let f = fit(&std, &config, None)?;
    warn_unconverged(&f);
    report::fit_document(&data, &f).write(written(common.out.join("fit.json")))?;
    Ok(())
}

fn grid_for(common: &Common, data: &Dataset, config: &FitConfig) -> Result<Vec<f64>> {
    match common.lambda {
        // An explicit --lambda caps the grid.
        Some(top) => Ok(fridge::selection::lambda_grid(top, common.grid_points)?),
        None => Ok(default_grid(data, config, common.grid_points)?),
    }
}

fn cmd_path(common: &Common) -> Result<()> {
    let data = load(common)?;
    let config = fit_config(common, &data, single_tms(common)?)?;
    let grid = grid_for(common, &data, &config)?;
    let path = solution_path(&data.standardize()?, &grid, &config)?;
    for failure in &path.failures {
        warn!("lambda {:e}: {}", failure.lambda, failure.message);
    }
    report::path_document(&data, &path).write(written(common.out.join("path.json")))?;
    report::write_path_csv(written(common.out.join("path.csv")), &data, &path)?;
    Ok(())
}

fn cmd_cv(common: &Common) -> Result<()> {
    let data = load(common)?;
    let config = fit_config(common, &data, single_tms(common)?)?;
    let grid = grid_for(common, &data, &config)?;
    let cv = kfold_cv(&data, &grid, &config, common.k, common.seed)?;
    let path = solution_path(&data.standardize()?, &grid, &config)?;
    warn_unconverged(&path.fits[cv.best_index]);
    report::cv_document(&data, &cv, &path).write(written(common.out.join("cv.json")))?;
    report::write_cv_csv(written(common.out.join("cv.csv")), &cv)?;
    Ok(())
}

fn cmd_extreme(common: &Common) -> Result<()> {
    let data = load(common)?;
    let config = fit_config(common, &data, single_tms(common)?)?;
    let options = ExtremeOptions {
        grid_points: common.grid_points,
        ..ExtremeOptions::default()
    };
    let ext = extreme_fridge(&data, &config, &options)?;
    if !ext.path_tail_stable {
        warn!("support did not stabilize before the lambda cap");
    }
    report::extreme_document(&data, &ext).write(written(common.out.join("extreme.json")))?;
    Ok(())
}

fn cmd_select_tms(common: &Common, rule: &str) -> Result<()> {
    let data = load(common)?;
    let candidates = match tms_list(common)? {
        Some(c) => c,
        None => (0..data.p().min(8)).collect(),
    };
    let rule: TmsRule = rule.parse()?;
    let config = fit_config(common, &data, 0)?;
    let options = ExtremeOptions {
        grid_points: common.grid_points,
        ..ExtremeOptions::default()
    };
    let repeats = common.reps.unwrap_or(50);
    let selection = select_tms(&data, &candidates, repeats, common.seed, &config, &options, rule)?;
    info!("recommended target model size: {}", selection.recommended);
    let ext = extreme_fridge(&data, &config.with_tms(selection.recommended), &options)?;
    report::select_tms_document(&data, &selection, &ext).write(written(common.out.join("select_tms.json")))?;
    report::write_tms_csv(written(common.out.join("tms_curve.csv")), &selection)?;
    Ok(())
}

fn cmd_bootstrap(common: &Common, args: &BootstrapArgs) -> Result<()> {
    let data = load(common)?;
    let test = args
        .test
        .as_ref()
        .map(|p| load_csv(p, &ResponseColumn::from(common.response.as_str())))
        .transpose()?;
    let tms = single_tms(common)?;
    let config = fit_config(common, &data, tms)?;
    let std = data.standardize()?;
    let options = ExtremeOptions {
        grid_points: common.grid_points,
        ..ExtremeOptions::default()
    };

    let (procedure, headline, model) = match args.method {
        BootstrapMethod::Fridge => {
            let lambda = match common.lambda {
                Some(l) => l,
                None => {
                    let grid = default_grid(&data, &config, common.grid_points)?;
                    let cv = kfold_cv(&data, &grid, &config, common.k, common.seed)?;
                    info!("cross-validated lambda: {:e}", cv.best_lambda);
                    cv.best_lambda
                }
            };
            let config = config.with_lambda(lambda);
            let f = fit(&std, &config, None)?;
            let model = LinearModel {
                coefficients: f.raw_coefficients.clone(),
                intercept: f.intercept,
            };
            (FitProcedure::Fridge { config }, f, model)
        }
        BootstrapMethod::Extreme => {
            let ext = extreme_fridge(&data, &config, &options)?;
            let model = ext.ols_fit.clone();
            (FitProcedure::Extreme { config, options }, ext.terminal_fit, model)
        }
    };
    let replicates = common.reps.unwrap_or(500);
    let summary = bootstrap_se(&data, replicates, common.seed, test.as_ref(), |d| procedure.run(d))?;
    let method = match args.method {
        BootstrapMethod::Fridge => "fridge_bootstrap",
        BootstrapMethod::Extreme => "extreme_fridge_bootstrap",
    };
    report::bootstrap_document(&data, method, &headline, &model, &summary)
        .write(written(common.out.join("bootstrap.json")))?;
    report::write_bootstrap_csv(written(common.out.join("bootstrap.csv")), &data, &model, &summary)?;
    Ok(())
}

fn cmd_simulate(common: &Common, args: &SimulateArgs) -> Result<()> {
    let scenario: ScenarioName = args.scenario.parse()?;
    let tms = match tms_list(common)? {
        Some(t) => t,
        None => (0..=15).filter(|&m| m < args.p).collect(),
    };
    let mut config = SimulationConfig::new(scenario, args.n, args.p, common.reps.unwrap_or(20), tms, common.seed);
    config.n_test = args.n_test;
    config.grid_points = common.grid_points;
    config.k = common.k;
    config.d2_block = match args.block {
        Block::Leading => D2Block::Leading,
        Block::Random => D2Block::RandomContiguous,
    };
    config.fit = FitConfig {
        component: match common.component.as_str() {
            "abs" | "absolute" => ComponentKind::Absolute,
            "geomean" => ComponentKind::GeometricMean { order: 0 },
            other => return Err(invalid(format!("simulate supports the abs and geomean components, not `{other}`"))),
        },
        solver: match common.solver.as_deref() {
            Some(s) => s.parse()?,
            None => SolverKind::Cd,
        },
        ..FitConfig::default()
    };

    let report = run_simulation(&config)?;
    let out = &common.out;
    std::fs::write(
        written(out.join("simulate.json")),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    report::write_table_csv(written(out.join("table1.csv")), &report)?;
    report::write_replicates_csv(written(out.join("replicates.csv")), &report)?;

    if args.export_data {
        let dir = out.join("data");
        prepare_out(&dir)?;
        for r in 0..config.reps {
            let scenario = replicate_scenario(&config, r)?;
            let mut rng = substream(scenario.seed, stream_id(purpose::DATA, 1));
            let train = scenario.sample(config.n, &mut rng)?;
            report::write_scenario(&dir, &format!("replicate_{r:03}"), &train, &scenario)?;
        }
        info!("wrote {} datasets to {}", config.reps, dir.display());
    }
    for row in &report.table {
        info!(
            "TMS {:>2}: size {:.2}, mse {:.4}, sens {:.1}, spec {:.1}",
            row.tms, row.model_size, row.mse, row.sensitivity_pct, row.specificity_pct
        );
    }
    Ok(())
}
