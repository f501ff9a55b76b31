//! Result documents (JSON) and tabular outputs (CSV).
//!
//! Every command produces one JSON document of the form
//!
//! ```text
//! { method, tms, lambda, coefficients: {name: value}, intercept, support: [name],
//!   diagnostics: {sweeps, converged, kkt_residual}, metrics: {...}, ... }
//! ```
//!
//! with raw-scale coefficients. Paths, cross-validation, TMS selection and the
//! bootstrap add their own keyed sections. CSV files use a header row, comma
//! separators and shortest round-trip decimal formatting.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::data::{format_float, Dataset, LinearModel};
use crate::datagen::SimScenario;
use crate::error::Result;
use crate::experiment::SimulationReport;
use crate::metrics::residual_mse;
use crate::selection::{BootstrapSummary, CvResult, ExtremeFit, TmsSelection};
use crate::solvers::{FridgeFit, SolutionPath};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub sweeps: usize,
    pub converged: bool,
    pub kkt_residual: f64,
}

impl Diagnostics {
    fn of(fit: &FridgeFit) -> Self {
        Diagnostics {
            sweeps: fit.sweeps_used,
            converged: fit.converged,
            kkt_residual: fit.kkt_residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub method: String,
    pub tms: usize,
    pub lambda: f64,
    pub coefficients: Map<String, Value>,
    pub intercept: f64,
    pub support: Vec<String>,
    pub diagnostics: Diagnostics,
    pub metrics: Map<String, Value>,
    /// Command-specific sections (`path`, `cv`, `selection`, `bootstrap`).
    #[serde(flatten)]
    pub sections: Map<String, Value>,
}

impl ResultDocument {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

fn named(names: &[String], values: &[f64]) -> Map<String, Value> {
    names.iter().zip(values).map(|(n, v)| (n.clone(), json!(v))).collect()
}

fn support_names(names: &[String], coefficients: &[f64]) -> Vec<String> {
    names
        .iter()
        .zip(coefficients)
        .filter(|(_, b)| **b != 0.0)
        .map(|(n, _)| n.clone())
        .collect()
}

fn training_mse(dataset: &Dataset, model: &LinearModel) -> f64 {
    residual_mse(&model.predict(&dataset.raw_x()), &dataset.raw_y())
}

fn model_of(fit: &FridgeFit) -> LinearModel {
    LinearModel {
        coefficients: fit.raw_coefficients.clone(),
        intercept: fit.intercept,
    }
}

fn base_document(method: &str, dataset: &Dataset, fit: &FridgeFit, model: &LinearModel) -> ResultDocument {
    let names = &dataset.column_names;
    let mut metrics = Map::new();
    metrics.insert("training_mse".into(), json!(training_mse(dataset, model)));
    metrics.insert("model_size".into(), json!(model.support().len()));
    metrics.insert("objective".into(), json!(fit.objective));
    ResultDocument {
        method: method.to_string(),
        tms: fit.tms,
        lambda: fit.lambda,
        coefficients: named(names, &model.coefficients),
        intercept: model.intercept,
        support: support_names(names, &model.coefficients),
        diagnostics: Diagnostics::of(fit),
        metrics,
        sections: Map::new(),
    }
}

/// A single penalized fit. `dataset` supplies column names and the raw data
/// for the training error.
pub fn fit_document(dataset: &Dataset, fit: &FridgeFit) -> ResultDocument {
    let mut doc = base_document("fridge", dataset, fit, &model_of(fit));
    doc.metrics.insert("component".into(), json!(fit.component.label()));
    doc.metrics.insert("solver".into(), json!(fit.solver.to_string()));
    if !fit.warnings.is_empty() {
        doc.sections.insert("warnings".into(), json!(fit.warnings));
    }
    doc
}

fn path_entries(dataset: &Dataset, path: &SolutionPath) -> Value {
    let names = &dataset.column_names;
    Value::Array(
        path.fits
            .iter()
            .map(|f| {
                json!({
                    "lambda": f.lambda,
                    "coefficients": named(names, &f.raw_coefficients),
                    "intercept": f.intercept,
                    "support": support_names(names, &f.raw_coefficients),
                    "objective": f.objective,
                    "sweeps": f.sweeps_used,
                    "converged": f.converged,
                    "kkt_residual": f.kkt_residual,
                })
            })
            .collect(),
    )
}

/// A solution path; the headline fit is the one at the largest lambda.
pub fn path_document(dataset: &Dataset, path: &SolutionPath) -> ResultDocument {
    let last = path.fits.last().expect("paths are nonempty");
    let mut doc = base_document("fridge_path", dataset, last, &model_of(last));
    doc.sections.insert("path".into(), path_entries(dataset, path));
    doc.sections.insert("failures".into(), json!(path.failures));
    doc
}

/// Cross-validation; the headline fit is the full-data fit at the chosen lambda.
pub fn cv_document(dataset: &Dataset, cv: &CvResult, path: &SolutionPath) -> ResultDocument {
    let chosen = &path.fits[cv.best_index];
    let mut doc = base_document("fridge_cv", dataset, chosen, &model_of(chosen));
    doc.metrics.insert("cv_error".into(), json!(cv.mean_cv_error[cv.best_index]));
    doc.metrics.insert("cv_error_se".into(), json!(cv.se_cv_error[cv.best_index]));
    doc.sections.insert(
        "cv".into(),
        json!({
            "grid": cv.grid,
            "mean_cv_error": cv.mean_cv_error,
            "se_cv_error": cv.se_cv_error,
            "best_lambda": cv.best_lambda,
            "fold_assignments": cv.fold_assignments,
        }),
    );
    doc.sections.insert("path".into(), path_entries(dataset, path));
    doc
}

/// The extreme Fridge: the least-squares refit on the terminal support.
pub fn extreme_document(dataset: &Dataset, ext: &ExtremeFit) -> ResultDocument {
    let mut doc = base_document("extreme_fridge", dataset, &ext.terminal_fit, &ext.ols_fit);
    doc.tms = ext.tms;
    doc.lambda = ext.lambda_used;
    doc.metrics.remove("objective");
    doc.metrics.insert("path_tail_stable".into(), json!(ext.path_tail_stable));
    doc
}

/// TMS selection; the headline model is the extreme Fridge at the recommended size.
pub fn select_tms_document(dataset: &Dataset, selection: &TmsSelection, ext: &ExtremeFit) -> ResultDocument {
    let mut doc = extreme_document(dataset, ext);
    doc.method = "select_tms".into();
    doc.sections.insert(
        "selection".into(),
        json!({
            "candidates": selection.candidates,
            "mean_mse": selection.mean_mse,
            "se_mse": selection.se_mse,
            "recommended": selection.recommended,
            "minimizer": selection.minimizer,
            "rule": selection.rule,
            "repeats": selection.repeat_mse.len(),
        }),
    );
    doc
}

/// Bootstrap summary around the full-data fit of the same procedure.
pub fn bootstrap_document(
    dataset: &Dataset,
    method: &str,
    headline: &FridgeFit,
    model: &LinearModel,
    summary: &BootstrapSummary,
) -> ResultDocument {
    let names = &dataset.column_names;
    let mut doc = base_document(method, dataset, headline, model);
    if let Some(v) = summary.mse_mean {
        doc.metrics.insert("test_mse".into(), json!(v));
    }
    if let Some(v) = summary.mse_se {
        doc.metrics.insert("test_mse_se".into(), json!(v));
    }
    doc.sections.insert(
        "bootstrap".into(),
        json!({
            "replicates": summary.replicates,
            "requested": summary.requested,
            "coefficient_se": named(names, &summary.coefficient_se),
            "coefficient_mean": named(names, &summary.coefficient_mean),
            "inclusion_rate": named(names, &summary.inclusion_rate),
            "intercept_se": summary.intercept_se,
            "mse_mean": summary.mse_mean,
            "mse_se": summary.mse_se,
            "failures": summary.failures,
        }),
    );
    doc
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// One row per grid point: `lambda`, raw coefficients, `intercept`,
/// `converged`, `kkt_residual`.
pub fn write_path_csv(path: impl AsRef<Path>, dataset: &Dataset, sp: &SolutionPath) -> Result<()> {
    let mut header: Vec<&str> = vec!["lambda"];
    header.extend(dataset.column_names.iter().map(String::as_str));
    header.extend(["intercept", "converged", "kkt_residual"]);
    let rows = sp.fits.iter().map(|f| {
        let mut row = vec![format_float(f.lambda)];
        row.extend(f.raw_coefficients.iter().map(|b| format_float(*b)));
        row.push(format_float(f.intercept));
        row.push(f.converged.to_string());
        row.push(format_float(f.kkt_residual));
        row
    });
    write_rows(path.as_ref(), &header, rows)
}

pub fn write_cv_csv(path: impl AsRef<Path>, cv: &CvResult) -> Result<()> {
    let rows = (0..cv.grid.len()).map(|i| {
        vec![
            format_float(cv.grid[i]),
            format_float(cv.mean_cv_error[i]),
            format_float(cv.se_cv_error[i]),
        ]
    });
    write_rows(path.as_ref(), &["lambda", "mean_cv_error", "se_cv_error"], rows)
}

pub fn write_tms_csv(path: impl AsRef<Path>, selection: &TmsSelection) -> Result<()> {
    let rows = (0..selection.candidates.len()).map(|i| {
        vec![
            selection.candidates[i].to_string(),
            format_float(selection.mean_mse[i]),
            format_float(selection.se_mse[i]),
        ]
    });
    write_rows(path.as_ref(), &["tms", "mean_mse", "se_mse"], rows)
}

pub fn write_bootstrap_csv(
    path: impl AsRef<Path>,
    dataset: &Dataset,
    model: &LinearModel,
    summary: &BootstrapSummary,
) -> Result<()> {
    let rows = (0..dataset.p()).map(|j| {
        vec![
            dataset.column_names[j].clone(),
            format_float(model.coefficients[j]),
            format_float(summary.coefficient_se[j]),
            format_float(summary.inclusion_rate[j]),
        ]
    });
    write_rows(path.as_ref(), &["name", "estimate", "se", "inclusion_rate"], rows)
}

/// Column layout of the simulation summary table.
pub const TABLE_COLUMNS: [&str; 6] = ["TMS", "Model Size", "MSE", "Sensitivity", "Specificity", "Pr(FRR<Lasso)"];

/// The summary table; `Pr(FRR<Lasso)` is empty on the TMS 0 row.
pub fn write_table_csv(path: impl AsRef<Path>, report: &SimulationReport) -> Result<()> {
    let rows = report.table.iter().map(|r| {
        vec![
            r.tms.to_string(),
            format_float(r.model_size),
            format_float(r.mse),
            format_float(r.sensitivity_pct),
            format_float(r.specificity_pct),
            r.pr_beats_lasso.map(format_float).unwrap_or_default(),
        ]
    });
    write_rows(path.as_ref(), &TABLE_COLUMNS, rows)
}

/// Long format: one row per replicate and target model size.
pub fn write_replicates_csv(path: impl AsRef<Path>, report: &SimulationReport) -> Result<()> {
    let header = [
        "replicate",
        "tms",
        "lambda",
        "test_mse",
        "best_potential_mse",
        "model_size",
        "sensitivity",
        "specificity",
        "converged",
        "kkt_residual",
    ];
    let rows = report.replicates.iter().flat_map(|rep| {
        rep.methods.iter().map(move |m| {
            vec![
                rep.replicate.to_string(),
                m.tms.to_string(),
                format_float(m.lambda),
                format_float(m.test_mse),
                format_float(m.best_potential_mse),
                m.model_size.to_string(),
                format_float(m.sensitivity_pct),
                format_float(m.specificity_pct),
                m.converged.to_string(),
                format_float(m.kkt_residual),
            ]
        })
    });
    write_rows(path.as_ref(), &header, rows)
}

/// JSON sidecar describing a generated dataset.
pub fn scenario_sidecar(scenario: &SimScenario) -> Value {
    json!({
        "scenario": scenario.name,
        "n": scenario.n,
        "p": scenario.p,
        "true_beta": scenario.true_beta,
        "support": scenario.support().iter().map(|j| format!("x{}", j + 1)).collect::<Vec<_>>(),
        "noise_variance": scenario.noise_variance,
        "r2_theo": scenario.r2_theo,
        "seed": scenario.seed,
    })
}

/// Writes `<stem>.csv` (columns `x1..xp`, `y`) and `<stem>.json`.
pub fn write_scenario(dir: impl AsRef<Path>, stem: &str, dataset: &Dataset, scenario: &SimScenario) -> Result<()> {
    let dir = dir.as_ref();
    crate::data::write_csv(dir.join(format!("{stem}.csv")), dataset)?;
    std::fs::write(
        dir.join(format!("{stem}.json")),
        serde_json::to_string_pretty(&scenario_sidecar(scenario))? + "\n",
    )?;
    Ok(())
}
