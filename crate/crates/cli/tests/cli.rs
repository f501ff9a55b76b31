use std::path::Path;
use std::process::{Command, Output};

use fridge::data::{load_csv, write_csv, ResponseColumn};
use fridge::datagen::gen_d1;
use fridge::solvers::{fit, FitConfig};
use nalgebra::{DMatrix, DVector};
use serde_json::Value;
use tempfile::TempDir;

fn fridge(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fridge"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "error")
        .output()
        .expect("run fridge")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Tall, full-rank data with a few correlated columns.
fn write_tall(path: &Path, n: usize, scale_y: f64) -> (DMatrix<f64>, DVector<f64>) {
    let x = DMatrix::from_fn(n, 4, |i, j| {
        let t = i as f64 + 1.0;
        (t * (j as f64 + 1.3)).sin() + 0.3 * (t * 0.7).cos() * j as f64
    });
    let y = DVector::from_fn(n, |i, _| {
        scale_y * (1.0 + 2.0 * x[(i, 0)] - 0.5 * x[(i, 2)] + 0.1 * ((i * 7 % 11) as f64 - 5.0))
    });
    let mut text = String::from("a,b,c,d,y\n");
    for i in 0..n {
        let row: Vec<String> = (0..4).map(|j| format!("{:e}", x[(i, j)])).chain([format!("{:e}", y[i])]).collect();
        text += &(row.join(",") + "\n");
    }
    std::fs::write(path, text).unwrap();
    (x, y)
}

#[test]
fn zero_lambda_fit_is_least_squares() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("tall.csv");
    let (x, y) = write_tall(&csv, 40, 1.0);
    let out = fridge(&["fit", "--data", csv.to_str().unwrap(), "--lambda", "0"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let mut design = DMatrix::from_element(40, 5, 1.0);
    design.columns_mut(1, 4).copy_from(&x);
    let ols = (design.transpose() * &design).cholesky().unwrap().solve(&(design.transpose() * &y));

    let doc = read_json(&dir.path().join("fit.json"));
    for (j, name) in ["a", "b", "c", "d"].iter().enumerate() {
        let got = doc["coefficients"][name].as_f64().unwrap();
        assert!((got - ols[j + 1]).abs() < 1e-8, "{name}: {got} vs {}", ols[j + 1]);
    }
    assert!((doc["intercept"].as_f64().unwrap() - ols[0]).abs() < 1e-8);
}

#[test]
fn fit_document_has_the_documented_keys() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("tall.csv");
    write_tall(&csv, 30, 1.0);
    let out = fridge(&["fit", "--data", csv.to_str().unwrap(), "--lambda", "0.05", "--tms", "1"], dir.path());
    assert!(out.status.success());
    let doc = read_json(&dir.path().join("fit.json"));
    for key in ["method", "tms", "lambda", "coefficients", "intercept", "support", "diagnostics", "metrics"] {
        assert!(doc.get(key).is_some(), "missing {key}");
    }
    for key in ["sweeps", "converged", "kkt_residual"] {
        assert!(doc["diagnostics"].get(key).is_some(), "missing diagnostics.{key}");
    }
    assert_eq!(doc["tms"], 1);
    assert_eq!(doc["coefficients"].as_object().unwrap().len(), 4);
}

#[test]
fn exit_codes_separate_bad_input_from_solver_failure() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("tall.csv");
    write_tall(&csv, 20, 1.0);
    let data = csv.to_str().unwrap();

    assert_eq!(fridge(&["fit", "--data", data, "--lambda", "0.1"], dir.path()).status.code(), Some(0));
    let missing = dir.path().join("nope.csv");
    assert_eq!(fridge(&["fit", "--data", missing.to_str().unwrap(), "--lambda", "1"], dir.path()).status.code(), Some(2));
    assert_eq!(fridge(&["fit", "--data", data], dir.path()).status.code(), Some(2));
    assert_eq!(fridge(&["fit", "--data", data, "--lambda", "1", "--tms", "9"], dir.path()).status.code(), Some(2));
    assert_eq!(fridge(&["fit", "--data", data, "--lambda", "1", "--response", "zz"], dir.path()).status.code(), Some(2));

    let huge = dir.path().join("huge.csv");
    write_tall(&huge, 20, 1e200);
    let out = fridge(
        &["fit", "--data", huge.to_str().unwrap(), "--component", "square", "--solver", "irr", "--lambda", "1", "--tms", "1"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn small_simulation_writes_the_summary_table() {
    let dir = TempDir::new().unwrap();
    let args = ["simulate", "--n", "40", "--p", "20", "--reps", "2", "--tms", "0..2", "--grid-points", "15", "--k", "4", "--n-test", "50"];
    let out = fridge(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("table1.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "TMS,Model Size,MSE,Sensitivity,Specificity,Pr(FRR<Lasso)");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("0,") && rows[0].ends_with(','));

    let again = TempDir::new().unwrap();
    assert!(fridge(&args, again.path()).status.success());
    for file in ["table1.csv", "replicates.csv", "simulate.json"] {
        assert_eq!(
            std::fs::read(dir.path().join(file)).unwrap(),
            std::fs::read(again.path().join(file)).unwrap(),
            "{file} differs between runs"
        );
    }
}

#[test]
fn exported_data_refits_identically() {
    let dir = TempDir::new().unwrap();
    let (raw, _) = gen_d1(50, 60, 8).unwrap();
    let csv = dir.path().join("d1.csv");
    write_csv(&csv, &raw).unwrap();
    let reloaded = load_csv(&csv, &ResponseColumn::Name("y".into())).unwrap();
    assert_eq!(reloaded.raw_x(), raw.raw_x());
    assert_eq!(reloaded.raw_y(), raw.raw_y());

    let config = FitConfig::new(0.05, 4);
    let direct = fit(&raw.standardize().unwrap(), &config, None).unwrap();
    let out = fridge(&["fit", "--data", csv.to_str().unwrap(), "--lambda", "0.05", "--tms", "4"], dir.path());
    assert!(out.status.success());
    let doc = read_json(&dir.path().join("fit.json"));
    for (j, name) in raw.column_names.iter().enumerate() {
        let got = doc["coefficients"][name].as_f64().unwrap();
        assert!((got - direct.raw_coefficients[j]).abs() <= 1e-12, "{name}");
    }
}

#[test]
fn cv_output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("tall.csv");
    write_tall(&csv, 40, 1.0);
    let args = ["cv", "--data", csv.to_str().unwrap(), "--tms", "1", "--grid-points", "20", "--k", "5", "--seed", "3"];
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    assert!(fridge(&args, a.path()).status.success());
    assert!(fridge(&args, b.path()).status.success());
    assert_eq!(std::fs::read(a.path().join("cv.json")).unwrap(), std::fs::read(b.path().join("cv.json")).unwrap());
    let doc = read_json(&a.path().join("cv.json"));
    assert!(doc.get("lambda").is_some());
}
