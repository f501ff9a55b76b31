use fridge::datagen::gen_d1;
use fridge::metrics::{best_potential, oracle_mse};
use fridge::selection::{default_grid, extreme_fridge, kfold_cv, select_tms, ExtremeOptions, TmsRule};
use fridge::solvers::{solution_path, FitConfig};
use fridge::Dataset;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn noise_free(seed: u64, n: usize, beta: &[f64]) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, beta.len(), |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    let y = &x * DVector::from_column_slice(beta);
    Dataset::new(x, y, None).unwrap()
}

#[test]
fn cv_on_noise_free_data_picks_the_weakest_penalty() {
    let data = noise_free(1, 60, &[1.5, -2.0, 0.0, 0.0, 1.0]);

    // Every lambda reproduces a 3-sparse truth when m >= 3, so the curve is
    // flat at rounding level and only its size is meaningful.
    let config = FitConfig::new(0.0, 3);
    let grid = default_grid(&data, &config, 40).unwrap();
    let cv = kfold_cv(&data, &grid, &config, 5, 3).unwrap();
    assert!(cv.mean_cv_error[0] < 1e-10, "{}", cv.mean_cv_error[0]);
    assert!(cv.mean_cv_error[cv.best_index] <= cv.mean_cv_error[0]);

    let lasso = FitConfig::new(0.0, 0);
    let grid = default_grid(&data, &lasso, 40).unwrap();
    let cv = kfold_cv(&data, &grid, &lasso, 5, 3).unwrap();
    // The Lasso bias grows with lambda; below about 1e-7 it is under the
    // solver's stopping error, so the minimum lands in the bottom decade.
    assert!(cv.best_lambda <= 10.0 * grid[0], "best lambda {}", cv.best_lambda);
    assert!(cv.mean_cv_error[cv.best_index] < 1e-13);
    assert!(cv.mean_cv_error.windows(2).skip(8).all(|w| w[1] >= w[0]));
}

#[test]
fn d1_cv_prefers_an_interior_penalty() {
    let interior = (0..20u64)
        .into_par_iter()
        .filter(|&seed| {
            let (data, _) = gen_d1(100, 60, seed).unwrap();
            let config = FitConfig::new(0.0, 3);
            let grid = default_grid(&data, &config, 40).unwrap();
            let cv = kfold_cv(&data, &grid, &config, 10, seed).unwrap();
            cv.best_index > 0 && cv.best_index + 1 < grid.len()
        })
        .count();
    assert!(interior > 10, "interior in {interior} of 20 runs");
}

#[test]
fn d1_fridge_potential_beats_lasso_potential() {
    let wins = (0..20u64)
        .into_par_iter()
        .filter(|&seed| {
            let (data, scenario) = gen_d1(100, 60, seed).unwrap();
            let std = data.standardize().unwrap();
            let x_eval = data.raw_x();
            let potential = |m: usize| {
                let config = FitConfig::new(0.0, m);
                let grid = default_grid(&data, &config, 100).unwrap();
                let path = solution_path(&std, &grid, &config).unwrap();
                best_potential(&path, &x_eval, &scenario.true_beta).unwrap().0
            };
            potential(4) <= potential(0)
        })
        .count();
    assert!(wins > 10, "m = 4 at least as good in {wins} of 20 runs");
}

#[test]
fn best_potential_on_a_worsening_path_is_the_first_point() {
    let beta = [1.0, -0.5, 2.0, 0.0];
    let data = noise_free(2, 50, &beta);
    let config = FitConfig::new(0.0, 0);
    let grid = default_grid(&data, &config, 30).unwrap();
    let path = solution_path(&data.standardize().unwrap(), &grid, &config).unwrap();
    let x = data.raw_x();
    let errors: Vec<f64> = path.fits.iter().map(|f| oracle_mse(&x, &f.raw_coefficients, &beta).unwrap()).collect();
    assert!(errors.windows(2).all(|w| w[1] >= w[0]));
    let (value, lambda) = best_potential(&path, &x, &beta).unwrap();
    assert_eq!(lambda, grid[0]);
    assert!(value < 1e-10, "{value}");
}

#[test]
fn extreme_fridge_finds_a_single_true_predictor() {
    let data = noise_free(3, 40, &[2.0, 0.0, 0.0, 0.0, 0.0]);
    let ext = extreme_fridge(&data, &FitConfig::new(0.0, 1), &ExtremeOptions::default()).unwrap();
    assert_eq!(ext.support, vec![0]);
    assert!(ext.path_tail_stable);
    assert!((ext.ols_fit.coefficients[0] - 2.0).abs() < 1e-10);
    assert!(ext.ols_fit.coefficients[1..].iter().all(|b| *b == 0.0));
}

#[test]
fn select_tms_recovers_a_two_variable_truth() {
    let data = noise_free(4, 40, &[1.0, 0.0, -1.5, 0.0, 0.0, 0.0]);
    let options = ExtremeOptions { grid_points: 40, ..ExtremeOptions::default() };
    let config = FitConfig::default();
    let sel = select_tms(&data, &[0, 1, 2, 3, 4], 10, 5, &config, &options, TmsRule::OneStandardError).unwrap();
    assert_eq!(sel.recommended, 2, "curve {:?}", sel.mean_mse);
    assert!(sel.mean_mse[2] < 1e-10);

    let only = select_tms(&data, &[0], 3, 5, &config, &options, TmsRule::OneStandardError).unwrap();
    assert_eq!(only.recommended, 0);
}
