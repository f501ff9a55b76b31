mod common;

use common::{enumerate_penalty, random_dataset, rel_close};
use fridge::component::eval_component;
use fridge::datagen::{gen_d1, gen_d2, theoretical_r2, D2Block};
use fridge::metrics::{oracle_mse, selection_metrics, win_rate};
use fridge::penalty::{backward_penalty, forward_penalty, irl_weights, leave_one_out, GVector};
use fridge::selection::{extreme_fridge, fold_assignments, kfold_cv, kfold_cv_with_folds, lambda_grid, select_tms, ExtremeOptions, TmsRule};
use fridge::solvers::{fit, lambda_max, FitConfig, LAMBDA_MAX_EPSILON};
use fridge::{ComponentKind, Dataset};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `(g, m)` with `p <= 12`, entries in `[0, 10]` and some exact zeros.
fn g_and_order() -> impl Strategy<Value = (Vec<f64>, usize)> {
    (1usize..=12).prop_flat_map(|p| {
        let entry = prop_oneof![1 => Just(0.0), 4 => 0.0..10.0f64];
        (prop::collection::vec(entry, p), 0..p)
    })
}

fn positive_g() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01..10.0f64, 1..=12)
}

fn dataset(seed: u64, n: usize, p: usize) -> Dataset {
    random_dataset(&mut ChaCha8Rng::seed_from_u64(seed), n, p)
}

proptest! {
    #[test]
    fn forward_matches_enumeration((g, m) in g_and_order()) {
        let eval = forward_penalty(&GVector::new(g.clone()).unwrap(), m).unwrap();
        prop_assert!(rel_close(eval.penalty(), enumerate_penalty(&g, m), 1e-12));
        prop_assert_eq!(&eval.v_values[0], &g);
        prop_assert!(rel_close(eval.p_values[0], g.iter().sum(), 1e-15));
        for k in 0..=m {
            prop_assert!(eval.p_values[k] >= 0.0);
            prop_assert!(eval.v_values[k].iter().all(|v| *v >= 0.0));
            let total: f64 = eval.v_values[k].iter().sum();
            prop_assert!(rel_close(eval.p_values[k], total / (k + 1) as f64, 1e-12));
        }
        prop_assert_eq!(eval.op_count, (3 * m + 1) * g.len() - 1);
    }

    #[test]
    fn penalty_vanishes_exactly_on_sparse_vectors((g, m) in g_and_order()) {
        let zeros = g.iter().filter(|v| **v == 0.0).count();
        let pm = forward_penalty(&GVector::new(g.clone()).unwrap(), m).unwrap().penalty();
        prop_assert_eq!(pm == 0.0, zeros >= g.len() - m);
    }

    #[test]
    fn leave_one_out_matches_reduced_vector((g, m) in g_and_order(), integer in any::<bool>(), pick in any::<prop::sample::Index>()) {
        let g: Vec<f64> = if integer { g.iter().map(|v| v.round()).collect() } else { g };
        let gv = GVector::new(g.clone()).unwrap();
        let eval = forward_penalty(&gv, m).unwrap();
        let j = pick.index(g.len());
        let mut rest = g.clone();
        rest.remove(j);
        for k in 0..=m {
            let got = leave_one_out(&eval, &gv, k as isize, j).unwrap();
            let want = if k < rest.len() {
                forward_penalty(&GVector::new(rest.clone()).unwrap(), k).unwrap().penalty()
            } else {
                0.0
            };
            if integer {
                prop_assert_eq!(got, want, "k = {}", k);
            } else {
                prop_assert!(rel_close(got, want, 1e-10), "k = {}: {} vs {}", k, got, want);
            }
        }
        prop_assert_eq!(leave_one_out(&eval, &gv, -1, j).unwrap(), 1.0);
    }

    #[test]
    fn reweighting_splits_the_penalty((g, m) in g_and_order()) {
        let gv = GVector::new(g.clone()).unwrap();
        let w = irl_weights(&gv, m).unwrap();
        prop_assert!(w.weights.iter().all(|v| *v >= 0.0));
        let split: f64 = w.weights.iter().zip(&g).map(|(w, g)| w * g).sum();
        let pm = forward_penalty(&gv, m).unwrap().penalty();
        prop_assert!(rel_close(split, (m + 1) as f64 * pm, 1e-12), "{} vs {}", split, (m + 1) as f64 * pm);
    }

    #[test]
    fn backward_agrees_with_forward(g in positive_g()) {
        let gv = GVector::new(g.clone()).unwrap();
        let p = g.len();
        for k in 1..=p {
            let fwd = forward_penalty(&gv, p - k).unwrap().penalty();
            let bwd = backward_penalty(&gv, k).unwrap();
            prop_assert!(rel_close(bwd, fwd, 1e-10), "k = {}: {} vs {}", k, bwd, fwd);
        }
    }

    #[test]
    fn components_vanish_only_at_zero(beta in prop::collection::vec(prop_oneof![Just(0.0), -5.0..5.0f64], 1..10), m in 0usize..3) {
        let base = vec![0.7; beta.len()];
        let kinds = [
            ComponentKind::Absolute,
            ComponentKind::Square,
            ComponentKind::GeometricMean { order: m },
            ComponentKind::adaptive(1.0, base).unwrap(),
        ];
        for kind in &kinds {
            let g = eval_component(kind, &beta).unwrap();
            for (gj, bj) in g.values().iter().zip(&beta) {
                prop_assert!(*gj >= 0.0);
                prop_assert_eq!(*gj == 0.0, *bj == 0.0, "{:?}", kind);
            }
        }
    }

    #[test]
    fn selection_metrics_ignore_predictor_labels(
        p in 2usize..30,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::seq::SliceRandom;
        use rand::Rng;
        let star: Vec<usize> = (0..p).filter(|_| rng.random_bool(0.4)).collect();
        let hat: Vec<usize> = (0..p).filter(|_| rng.random_bool(0.4)).collect();
        prop_assume!(!star.is_empty());
        let mut relabel: Vec<usize> = (0..p).collect();
        relabel.shuffle(&mut rng);
        let moved = |s: &[usize]| s.iter().map(|&j| relabel[j]).collect::<Vec<_>>();
        let (sens, spec) = selection_metrics(&hat, &star, p).unwrap();
        prop_assert!((0.0..=100.0).contains(&sens) && (0.0..=100.0).contains(&spec));
        prop_assert_eq!(selection_metrics(&moved(&hat), &moved(&star), p).unwrap(), (sens, spec));
    }

    #[test]
    fn oracle_error_is_a_squared_norm(
        n in 1usize..20,
        p in 1usize..8,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-2.0..2.0));
        let a: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
        prop_assert!(oracle_mse(&x, &a, &b).unwrap() >= 0.0);
        prop_assert_eq!(oracle_mse(&x, &a, &a).unwrap(), 0.0);
    }

    #[test]
    fn win_rates_of_untied_runs_are_complementary(pairs in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 1..50)) {
        prop_assume!(pairs.iter().all(|(a, b)| a != b));
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let total = win_rate(&a, &b).unwrap() + win_rate(&b, &a).unwrap();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn d1_draws_keep_the_collinearity(seed in any::<u64>(), n in 1usize..40) {
        let (data, scenario) = gen_d1(n, 60, seed).unwrap();
        let x = &data.x;
        for i in 0..n {
            prop_assert!((x[(i, 3)] + 0.65 * (x[(i, 0)] + x[(i, 1)] + x[(i, 2)])).abs() <= 1e-12);
            prop_assert!((x[(i, 7)] + x[(i, 4)] / 3.0 + x[(i, 5)] / 2.0 + 2.0 * x[(i, 6)] / 3.0).abs() <= 1e-12);
            prop_assert!((x[(i, 11)] + 0.5 * (x[(i, 8)] + x[(i, 9)] + x[(i, 10)])).abs() <= 1e-12);
        }
        prop_assert_eq!(scenario.support(), vec![3, 7, 11, 12]);
        let r2 = theoretical_r2(&scenario.true_beta, &scenario.cov_x, scenario.noise_variance).unwrap();
        prop_assert!((r2 - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn d2_scenarios_are_calibrated(seed in any::<u64>(), random_block in any::<bool>()) {
        let block = if random_block { D2Block::RandomContiguous } else { D2Block::Leading };
        let (_, scenario) = gen_d2(10, 60, seed, block).unwrap();
        prop_assert_eq!(scenario.support().len(), 10);
        let r2 = theoretical_r2(&scenario.true_beta, &scenario.cov_x, scenario.noise_variance).unwrap();
        prop_assert!((r2 - 0.5).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn objective_trace_never_rises_without_truncation(
        seed in any::<u64>(),
        n in 20usize..60,
        p in 3usize..10,
        m in 0usize..3,
        frac in 0.05..1.5f64,
    ) {
        prop_assume!(m < p);
        let data = dataset(seed, n, p).standardize().unwrap();
        let top = lambda_max(&data, m, &ComponentKind::Absolute, LAMBDA_MAX_EPSILON).unwrap();
        let config = FitConfig { truncation_threshold: 0.0, max_sweeps: 2000, ..FitConfig::new(frac * top.min(50.0), m) };
        let f = fit(&data, &config, None).unwrap();
        for w in f.objective_trace.windows(2) {
            let slack = 1e-10 * w[0].abs().max(1.0);
            prop_assert!(w[1] <= w[0] + slack, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn fitted_support_respects_the_bound_beyond_lambda_max(
        seed in any::<u64>(),
        n in 20usize..60,
        p in 3usize..10,
        m in 0usize..3,
    ) {
        prop_assume!(m < p);
        let data = dataset(seed, n, p).standardize().unwrap();
        let top = lambda_max(&data, m, &ComponentKind::Absolute, LAMBDA_MAX_EPSILON).unwrap();
        let f = fit(&data, &FitConfig::new(10.0 * top, m), None).unwrap();
        prop_assert!(f.support.len() <= m, "support {:?} for m = {}", f.support, m);
        prop_assert!(f.coefficients.iter().all(|b| *b == 0.0 || b.abs() >= 1e-4));
    }

    #[test]
    fn cv_ignores_row_order(seed in any::<u64>(), m in 0usize..2) {
        let data = dataset(seed, 40, 5);
        let config = FitConfig::new(0.0, m);
        let grid = lambda_grid(1.0, 8).unwrap();
        let folds = fold_assignments(40, 4, seed).unwrap();
        let base = kfold_cv_with_folds(&data, &grid, &config, &folds).unwrap();

        let order: Vec<usize> = (0..40).rev().collect();
        let shuffled = data.select_rows(&order);
        let moved: Vec<usize> = order.iter().map(|&i| folds[i]).collect();
        let again = kfold_cv_with_folds(&shuffled, &grid, &config, &moved).unwrap();
        for (a, b) in base.mean_cv_error.iter().zip(&again.mean_cv_error) {
            prop_assert!(rel_close(*a, *b, 1e-6), "{} vs {}", a, b);
        }
        // Near-ties may flip under reordered sums; each choice must attain the other's minimum.
        let low = base.mean_cv_error[base.best_index];
        prop_assert!(rel_close(base.mean_cv_error[again.best_index], low, 1e-6));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn tms_choice_ignores_candidate_order(seed in any::<u64>(), shift in 0usize..4) {
        let data = dataset(seed, 30, 6);
        let options = ExtremeOptions { grid_points: 20, ..ExtremeOptions::default() };
        let config = FitConfig::default();
        let mut candidates = vec![0, 1, 2, 3];
        let forward = select_tms(&data, &candidates, 3, seed, &config, &options, TmsRule::OneStandardError).unwrap();
        candidates.rotate_left(shift);
        candidates.reverse();
        candidates.push(candidates[0]);
        let shuffled = select_tms(&data, &candidates, 3, seed, &config, &options, TmsRule::OneStandardError).unwrap();
        prop_assert_eq!(forward.recommended, shuffled.recommended);
        prop_assert_eq!(forward.mean_mse, shuffled.mean_mse);
    }

    #[test]
    fn extreme_support_never_exceeds_the_target(seed in any::<u64>(), m in 0usize..4) {
        let data = dataset(seed, 30, 6);
        let options = ExtremeOptions { grid_points: 20, ..ExtremeOptions::default() };
        let ext = extreme_fridge(&data, &FitConfig::new(0.0, m), &options).unwrap();
        prop_assert!(ext.support.len() <= m);
    }
}

#[test]
fn cv_is_reproducible() {
    let data = dataset(5, 50, 6);
    let grid = lambda_grid(2.0, 10).unwrap();
    let config = FitConfig::new(0.0, 1);
    let a = kfold_cv(&data, &grid, &config, 5, 17).unwrap();
    let b = kfold_cv(&data, &grid, &config, 5, 17).unwrap();
    assert_eq!(a, b);
}

#[test]
fn d2_sample_covariance_converges() {
    // E|S - Sigma|_F^2 is about (|Sigma|_F^2 + tr(Sigma)^2) / n, which is
    // above 0.05^2 at n = 1e5 for this block, so the check uses 4e5 rows.
    let n = 400_000;
    let (data, scenario) = gen_d2(n, 20, 3, D2Block::Leading).unwrap();
    let x = &data.x;
    let means: Vec<f64> = (0..20).map(|j| x.column(j).mean()).collect();
    let centered = DMatrix::from_fn(n, 20, |i, j| x[(i, j)] - means[j]);
    let sample = centered.transpose() * &centered / (n - 1) as f64;
    let dist = (sample - &scenario.cov_x).norm();
    assert!(dist < 0.05, "Frobenius distance {dist}");
}
