//! Independent oracles for the coordinate-descent solver and CV machinery.

use auditloop_core::shrinkage::{
    cv_curve, fit_path, fit_penalized, kkt_residual, linear_predictor, objective, pick_lambda,
    CvScheme, ForwardCv, LambdaRule, PenalizedSpec,
};
use nalgebra::{DMatrix, DVector};
use ndarray::{array, s, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn random_problem(rng: &mut ChaCha8Rng, n: usize, k: usize) -> (Array2<f64>, Array1<f64>) {
    let x = Array2::from_shape_fn((n, k), |_| StandardNormal.sample(rng));
    let beta: Vec<f64> = (0..k)
        .map(|j| {
            if j % 2 == 0 {
                rng.random_range(-2.0..2.0)
            } else {
                0.0
            }
        })
        .collect();
    let y = Array1::from_shape_fn(n, |i| {
        let signal: f64 = (0..k).map(|j| x[[i, j]] * beta[j]).sum();
        1.5 + signal + 0.5 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
    });
    (x, y)
}

/// OLS with intercept via the normal equations.
fn ols(x: &Array2<f64>, y: &Array1<f64>) -> (f64, Vec<f64>) {
    let (n, k) = x.dim();
    let design = DMatrix::from_fn(n, k + 1, |i, j| if j == 0 { 1.0 } else { x[[i, j - 1]] });
    let target = DVector::from_iterator(n, y.iter().copied());
    let xtx = design.transpose() * &design;
    let xty = design.transpose() * target;
    let coef = xtx.cholesky().expect("full rank").solve(&xty);
    (coef[0], coef.iter().skip(1).copied().collect())
}

#[test]
fn zero_lambda_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..50 {
        let n = rng.random_range(8..=20);
        let k = rng.random_range(1..=(n - 3).min(10));
        let (x, y) = random_problem(&mut rng, n, k);
        let (b0, beta) = ols(&x, &y);
        for standardize in [true, false] {
            let spec = PenalizedSpec {
                standardize,
                ..PenalizedSpec::lasso(0.0)
            };
            let fit = fit_penalized(x.view(), y.view(), &spec, None).unwrap();
            assert!(
                (fit.intercept - b0).abs() < 1e-8,
                "trial {trial}: intercept {} vs {b0}",
                fit.intercept
            );
            for (a, b) in fit.beta.iter().zip(&beta) {
                assert!((a - b).abs() < 1e-8, "trial {trial}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn kkt_holds_on_random_problems() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for trial in 0..500 {
        let n = rng.random_range(3..=20);
        let k = rng.random_range(1..=10);
        let (x, y) = random_problem(&mut rng, n, k);
        let alpha = [0.0, 0.5, 0.65, 1.0][trial % 4];
        let lambda = 10f64.powf(rng.random_range(-3.0..1.0));
        let spec = PenalizedSpec {
            standardize: trial % 3 != 0,
            ..PenalizedSpec::elastic_net(alpha, lambda)
        };
        let weights =
            (trial % 5 == 0).then(|| Array1::from_shape_fn(n, |_| rng.random_range(0.1..2.0)));
        let fit = fit_penalized(
            x.view(),
            y.view(),
            &spec,
            weights.as_ref().map(|w| w.view()),
        )
        .unwrap();
        let r = kkt_residual(
            x.view(),
            y.view(),
            &spec,
            weights.as_ref().map(|w| w.view()),
            &fit,
        )
        .unwrap();
        worst = worst.max(r);
        assert!(
            r < 1e-8,
            "trial {trial}: KKT residual {r:e} (n={n}, k={k}, alpha={alpha})"
        );
    }
    eprintln!("worst KKT residual over 500 problems: {worst:e}");
}

#[test]
fn solution_beats_random_perturbations() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (x, y) = random_problem(&mut rng, 8, 4);
    let spec = PenalizedSpec::elastic_net(0.65, 0.2);
    let fit = fit_penalized(x.view(), y.view(), &spec, None).unwrap();
    assert!(kkt_residual(x.view(), y.view(), &spec, None, &fit).unwrap() < 1e-8);
    let best = objective(
        x.view(),
        y.view(),
        &spec,
        None,
        fit.intercept,
        fit.beta.view(),
    )
    .unwrap();
    for _ in 0..1000 {
        let scale = 10f64.powf(rng.random_range(-6.0..-1.0));
        let b0 = fit.intercept + scale * rng.random_range(-1.0..1.0);
        let beta = fit.beta.mapv(|b| b + scale * rng.random_range(-1.0..1.0));
        let value = objective(x.view(), y.view(), &spec, None, b0, beta.view()).unwrap();
        assert!(
            best <= value + 1e-15,
            "perturbation improved objective: {value} < {best}"
        );
    }
}

#[test]
fn huge_penalty_zeroes_every_coefficient() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (x, y) = random_problem(&mut rng, 12, 5);
    let fit = fit_penalized(x.view(), y.view(), &PenalizedSpec::lasso(1e8), None).unwrap();
    assert!(fit.beta.iter().all(|b| *b == 0.0));
    assert!((fit.intercept - y.mean().unwrap()).abs() < 1e-12);
}

#[test]
fn standardized_fit_is_scale_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (x, y) = random_problem(&mut rng, 15, 4);
    let spec = PenalizedSpec::elastic_net(0.5, 0.05);
    let base = fit_penalized(x.view(), y.view(), &spec, None).unwrap();
    let mut scaled = x.clone();
    scaled.column_mut(2).mapv_inplace(|v| v * 37.5);
    let other = fit_penalized(scaled.view(), y.view(), &spec, None).unwrap();
    for i in 0..x.nrows() {
        let a = base.predict(x.row(i));
        let b = other.predict(scaled.row(i));
        assert!((a - b).abs() < 1e-8, "row {i}: {a} vs {b}");
    }
}

#[test]
fn path_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (x, y) = random_problem(&mut rng, 20, 8);
    let grid = auditloop_core::LambdaGrid::default();
    let a = fit_path(x.view(), y.view(), &grid, &PenalizedSpec::lasso(0.0), None).unwrap();
    let b = fit_path(x.view(), y.view(), &grid, &PenalizedSpec::lasso(0.0), None).unwrap();
    assert_eq!(a, b);
}

/// Leave-one-out by explicit refits with the same path solver.
#[test]
fn loo_curve_equals_brute_force_refits() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let lambdas = [2.0, 0.5, 0.1, 0.01];
    for n in [3, 5, 8, 12] {
        let (x, y) = random_problem(&mut rng, n, 3);
        let spec = PenalizedSpec::elastic_net(0.65, 0.0);
        let curve = cv_curve(
            x.view(),
            y.view(),
            &lambdas,
            &CvScheme::Loo,
            &spec,
            &linear_predictor,
        )
        .unwrap();
        let mut expected = vec![0.0; lambdas.len()];
        let mut losses = vec![vec![0.0; n]; lambdas.len()];
        for i in 0..n {
            let keep: Vec<usize> = (0..n).filter(|&r| r != i).collect();
            let xt = x.select(Axis(0), &keep);
            let yt = y.select(Axis(0), &keep);
            let fits = fit_path(xt.view(), yt.view(), &lambdas, &spec, None).unwrap();
            for (l, fit) in fits.iter().enumerate() {
                let e = y[i] - fit.predict(x.row(i));
                losses[l][i] = e * e;
            }
        }
        for l in 0..lambdas.len() {
            expected[l] = losses[l].iter().map(|v| v * 1.0).sum::<f64>() / n as f64;
        }
        assert_eq!(curve.scores, expected, "n = {n}");

        // Cold single-lambda refits agree to solver tolerance.
        for (l, &lambda) in lambdas.iter().enumerate() {
            let mut total = 0.0;
            for i in 0..n {
                let keep: Vec<usize> = (0..n).filter(|&r| r != i).collect();
                let xt = x.select(Axis(0), &keep);
                let yt = y.select(Axis(0), &keep);
                let fit =
                    fit_penalized(xt.view(), yt.view(), &spec.with_lambda(lambda), None).unwrap();
                total += (y[i] - fit.predict(x.row(i))).powi(2);
            }
            assert!((total / n as f64 - curve.scores[l]).abs() < 1e-7);
        }
    }
}

#[test]
fn kfold_standard_error_from_fold_means() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let (x, y) = random_problem(&mut rng, 10, 3);
    let lambdas = [0.3];
    let spec = PenalizedSpec::lasso(0.0);
    let curve = cv_curve(
        x.view(),
        y.view(),
        &lambdas,
        &CvScheme::KFold(5),
        &spec,
        &linear_predictor,
    )
    .unwrap();
    let mut fold_means = Vec::new();
    for f in 0..5 {
        let held = [2 * f, 2 * f + 1];
        let keep: Vec<usize> = (0..10).filter(|r| !held.contains(r)).collect();
        let fit = &fit_path(
            x.select(Axis(0), &keep).view(),
            y.select(Axis(0), &keep).view(),
            &lambdas,
            &spec,
            None,
        )
        .unwrap()[0];
        let m: f64 = held
            .iter()
            .map(|&i| (y[i] - fit.predict(x.row(i))).powi(2))
            .sum::<f64>()
            / 2.0;
        fold_means.push(m);
    }
    let mean = fold_means.iter().sum::<f64>() / 5.0;
    let sd = (fold_means.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0).sqrt();
    assert!((curve.scores[0] - mean).abs() < 1e-12);
    assert!((curve.score_se.unwrap()[0] - sd / 5f64.sqrt()).abs() < 1e-12);
}

#[test]
fn forward_cv_without_decay_is_mean_one_step_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let (x, y) = random_problem(&mut rng, 9, 2);
    let lambdas = [0.1];
    let spec = PenalizedSpec::lasso(0.0);
    let scheme = CvScheme::Forward(ForwardCv {
        horizon_weights: vec![1.0],
        fold_decay: 1.0,
        min_train: 4,
    });
    let curve = cv_curve(
        x.view(),
        y.view(),
        &lambdas,
        &scheme,
        &spec,
        &linear_predictor,
    )
    .unwrap();
    assert!(curve.score_se.is_none());
    let mut errors = Vec::new();
    for train in 4..9 {
        let fit = &fit_path(
            x.slice(s![..train, ..]),
            y.slice(s![..train]),
            &lambdas,
            &spec,
            None,
        )
        .unwrap()[0];
        errors.push((fit.predict(x.row(train)) - y[train]).powi(2));
    }
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    assert_eq!(curve.folds, 5);
    assert!((curve.scores[0] - mean).abs() < 1e-12);
}

/// Two horizons with weights (0.05, 0.95), fold decay 0.75, on a 6-row panel,
/// evaluated term by term.
#[test]
fn forward_cv_two_horizon_matches_hand_computation() {
    let x = array![
        [1.0, 1.2],
        [2.0, 1.7],
        [2.5, 2.9],
        [3.5, 3.1],
        [4.0, 4.4],
        [5.5, 5.0]
    ];
    let y = array![1.1, 1.9, 2.8, 3.2, 4.3, 5.1];
    // Predictor: plain average of the two forecasts, ignoring the fit.
    let average =
        |_: &auditloop_core::shrinkage::Fit, row: ndarray::ArrayView1<'_, f64>| row.mean().unwrap();
    let scheme = CvScheme::Forward(ForwardCv {
        horizon_weights: vec![0.05, 0.95],
        fold_decay: 0.75,
        min_train: 3,
    });
    let curve = cv_curve(
        x.view(),
        y.view(),
        &[1.0],
        &scheme,
        &PenalizedSpec::lasso(0.0),
        &average,
    )
    .unwrap();
    // Folds: train 3 -> rows 4,5 ; train 4 -> rows 5,6 (1-based).
    let e = |r: usize| ((x[[r, 0]] + x[[r, 1]]) / 2.0 - y[r]).powi(2);
    let fold1 = 0.05 * e(3) + 0.95 * e(4);
    let fold2 = 0.05 * e(4) + 0.95 * e(5);
    let (w1, w2) = (0.75 / 1.75, 1.0 / 1.75);
    let expected = w1 * fold1 + w2 * fold2;
    assert_eq!(curve.folds, 2);
    assert!(
        (curve.scores[0] - expected).abs() < 1e-15,
        "{} vs {expected}",
        curve.scores[0]
    );
}

#[test]
fn pick_min_is_no_worse_than_any_grid_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let (x, y) = random_problem(&mut rng, 14, 5);
    let grid = auditloop_core::make_lambda_grid(40, 2.0, -6.0).unwrap();
    let curve = cv_curve(
        x.view(),
        y.view(),
        &grid,
        &CvScheme::Loo,
        &PenalizedSpec::lasso(0.0),
        &linear_predictor,
    )
    .unwrap();
    let best = pick_lambda(&curve, LambdaRule::Min).unwrap()[0];
    assert!(curve.scores.iter().all(|s| curve.scores[best] <= *s));
}
