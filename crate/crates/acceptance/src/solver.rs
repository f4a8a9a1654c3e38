use std::time::Instant;

use auditloop_core::shrinkage::{
    cv_curve, fit_path, fit_penalized, kkt_residual, linear_predictor, CvScheme, PenalizedSpec,
};
use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{ensure, normal, within, Env};

fn random_problem(rng: &mut ChaCha8Rng, n: usize, k: usize) -> (Array2<f64>, Array1<f64>) {
    let x = Array2::from_shape_fn((n, k), |_| normal(rng));
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
        1.5 + signal + 0.5 * normal(rng)
    });
    (x, y)
}

fn ols(x: &Array2<f64>, y: &Array1<f64>) -> Option<Vec<f64>> {
    let (n, k) = x.dim();
    let design = DMatrix::from_fn(n, k + 1, |i, j| if j == 0 { 1.0 } else { x[[i, j - 1]] });
    let target = DVector::from_iterator(n, y.iter().copied());
    let xtx = design.transpose() * &design;
    let xty = design.transpose() * target;
    Some(xtx.cholesky()?.solve(&xty).iter().copied().collect())
}

fn kkt(rng: &mut ChaCha8Rng) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for trial in 0..500 {
        let n = rng.random_range(3..=20);
        let k = rng.random_range(1..=10);
        let (x, y) = random_problem(rng, n, k);
        let alpha = [0.0, 0.5, 0.65, 1.0][trial % 4];
        let lambda = 10f64.powf(rng.random_range(-3.0..1.0));
        let spec = PenalizedSpec {
            standardize: trial % 3 != 0,
            ..PenalizedSpec::elastic_net(alpha, lambda)
        };
        let fit = fit_penalized(x.view(), y.view(), &spec, None)
            .map_err(|e| format!("problem {trial}: {e}"))?;
        let r = kkt_residual(x.view(), y.view(), &spec, None, &fit)
            .map_err(|e| format!("problem {trial}: {e}"))?;
        worst = worst.max(r);
        ensure(r < 1e-8, || format!("problem {trial}: KKT residual {r:e}"))?;
    }
    Ok(worst)
}

fn zero_penalty(rng: &mut ChaCha8Rng) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let n = rng.random_range(8..=20);
        let k = rng.random_range(1..=(n - 3).min(10));
        let (x, y) = random_problem(rng, n, k);
        let want = ols(&x, &y).ok_or("rank-deficient design")?;
        for standardize in [true, false] {
            let spec = PenalizedSpec {
                standardize,
                ..PenalizedSpec::lasso(0.0)
            };
            let fit = fit_penalized(x.view(), y.view(), &spec, None).map_err(|e| e.to_string())?;
            let got = std::iter::once(fit.intercept).chain(fit.beta.iter().copied());
            for (a, b) in got.zip(&want) {
                worst = worst.max((a - b).abs());
            }
        }
        ensure(worst < 1e-8, || {
            format!("problem {trial}: deviation {worst:e}")
        })?;
    }
    Ok(worst)
}

fn loo(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let lambdas = [2.0, 0.5, 0.1, 0.01];
    for n in 3..=12 {
        let (x, y) = random_problem(rng, n, 3);
        let spec = PenalizedSpec::elastic_net(0.65, 0.0);
        let curve = cv_curve(
            x.view(),
            y.view(),
            &lambdas,
            &CvScheme::Loo,
            &spec,
            &linear_predictor,
        )
        .map_err(|e| e.to_string())?;
        let mut losses = vec![vec![0.0; n]; lambdas.len()];
        for i in 0..n {
            let keep: Vec<usize> = (0..n).filter(|&r| r != i).collect();
            let xt = x.select(Axis(0), &keep);
            let yt = y.select(Axis(0), &keep);
            let fits =
                fit_path(xt.view(), yt.view(), &lambdas, &spec, None).map_err(|e| e.to_string())?;
            for (l, fit) in fits.iter().enumerate() {
                let e = y[i] - fit.predict(x.row(i));
                losses[l][i] = e * e;
            }
        }
        let brute: Vec<f64> = losses
            .iter()
            .map(|l| l.iter().sum::<f64>() / n as f64)
            .collect();
        ensure(curve.scores == brute, || {
            format!("n = {n}: LOO curve {:?} vs refits {brute:?}", curve.scores)
        })?;
    }
    Ok(())
}

pub fn suite(_: &Env) -> Result<Option<String>, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_611);
    let worst_kkt = kkt(&mut rng)?;
    let worst_ols = zero_penalty(&mut rng)?;
    loo(&mut rng)?;
    within(start.elapsed(), 60, "solver suite")?;
    Ok(Some(format!(
        "500 problems, worst KKT residual {worst_kkt:.1e}; zero-penalty deviation {worst_ols:.1e}; \
         LOO equals refits for n = 3..12"
    )))
}
