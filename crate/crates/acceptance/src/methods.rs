use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use auditloop_core::combiners::{
    lookup, method_names, run2_choice, run3_forecast, weighted_quantile, Forecast, ForecastMethod,
    MethodError, Run2Params, Run3Params, SimpleAverage, Variant,
};
use auditloop_core::eval::{default_basis, dm_test_ewc, rolling_evaluate, EvalConfig};
use auditloop_core::{build_info, Info, LambdaGrid, Panel};
use ndarray::{s, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{ensure, normal, within, Env};

/// Realizations plus `k` noisy, biased forecasters of them.
fn synthetic(rng: &mut ChaCha8Rng, rows: usize, k: usize) -> (Array2<f64>, Array1<f64>) {
    let y = Array1::from_shape_fn(rows, |_| 2.0 + 1.5 * normal(rng));
    let quality: Vec<f64> = (0..k).map(|_| 0.3 + rng.random::<f64>()).collect();
    let bias: Vec<f64> = (0..k).map(|_| 0.4 * normal(rng)).collect();
    let x = Array2::from_shape_fn((rows, k), |(i, j)| {
        0.6 * y[i] + 0.8 + bias[j] + quality[j] * normal(rng)
    });
    (x, y)
}

fn quarters(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            let q = i + 2;
            format!("{}Q{}", 1999 + q / 4, q % 4 + 1)
        })
        .collect()
}

fn random_panel(seed: u64, rows: usize, k: usize) -> Panel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (x, y) = synthetic(&mut rng, rows, k);
    Panel::new(
        quarters(rows),
        (0..k).map(|j| format!("f{j}")).collect(),
        x,
        y,
    )
    .unwrap()
}

fn random_info(seed: u64, k: usize, history: usize, w: usize) -> Info {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (x, y) = synthetic(&mut rng, history + 1, k);
    Info::new(
        x.slice(s![..history, ..]).to_owned(),
        y.slice(s![..history]).to_owned(),
        x.row(history).to_owned(),
        w,
        LambdaGrid::default(),
    )
    .unwrap()
}

fn forecast(name: &str, info: &Info) -> Result<Forecast, String> {
    lookup(name)
        .ok_or_else(|| format!("{name} is not registered"))?
        .forecast(info)
        .map_err(|e| format!("{name}: {e}"))
}

/// Rows at and after the origin are scrambled; forecasts must not move.
fn no_lookahead() -> Result<usize, String> {
    let rows = 30;
    let panel = random_panel(5, rows, 5);
    let grid = LambdaGrid::default();
    let mut checked = 0;
    for t in [6, 12, 18, 24, 30] {
        let mut x = panel.forecasts().to_owned();
        let mut y = panel.actuals().to_owned();
        y[t - 1] += 7.0;
        for r in t..rows {
            y[r] -= 3.0;
            for v in x.row_mut(r) {
                *v *= 5.0;
            }
        }
        let altered = Panel::new(quarters(rows), panel.forecaster_names().to_vec(), x, y)
            .map_err(|e| e.to_string())?;
        let a = build_info(&panel, t, 12, &grid).map_err(|e| e.to_string())?;
        let b = build_info(&altered, t, 12, &grid).map_err(|e| e.to_string())?;
        for name in method_names() {
            let (fa, fb) = (forecast(name, &a)?, forecast(name, &b)?);
            ensure(fa == fb, || format!("{name} at t={t}: {fa:?} vs {fb:?}"))?;
            checked += 1;
        }
    }
    Ok(checked)
}

fn translation() -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for (seed, c) in [(1u64, 17.5), (2, -42.25), (3, 3.0)] {
        let info = random_info(seed, 5, 18, 12);
        let shifted = info.shifted(c);
        for name in method_names() {
            let (a, b) = (forecast(name, &info)?, forecast(name, &shifted)?);
            let gap = (b.value - (a.value + c)).abs();
            worst = worst.max(gap);
            ensure(gap <= 1e-9, || {
                format!("{name}: {} + {c} vs {} (gap {gap:e})", a.value, b.value)
            })?;
        }
    }
    Ok(worst)
}

fn run2_without_correction() -> Result<(), String> {
    let params = Run2Params {
        gamma: 0.0,
        ..Run2Params::default()
    };
    for seed in 0..10 {
        let info = random_info(300 + seed, 7, 22, 20);
        let (fin, _) = run2_choice(&info, Variant::Final, &params).map_err(|e| e.to_string())?;
        let (a, _) = run2_choice(&info, Variant::A, &params).map_err(|e| e.to_string())?;
        ensure(fin.value == a.value, || {
            format!("seed {seed}: {} vs {}", fin.value, a.value)
        })?;
    }
    Ok(())
}

fn run3_pure_blend() -> Result<(), String> {
    for seed in 0..3 {
        let info = random_info(70 + seed, 5, 22, 14);
        let pure = Run3Params {
            blend: Some((1.0, 0.0)),
            ..Run3Params::for_variant(Variant::Final)
        };
        let component = Run3Params {
            blend: None,
            ..Run3Params::for_variant(Variant::Final)
        };
        let a = run3_forecast(&info, Variant::Final, &pure).map_err(|e| e.to_string())?;
        let b = run3_forecast(&info, Variant::Final, &component).map_err(|e| e.to_string())?;
        ensure(a.value == b.value, || {
            format!("seed {seed}: {} vs {}", a.value, b.value)
        })?;
    }
    Ok(())
}

/// Inverse of the piecewise-linear CDF through the cumulative positions,
/// found by bisection on the value axis.
fn quantile_by_bisection(values: &[f64], weights: &[f64], q: f64) -> f64 {
    let mut pairs: Vec<(f64, f64)> = values
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(v, w)| (*v, *w))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pairs.len() == 1 || pairs[0].0 == pairs[pairs.len() - 1].0 {
        return pairs[0].0;
    }
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let span = total - pairs[pairs.len() - 1].1;
    let mut knots: Vec<(f64, f64, f64)> = Vec::new();
    let mut before = 0.0;
    for (v, w) in &pairs {
        let p = before / span;
        match knots.last_mut() {
            Some(last) if last.0 == *v => last.2 = p,
            _ => knots.push((*v, p, p)),
        }
        before += w;
    }
    let cdf = |v: f64| -> f64 {
        let i = knots.iter().rposition(|k| k.0 <= v).unwrap();
        if knots[i].0 == v || i + 1 == knots.len() {
            return knots[i].2;
        }
        let (a, b) = (knots[i], knots[i + 1]);
        a.2 + (v - a.0) / (b.0 - a.0) * (b.1 - a.2)
    };
    let (mut lo, mut hi) = (knots[0].0, knots[knots.len() - 1].0);
    if cdf(lo) >= q {
        return lo;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) >= q {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn quantiles() -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut cases = 0;
    while cases < 1000 {
        let ties = cases % 3 == 0;
        let values: Vec<f64> = (0..10)
            .map(|_| {
                let v = 3.0 * normal(&mut rng);
                if ties {
                    v.round()
                } else {
                    v
                }
            })
            .collect();
        let weights: Vec<f64> = (0..10)
            .map(|_| {
                if rng.random::<f64>() < 0.15 {
                    0.0
                } else {
                    rng.random::<f64>()
                }
            })
            .collect();
        if weights.iter().all(|w| *w == 0.0) {
            continue;
        }
        let q = if cases % 10 == 0 {
            [0.0, 1.0, 0.5][cases % 3]
        } else {
            rng.random::<f64>()
        };
        let got = weighted_quantile(&values, &weights, q).map_err(|e| e.to_string())?;
        let want = quantile_by_bisection(&values, &weights, q);
        ensure((got - want).abs() <= 1e-12 * (1.0 + want.abs()), || {
            format!("case {cases}: q={q} got {got} want {want}")
        })?;
        cases += 1;
    }
    Ok(cases)
}

pub fn properties(_: &Env) -> Result<Option<String>, String> {
    let lookahead = no_lookahead().map_err(|e| format!("no-lookahead: {e}"))?;
    let worst = translation().map_err(|e| format!("translation: {e}"))?;
    run2_without_correction().map_err(|e| format!("run2 with zero correction: {e}"))?;
    run3_pure_blend().map_err(|e| format!("run3 blend (1, 0): {e}"))?;
    let cases = quantiles().map_err(|e| format!("weighted quantile: {e}"))?;
    Ok(Some(format!(
        "{} methods unaffected by future rows ({lookahead} forecasts); worst translation gap \
         {worst:.1e}; run2(gamma=0) = run2.a; run3 blend (1, 0) = adaptive component; \
         {cases} quantile cases",
        method_names().len()
    )))
}

struct Counting(AtomicUsize);

impl ForecastMethod for Counting {
    fn name(&self) -> &str {
        "counting_average"
    }

    fn forecast(&self, info: &Info) -> Result<Forecast, MethodError> {
        self.0.fetch_add(1, Ordering::SeqCst);
        SimpleAverage.forecast(info)
    }
}

pub fn evaluator_counts(_: &Env) -> Result<Option<String>, String> {
    let panel = random_panel(70, 70, 23);
    let method = Counting(AtomicUsize::new(0));
    let result =
        rolling_evaluate(&panel, &method, &EvalConfig::default()).map_err(|e| e.to_string())?;
    let calls = method.0.load(Ordering::SeqCst);
    let scored = result.n_scored();
    ensure(calls == 66 && scored == 65, || {
        format!("{calls} calls and {scored} scored errors, expected 66 and 65")
    })?;
    Ok(Some(format!(
        "{calls} method calls, {scored} scored errors"
    )))
}

pub fn dm_size(_: &Env) -> Result<Option<String>, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (t, reps) = (36, 10_000);
    let mut rejections = 0;
    for _ in 0..reps {
        let a: Vec<f64> = (0..t).map(|_| normal(&mut rng)).collect();
        let b: Vec<f64> = (0..t).map(|_| normal(&mut rng)).collect();
        let r = dm_test_ewc(&a, &b, None).map_err(|e| e.to_string())?;
        if r.p_value < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / reps as f64;
    ensure((0.02..=0.10).contains(&rate), || {
        format!("rejection rate {rate}")
    })?;

    for case in 0..1000 {
        let n = rng.random_range(4..60);
        let a: Vec<f64> = (0..n).map(|_| 2.0 * normal(&mut rng)).collect();
        let b: Vec<f64> = a.iter().map(|v| v + normal(&mut rng)).collect();
        let ab = dm_test_ewc(&a, &b, None).map_err(|e| e.to_string())?;
        let ba = dm_test_ewc(&b, &a, None).map_err(|e| e.to_string())?;
        ensure(ab.stat == -ba.stat, || {
            format!("case {case}: {} vs {}", ab.stat, ba.stat)
        })?;
    }
    within(start.elapsed(), 120, "DM checks")?;
    Ok(Some(format!(
        "rejection rate {rate:.4} at 5% (T = {t}, B = {}, {reps} replications); \
         statistic negates exactly under swap in 1000 cases",
        default_basis(t)
    )))
}
