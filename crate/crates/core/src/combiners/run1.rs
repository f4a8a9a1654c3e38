use ndarray::ArrayView1;

use super::quantile::{median, weighted_quantile};
use super::{fallback_label, mean_over, Forecast, ForecastMethod, MethodError, Variant};
use crate::panel::Info;
use crate::shrinkage::{
    cv_curve, fit_path, linear_predictor, pick_lambda, CvScheme, Fit, LambdaRule, PenalizedSpec,
};

/// Constants of the stability-selection family.
#[derive(Clone, Debug, PartialEq)]
pub struct Run1Params {
    /// Elastic-net mixing for the final and `a` variants.
    pub alpha: f64,
    /// Half-width of the stability neighborhood in log-penalty units.
    pub delta: f64,
    /// Selection-frequency threshold.
    pub threshold: f64,
    /// Most recent training rows used for the performance RMSE.
    pub recent_rows: usize,
    /// RMSE exponent in the composite weight.
    pub power: f64,
    /// Top weight must exceed this multiple of the runner-up to dominate.
    pub dominance: f64,
    pub quantile: f64,
    /// Standard-error multiplier for the final variant.
    pub se_final: f64,
    /// Standard-error multiplier for variants `a` and `b`.
    pub se_plain: f64,
    /// Folds for the elastic-net variants.
    pub folds: usize,
    /// Folds for the LASSO variant.
    pub folds_lasso: usize,
}

impl Default for Run1Params {
    fn default() -> Self {
        Run1Params {
            alpha: 0.65,
            delta: 0.25,
            threshold: 0.4,
            recent_rows: 2,
            power: 14.0,
            dominance: 5.0,
            quantile: 0.44,
            se_final: 1.5,
            se_plain: 1.0,
            folds: 5,
            folds_lasso: 10,
        }
    }
}

/// Grid indices whose log-penalty lies strictly within `delta` of the one at
/// `center`.
pub fn stability_neighborhood(grid: &[f64], center: usize, delta: f64) -> Vec<usize> {
    let anchor = grid[center].ln();
    (0..grid.len())
        .filter(|&j| (grid[j].ln() - anchor).abs() < delta)
        .collect()
}

/// Share of `fits` in which each coefficient is nonzero.
pub fn stability_frequencies(fits: &[&Fit], k: usize) -> Vec<f64> {
    let mut counts = vec![0usize; k];
    for fit in fits {
        for j in fit.active() {
            counts[j] += 1;
        }
    }
    counts
        .into_iter()
        .map(|c| c as f64 / fits.len() as f64)
        .collect()
}

/// `ln(pi^2 * rmse^-power)` for each entry; a zero RMSE gives `+inf`.
pub fn composite_log_weights(pi: &[f64], rmse: &[f64], power: f64) -> Vec<f64> {
    pi.iter()
        .zip(rmse)
        .map(|(p, r)| {
            if *r == 0.0 {
                f64::INFINITY
            } else {
                2.0 * p.ln() - power * r.ln()
            }
        })
        .collect()
}

/// Position of the largest weight if it exceeds `factor` times the second
/// largest (ties to the lower position). A single entry always dominates.
pub fn dominant(log_weights: &[f64], factor: f64) -> Option<usize> {
    let mut order: Vec<usize> = (0..log_weights.len()).collect();
    order.sort_by(|&a, &b| log_weights[b].total_cmp(&log_weights[a]).then(a.cmp(&b)));
    match order.as_slice() {
        [] => None,
        [only] => Some(*only),
        [first, second, ..] => {
            let (a, b) = (log_weights[*first], log_weights[*second]);
            let gap = a - b;
            (gap > factor.ln() || (a.is_infinite() && b.is_finite())).then_some(*first)
        }
    }
}

fn scheme_for(n: usize, folds: usize) -> Option<(CvScheme, bool)> {
    if n >= folds {
        Some((CvScheme::KFold(folds), false))
    } else if n >= 3 {
        Some((CvScheme::Loo, true))
    } else {
        None
    }
}

/// Stability selection with performance-weighted aggregation (final), its
/// elastic-net median ancestor (`a`), and cross-validated peLASSO (`b`).
pub fn run1_forecast(
    info: &Info,
    variant: Variant,
    params: &Run1Params,
) -> Result<Forecast, MethodError> {
    let name = format!("run1.{variant}");
    let x = info.x_train.view();
    let y = info.y_train.view();
    let k = info.forecaster_count();
    let (alpha, folds, se) = match variant {
        Variant::Final => (params.alpha, params.folds, params.se_final),
        Variant::A => (params.alpha, params.folds, params.se_plain),
        Variant::B => (1.0, params.folds_lasso, params.se_plain),
    };
    let Some((scheme, downgraded)) = scheme_for(y.len(), folds) else {
        return Ok(Forecast::new(
            simple(info),
            fallback_label(&name, "short-window"),
        ));
    };
    let label = if downgraded {
        format!("{name}[loo]")
    } else {
        name.clone()
    };
    let spec = PenalizedSpec::elastic_net(alpha, 0.0);
    let grid = &info.lambda_grid;
    let curve = cv_curve(x, y, grid, &scheme, &spec, &linear_predictor)?;
    let chosen = pick_lambda(&curve, LambdaRule::WithinSe(se))?[0];

    let active = match variant {
        Variant::Final => {
            let window = stability_neighborhood(grid, chosen, params.delta);
            let last = *window
                .iter()
                .max()
                .expect("neighborhood contains its center");
            let path = fit_path(x, y, &grid[..=last], &spec, None)?;
            let fits: Vec<&Fit> = window.iter().map(|&j| &path[j]).collect();
            let pi = stability_frequencies(&fits, k);
            let selected: Vec<usize> = (0..k).filter(|&j| pi[j] > params.threshold).collect();
            if selected.is_empty() {
                return Ok(Forecast::new(
                    simple(info),
                    fallback_label(&label, "empty-selection"),
                ));
            }
            return composite(info, &selected, &pi, params, label);
        }
        Variant::A | Variant::B => {
            let path = fit_path(x, y, &grid[..=chosen], &spec, None)?;
            path[chosen].active()
        }
    };
    if active.is_empty() {
        return Ok(Forecast::new(
            simple(info),
            fallback_label(&label, "empty-selection"),
        ));
    }
    let value = match variant {
        Variant::A => {
            let values: Vec<f64> = active.iter().map(|&j| info.x_new[j]).collect();
            median(&values)?
        }
        _ => mean_over(info.x_new.view(), &active),
    };
    Ok(Forecast::new(value, label))
}

fn simple(info: &Info) -> f64 {
    info.x_new.mean().expect("at least one forecaster")
}

fn composite(
    info: &Info,
    selected: &[usize],
    pi: &[f64],
    params: &Run1Params,
    label: String,
) -> Result<Forecast, MethodError> {
    let (xr, yr) = {
        let n = info.train_len();
        let m = params.recent_rows.min(n).max(1);
        let start = n - m;
        (
            info.x_train.slice(ndarray::s![start.., ..]),
            info.y_train.slice(ndarray::s![start..]),
        )
    };
    let rmse: Vec<f64> = selected
        .iter()
        .map(|&j| column_rmse(xr.column(j), yr))
        .collect();
    let pis: Vec<f64> = selected.iter().map(|&j| pi[j]).collect();
    let logw = composite_log_weights(&pis, &rmse, params.power);
    if let Some(top) = dominant(&logw, params.dominance) {
        return Ok(Forecast::new(info.x_new[selected[top]], label));
    }
    let peak = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = if peak.is_infinite() {
        logw.iter()
            .map(|w| if *w == peak { 1.0 } else { 0.0 })
            .collect()
    } else {
        logw.iter().map(|w| (w - peak).exp()).collect()
    };
    let values: Vec<f64> = selected.iter().map(|&j| info.x_new[j]).collect();
    Ok(Forecast::new(
        weighted_quantile(&values, &weights, params.quantile)?,
        label,
    ))
}

fn column_rmse(col: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> f64 {
    let sse: f64 = col.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
    (sse / y.len() as f64).sqrt()
}

#[derive(Clone, Debug)]
pub struct Run1 {
    pub name: String,
    pub variant: Variant,
    pub params: Run1Params,
}

impl Run1 {
    pub fn new(variant: Variant) -> Self {
        Run1 {
            name: format!("run1.{variant}"),
            variant,
            params: Run1Params::default(),
        }
    }
}

impl ForecastMethod for Run1 {
    fn name(&self) -> &str {
        &self.name
    }

    fn forecast(&self, info: &Info) -> Result<Forecast, MethodError> {
        run1_forecast(info, self.variant, &self.params)
    }
}
