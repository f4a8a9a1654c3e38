use ndarray::{s, ArrayView1, ArrayView2};

use super::quantile::weighted_quantile;
use super::{fallback_label, Forecast, ForecastMethod, MethodError, Variant};
use crate::panel::Info;

/// Constants of the ranking family.
#[derive(Clone, Debug, PartialEq)]
pub struct Run2Params {
    /// Exponential decay of the temporal weights across the window.
    pub decay: f64,
    /// Inverse-MAE exponent of the LOO weighted average.
    pub mae_power: f64,
    pub n_min: usize,
    pub n_max: usize,
    /// Sub-window lengths tried besides the full window (final variant).
    pub sub_windows: Vec<usize>,
    /// Bias-correction strength (final variant).
    pub gamma: f64,
    /// Quantile level of the percentile aggregation.
    pub quantile: f64,
    /// Coefficient on `ln(N + 1)` in the `b` criterion.
    pub size_penalty: f64,
}

impl Default for Run2Params {
    fn default() -> Self {
        Run2Params {
            decay: 6.0,
            mae_power: 3.0,
            n_min: 3,
            n_max: 18,
            sub_windows: (4..=19).collect(),
            gamma: 0.80,
            quantile: 0.50,
            size_penalty: 0.01,
        }
    }
}

/// Normalized weights `exp(-decay (n - s) / (n - 1))` for `s = 1..=n`.
pub fn temporal_weights(n: usize, decay: f64) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let raw: Vec<f64> = (1..=n)
        .map(|s| (-decay * (n - s) as f64 / (n - 1) as f64).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// `sum_s omega_s |y_s - x_ks|` for each column, over the rows in `rows`
/// with `omega` renormalized to them.
pub fn weighted_mae(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    omega: &[f64],
    rows: &[usize],
) -> Vec<f64> {
    let total: f64 = rows.iter().map(|&s| omega[s]).sum();
    (0..x.ncols())
        .map(|k| {
            rows.iter()
                .map(|&s| omega[s] * (y[s] - x[[s, k]]).abs())
                .sum::<f64>()
                / total
        })
        .collect()
}

fn ascending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

/// Weights proportional to `mae^-power`; zero-MAE entries share all weight.
fn inverse_power_weights(mae: &[f64], power: f64) -> Vec<f64> {
    if mae.contains(&0.0) {
        return mae
            .iter()
            .map(|m| if *m == 0.0 { 1.0 } else { 0.0 })
            .collect();
    }
    let floor = mae.iter().copied().fold(f64::INFINITY, f64::min);
    mae.iter().map(|m| (floor / m).powf(power)).collect()
}

fn weighted_mean(values: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total
}

/// Leave-one-out forecasts for every candidate subset size on one window.
#[derive(Clone, Debug, PartialEq)]
pub struct LooProfile {
    /// Candidate sizes, ascending.
    pub sizes: Vec<usize>,
    /// `weighted[j][i]`: inverse-MAE weighted LOO forecast of row `i` with
    /// `sizes[j]` forecasters.
    pub weighted: Vec<Vec<f64>>,
    /// `percentile[j][i]`: percentile LOO forecast of row `i`.
    pub percentile: Vec<Vec<f64>>,
    /// RMSE of the weighted LOO forecasts per size.
    pub rmse: Vec<f64>,
}

impl LooProfile {
    /// Position in `sizes` minimizing `rmse + penalty * ln(N + 1)`; ties to
    /// the smaller size.
    pub fn best(&self, penalty: f64) -> usize {
        let mut best = (0, f64::INFINITY);
        for (j, (&n, r)) in self.sizes.iter().zip(&self.rmse).enumerate() {
            let crit = r + penalty * ((n + 1) as f64).ln();
            if crit < best.1 {
                best = (j, crit);
            }
        }
        best.0
    }
}

/// Leave-one-out profile of a window: each left-out row is predicted by the
/// top-`N` forecasters ranked by plain RMSE on the remaining rows, combined
/// either by inverse-MAE weights (temporal weights renormalized to the
/// remaining rows) or by their `quantile`.
pub fn loo_profile(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    params: &Run2Params,
) -> LooProfile {
    let (n, k) = x.dim();
    let lo = params.n_min.min(k).max(1);
    let hi = params.n_max.min(k).max(lo);
    let sizes: Vec<usize> = (lo..=hi).collect();
    let omega = temporal_weights(n, params.decay);
    let mut weighted = vec![vec![0.0; n]; sizes.len()];
    let mut percentile = vec![vec![0.0; n]; sizes.len()];
    for i in 0..n {
        let rest: Vec<usize> = (0..n).filter(|&s| s != i).collect();
        let sse: Vec<f64> = (0..k)
            .map(|j| rest.iter().map(|&s| (y[s] - x[[s, j]]).powi(2)).sum())
            .collect();
        let order = ascending(&sse);
        let mae = weighted_mae(x, y, &omega, &rest);
        for (j, &size) in sizes.iter().enumerate() {
            let top = &order[..size];
            let values: Vec<f64> = top.iter().map(|&c| x[[i, c]]).collect();
            let top_mae: Vec<f64> = top.iter().map(|&c| mae[c]).collect();
            weighted[j][i] =
                weighted_mean(&values, &inverse_power_weights(&top_mae, params.mae_power));
            percentile[j][i] = weighted_quantile(&values, &vec![1.0; size], params.quantile)
                .expect("non-empty finite values");
        }
    }
    let rmse = weighted
        .iter()
        .map(|f| (f.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64).sqrt())
        .collect();
    LooProfile {
        sizes,
        weighted,
        percentile,
        rmse,
    }
}

/// The subset size and window a Run 2 forecast settled on.
#[derive(Clone, Debug, PartialEq)]
pub struct Run2Choice {
    pub size: usize,
    /// Most recent training rows used.
    pub window: usize,
    pub loo_rmse: f64,
    /// Percentile LOO forecast minus realization on the newest window row.
    pub bias_error: f64,
    /// Forecast before bias correction.
    pub base: f64,
}

fn full_mae_order(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    decay: f64,
) -> (Vec<usize>, Vec<f64>) {
    let n = y.len();
    let omega = temporal_weights(n, decay);
    let rows: Vec<usize> = (0..n).collect();
    let mae = weighted_mae(x, y, &omega, &rows);
    (ascending(&mae), mae)
}

/// Ranking with adaptive window and bias correction (final), without the
/// correction (`a`), and with a fixed window, size-penalized criterion and
/// weighted average (`b`).
pub fn run2_forecast(
    info: &Info,
    variant: Variant,
    params: &Run2Params,
) -> Result<Forecast, MethodError> {
    run2_choice(info, variant, params).map(|(f, _)| f)
}

pub fn run2_choice(
    info: &Info,
    variant: Variant,
    params: &Run2Params,
) -> Result<(Forecast, Option<Run2Choice>), MethodError> {
    let name = format!("run2.{variant}");
    let n = info.train_len();
    if n < 3 {
        let value = info.x_new.mean().expect("at least one forecaster");
        return Ok((
            Forecast::new(value, fallback_label(&name, "short-window")),
            None,
        ));
    }
    let penalty = if variant == Variant::B {
        params.size_penalty
    } else {
        0.0
    };
    let mut lengths = vec![n];
    if variant != Variant::B {
        lengths.extend(
            params
                .sub_windows
                .iter()
                .copied()
                .filter(|&w| w >= 3 && w < n),
        );
    }
    let mut best: Option<(usize, LooProfile, usize, f64)> = None;
    for len in lengths {
        let x = info.x_train.slice(s![n - len.., ..]);
        let y = info.y_train.slice(s![n - len..]);
        let profile = loo_profile(x, y, params);
        let j = profile.best(penalty);
        let crit = profile.rmse[j];
        if best.as_ref().is_none_or(|b| crit < b.3) {
            best = Some((len, profile, j, crit));
        }
    }
    let (len, profile, j, crit) = best.expect("at least the full window");
    let size = profile.sizes[j];
    let x = info.x_train.slice(s![n - len.., ..]);
    let y = info.y_train.slice(s![n - len..]);
    let (order, mae) = full_mae_order(x, y, params.decay);
    let top = &order[..size];
    let values: Vec<f64> = top.iter().map(|&c| info.x_new[c]).collect();
    let base = if variant == Variant::B {
        let top_mae: Vec<f64> = top.iter().map(|&c| mae[c]).collect();
        weighted_mean(&values, &inverse_power_weights(&top_mae, params.mae_power))
    } else {
        weighted_quantile(&values, &vec![1.0; size], params.quantile)?
    };
    let bias_error = profile.percentile[j][len - 1] - y[len - 1];
    let value = if variant == Variant::Final {
        base - params.gamma * bias_error
    } else {
        base
    };
    let choice = Run2Choice {
        size,
        window: len,
        loo_rmse: crit,
        bias_error,
        base,
    };
    Ok((Forecast::new(value, name), Some(choice)))
}

#[derive(Clone, Debug)]
pub struct Run2 {
    pub name: String,
    pub variant: Variant,
    pub params: Run2Params,
}

impl Run2 {
    pub fn new(variant: Variant) -> Self {
        Run2 {
            name: format!("run2.{variant}"),
            variant,
            params: Run2Params::default(),
        }
    }
}

impl ForecastMethod for Run2 {
    fn name(&self) -> &str {
        &self.name
    }

    fn forecast(&self, info: &Info) -> Result<Forecast, MethodError> {
        run2_forecast(info, self.variant, &self.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_decay_is_uniform() {
        for w in temporal_weights(7, 0.0) {
            assert!((w - 1.0 / 7.0).abs() < 1e-15);
        }
    }

    #[test]
    fn weights_sum_to_one_and_increase() {
        let w = temporal_weights(20, 6.0);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.windows(2).all(|p| p[0] < p[1]));
        assert!((w[19] / w[0] - 6f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn zero_mae_takes_all_weight() {
        assert_eq!(
            inverse_power_weights(&[0.5, 0.0, 1.0], 3.0),
            vec![0.0, 1.0, 0.0]
        );
        let w = inverse_power_weights(&[1.0, 2.0], 3.0);
        assert_eq!(w, vec![1.0, 0.125]);
    }
}
