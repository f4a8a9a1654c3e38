use ndarray::{Array1, ArrayView1};

use super::pelasso::egalitarian_forecast;
use super::{fallback_label, mean_over, Forecast, ForecastMethod, MethodError, Variant};
use crate::panel::Info;
use crate::shrinkage::{
    cv_curve, cv_curves, fit_path, linear_predictor, pick_lambda, CvCurve, CvScheme, Fit,
    ForwardCv, LambdaRule, PenalizedSpec, Predictor,
};

type BoxedRule<'a> = Box<dyn Fn(&Fit, ArrayView1<'_, f64>) -> f64 + Sync + 'a>;

/// Aggregation of the forecasters an adaptive-LASSO fit selects.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AggregationRule {
    /// Equal-weight mean of the selected forecasters.
    Simple,
    /// Blend of the selected mean and a pilot-weighted mean.
    Blended,
}

/// Constants of the adaptive-LASSO family.
#[derive(Clone, Debug, PartialEq)]
pub struct Run3Params {
    pub pilot_alpha: f64,
    /// Offset inside the adaptive penalty factors.
    pub epsilon: f64,
    /// Fold decay of the forward CV.
    pub gamma: f64,
    /// Weight per step ahead in the forward CV.
    pub horizon_weights: Vec<f64>,
    /// Smallest training prefix in the forward CV.
    pub min_train: usize,
    /// Relative band for model averaging; `None` uses the minimizer alone.
    pub averaging_band: Option<f64>,
    /// Aggregation rules competing in the CV.
    pub rules: Vec<AggregationRule>,
    /// Weight on the plain mean inside the blended rule.
    pub blended_mean_share: f64,
    /// `(adaptive, egalitarian)` weights of the final blend; `None` skips
    /// the egalitarian component.
    pub blend: Option<(f64, f64)>,
    pub egalitarian_alpha: f64,
}

impl Run3Params {
    pub fn for_variant(variant: Variant) -> Self {
        let base = Run3Params {
            pilot_alpha: 0.1,
            epsilon: 5e-3,
            gamma: 0.75,
            horizon_weights: vec![0.05, 0.95],
            min_train: 5,
            averaging_band: Some(0.01),
            rules: vec![AggregationRule::Simple, AggregationRule::Blended],
            blended_mean_share: 0.7,
            blend: Some((0.70, 0.30)),
            egalitarian_alpha: 0.5,
        };
        match variant {
            Variant::Final => base,
            Variant::A => Run3Params {
                horizon_weights: vec![1.0],
                averaging_band: None,
                rules: vec![AggregationRule::Simple],
                blend: None,
                ..base
            },
            Variant::B => Run3Params {
                gamma: 0.80,
                epsilon: 1e-3,
                rules: vec![AggregationRule::Simple],
                blend: None,
                ..base
            },
        }
    }
}

/// `(|b_k| + eps)^-1` divided by its cross-sectional mean.
pub fn adaptive_penalty_factors(beta: ArrayView1<'_, f64>, epsilon: f64) -> Vec<f64> {
    let raw: Vec<f64> = beta.iter().map(|b| 1.0 / (b.abs() + epsilon)).collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    raw.into_iter().map(|v| v / mean).collect()
}

struct Rules {
    /// Pilot weights `max(beta, 0)`.
    pilot: Array1<f64>,
    mean_share: f64,
}

impl Rules {
    fn apply(&self, rule: AggregationRule, fit: &Fit, row: ArrayView1<'_, f64>) -> f64 {
        let mut active = fit.active();
        if active.is_empty() {
            active = (0..row.len()).collect();
        }
        let mean = mean_over(row, &active);
        match rule {
            AggregationRule::Simple => mean,
            AggregationRule::Blended => {
                let total: f64 = active.iter().map(|&k| self.pilot[k]).sum();
                let weighted = if total > 0.0 {
                    active.iter().map(|&k| self.pilot[k] * row[k]).sum::<f64>() / total
                } else {
                    mean
                };
                self.mean_share * mean + (1.0 - self.mean_share) * weighted
            }
        }
    }
}

struct Pilot {
    factors: Vec<f64>,
    rules: Rules,
}

fn pilot(info: &Info, params: &Run3Params) -> Result<Pilot, MethodError> {
    let x = info.x_train.view();
    let y = info.y_train.view();
    let spec = PenalizedSpec::elastic_net(params.pilot_alpha, 0.0);
    let grid = &info.lambda_grid;
    let curve = cv_curve(x, y, grid, &CvScheme::Loo, &spec, &linear_predictor)?;
    let chosen = pick_lambda(&curve, LambdaRule::Min)?[0];
    let path = fit_path(x, y, &grid[..=chosen], &spec, None)?;
    let beta = &path[chosen].beta;
    Ok(Pilot {
        factors: adaptive_penalty_factors(beta.view(), params.epsilon),
        rules: Rules {
            pilot: beta.mapv(|b| b.max(0.0)),
            mean_share: params.blended_mean_share,
        },
    })
}

fn forward_scheme(params: &Run3Params) -> CvScheme {
    CvScheme::Forward(ForwardCv {
        horizon_weights: params.horizon_weights.clone(),
        fold_decay: params.gamma,
        min_train: params.min_train,
    })
}

/// Forward-CV curves of the adaptive LASSO on the full history, one per
/// aggregation rule in `params.rules`.
pub fn run3_criterion(info: &Info, params: &Run3Params) -> Result<Vec<CvCurve>, MethodError> {
    let p = pilot(info, params)?;
    criterion_with(info, params, &p)
}

fn criterion_with(
    info: &Info,
    params: &Run3Params,
    p: &Pilot,
) -> Result<Vec<CvCurve>, MethodError> {
    let spec = PenalizedSpec::lasso(0.0).with_penalty_factors(p.factors.clone());
    let closures: Vec<BoxedRule<'_>> = params
        .rules
        .iter()
        .map(|&rule| {
            let rules = &p.rules;
            Box::new(move |fit: &Fit, row: ArrayView1<'_, f64>| rules.apply(rule, fit, row))
                as BoxedRule<'_>
        })
        .collect();
    let predictors: Vec<Predictor<'_>> = closures.iter().map(|c| c.as_ref()).collect();
    Ok(cv_curves(
        info.x_history.view(),
        info.y_history.view(),
        &info.lambda_grid,
        &forward_scheme(params),
        &spec,
        &predictors,
    )?)
}

/// Adaptive LASSO with forward CV and model averaging, optionally blended
/// with an egalitarian elastic net (final); single-horizon, no averaging, no
/// blend (`a`); multi-horizon with averaging, no blend (`b`).
pub fn run3_forecast(
    info: &Info,
    variant: Variant,
    params: &Run3Params,
) -> Result<Forecast, MethodError> {
    let name = format!("run3.{variant}");
    let simple = || info.x_new.mean().expect("at least one forecaster");
    let history = info.y_history.len();
    if info.train_len() < 3 || history < params.min_train + params.horizon_weights.len() {
        return Ok(Forecast::new(
            simple(),
            fallback_label(&name, "short-history"),
        ));
    }
    if params.rules.is_empty() {
        return Err(MethodError::Invalid(
            "at least one aggregation rule is required".into(),
        ));
    }
    let p = pilot(info, params)?;
    let curves = criterion_with(info, params, &p)?;
    let mut pick = 0;
    let mut floor = f64::INFINITY;
    for (i, curve) in curves.iter().enumerate() {
        let m = curve.argmin().map_or(f64::INFINITY, |j| curve.scores[j]);
        if m < floor {
            floor = m;
            pick = i;
        }
    }
    let (rule, curve) = (params.rules[pick], &curves[pick]);
    let rule_set = match params.averaging_band {
        Some(band) => LambdaRule::WithinPct(band),
        None => LambdaRule::Min,
    };
    let chosen = pick_lambda(curve, rule_set)?;
    let last = *chosen
        .iter()
        .max()
        .expect("pick_lambda returns at least one level");
    let spec = PenalizedSpec::lasso(0.0).with_penalty_factors(p.factors.clone());
    let path = fit_path(
        info.x_history.view(),
        info.y_history.view(),
        &info.lambda_grid[..=last],
        &spec,
        None,
    )?;
    let forecasts: Vec<f64> = chosen
        .iter()
        .map(|&j| p.rules.apply(rule, &path[j], info.x_new.view()))
        .collect();
    let scores: Vec<f64> = chosen.iter().map(|&j| curve.scores[j]).collect();
    let pe = if scores.contains(&0.0) {
        let hits: Vec<f64> = forecasts
            .iter()
            .zip(&scores)
            .filter(|(_, s)| **s == 0.0)
            .map(|(f, _)| *f)
            .collect();
        hits.iter().sum::<f64>() / hits.len() as f64
    } else {
        let weights: Vec<f64> = scores.iter().map(|s| 1.0 / s.sqrt()).collect();
        let total: f64 = weights.iter().sum();
        forecasts
            .iter()
            .zip(&weights)
            .map(|(f, w)| f * w)
            .sum::<f64>()
            / total
    };
    let Some((w_pe, w_een)) = params.blend else {
        return Ok(Forecast::new(pe, name));
    };
    let een = egalitarian_elastic_net(info, params)?;
    Ok(Forecast::new(w_pe * pe + w_een * een, name))
}

fn egalitarian_elastic_net(info: &Info, params: &Run3Params) -> Result<f64, MethodError> {
    let x = info.x_train.view();
    let spec = PenalizedSpec::elastic_net(params.egalitarian_alpha, 0.0);
    let target: Array1<f64> = x
        .rows()
        .into_iter()
        .zip(&info.y_train)
        .map(|(row, y)| y - row.mean().expect("at least one forecaster"))
        .collect();
    let curve = cv_curve(
        x,
        target.view(),
        &info.lambda_grid,
        &CvScheme::Loo,
        &spec,
        &linear_predictor,
    )?;
    let chosen = pick_lambda(&curve, LambdaRule::Min)?[0];
    let all: Vec<usize> = (0..info.forecaster_count()).collect();
    egalitarian_forecast(
        x,
        info.y_train.view(),
        &all,
        info.x_new.view(),
        &spec.with_lambda(info.lambda_grid[chosen]),
    )
}

#[derive(Clone, Debug)]
pub struct Run3 {
    pub name: String,
    pub variant: Variant,
    pub params: Run3Params,
}

impl Run3 {
    pub fn new(variant: Variant) -> Self {
        Run3 {
            name: format!("run3.{variant}"),
            variant,
            params: Run3Params::for_variant(variant),
        }
    }
}

impl ForecastMethod for Run3 {
    fn name(&self) -> &str {
        &self.name
    }

    fn forecast(&self, info: &Info) -> Result<Forecast, MethodError> {
        run3_forecast(info, self.variant, &self.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn huge_epsilon_gives_unit_factors() {
        let f = adaptive_penalty_factors(array![0.0, 0.3, -2.0].view(), 1e12);
        for v in f {
            assert!((v - 1.0).abs() < 1e-11);
        }
    }

    #[test]
    fn factors_average_to_one() {
        let f = adaptive_penalty_factors(array![0.0, 0.3, -2.0, 0.01].view(), 5e-3);
        assert!((f.iter().sum::<f64>() / 4.0 - 1.0).abs() < 1e-12);
        assert!(f[0] > f[3] && f[3] > f[1] && f[1] > f[2]);
    }

    #[test]
    fn variant_defaults() {
        let a = Run3Params::for_variant(Variant::A);
        assert_eq!(a.horizon_weights, vec![1.0]);
        assert!(a.blend.is_none() && a.averaging_band.is_none());
        let b = Run3Params::for_variant(Variant::B);
        assert_eq!((b.gamma, b.epsilon), (0.80, 1e-3));
        let f = Run3Params::for_variant(Variant::Final);
        let (p, e) = f.blend.unwrap();
        assert_eq!(p + e, 1.0);
    }
}
