use ndarray::{Array1, ArrayView1, ArrayView2, Axis};

use super::{fallback_label, mean_over, Forecast, ForecastMethod, MethodError};
use crate::panel::Info;
use crate::shrinkage::{fit_penalized, PenalizedSpec};

/// Second stage of the two-step procedure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Stage2 {
    /// Equal weights over the selected forecasters.
    Avg,
    /// Ridge toward equal weights at the given penalty.
    ERidge(f64),
    /// LASSO toward equal weights at the given penalty.
    ELasso(f64),
}

impl Stage2 {
    pub fn tag(&self) -> &'static str {
        match self {
            Stage2::Avg => "avg",
            Stage2::ERidge(_) => "eridge",
            Stage2::ELasso(_) => "elasso",
        }
    }

    fn validate(&self) -> Result<(), MethodError> {
        match self {
            Stage2::ERidge(l) | Stage2::ELasso(l) if !(l.is_finite() && *l >= 0.0) => Err(
                MethodError::Invalid(format!("stage-two penalty {l} must be finite and >= 0")),
            ),
            _ => Ok(()),
        }
    }
}

/// Fit toward equal weights over `active`: regress `y` minus the average of
/// the active forecasts on those forecasts (with an intercept), then forecast
/// `b0 + sum_k (beta_k + 1/|A|) x_new_k`.
pub fn egalitarian_forecast(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    active: &[usize],
    x_new: ArrayView1<'_, f64>,
    spec: &PenalizedSpec,
) -> Result<f64, MethodError> {
    let xa = x.select(Axis(1), active);
    let target: Array1<f64> = xa
        .rows()
        .into_iter()
        .zip(y)
        .map(|(row, yv)| yv - row.mean().expect("non-empty active set"))
        .collect();
    let fit = fit_penalized(xa.view(), target.view(), spec, None)?;
    let share = 1.0 / active.len() as f64;
    Ok(fit.intercept
        + active
            .iter()
            .zip(&fit.beta)
            .map(|(&k, b)| (b + share) * x_new[k])
            .sum::<f64>())
}

pub(crate) fn stage2_forecast(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    active: &[usize],
    x_new: ArrayView1<'_, f64>,
    stage2: Stage2,
) -> Result<f64, MethodError> {
    match stage2 {
        Stage2::Avg => Ok(mean_over(x_new, active)),
        Stage2::ERidge(l) => egalitarian_forecast(x, y, active, x_new, &PenalizedSpec::ridge(l)),
        Stage2::ELasso(l) => egalitarian_forecast(x, y, active, x_new, &PenalizedSpec::lasso(l)),
    }
}

/// Two-step partially egalitarian LASSO on the training window: LASSO at
/// `lambda1` selects forecasters, `stage2` combines them. An empty selection
/// falls back to the simple average of all forecasters.
pub fn pelasso_two_step(
    info: &Info,
    lambda1: f64,
    stage2: Stage2,
) -> Result<Forecast, MethodError> {
    pelasso_named(info, lambda1, stage2, &format!("pelasso({})", stage2.tag()))
}

fn pelasso_named(
    info: &Info,
    lambda1: f64,
    stage2: Stage2,
    name: &str,
) -> Result<Forecast, MethodError> {
    stage2.validate()?;
    let fit = fit_penalized(
        info.x_train.view(),
        info.y_train.view(),
        &PenalizedSpec::lasso(lambda1),
        None,
    )?;
    let active = fit.active();
    if active.is_empty() {
        return Ok(Forecast::new(
            info.x_new.mean().expect("at least one forecaster"),
            fallback_label(name, "empty-selection"),
        ));
    }
    let value = stage2_forecast(
        info.x_train.view(),
        info.y_train.view(),
        &active,
        info.x_new.view(),
        stage2,
    )?;
    Ok(Forecast::new(value, name))
}

/// peLASSO with a frozen first-stage penalty.
#[derive(Clone, Debug)]
pub struct Pelasso {
    pub name: String,
    pub lambda1: f64,
    pub stage2: Stage2,
}

impl ForecastMethod for Pelasso {
    fn name(&self) -> &str {
        &self.name
    }

    fn forecast(&self, info: &Info) -> Result<Forecast, MethodError> {
        pelasso_named(info, self.lambda1, self.stage2, &self.name)
    }
}
