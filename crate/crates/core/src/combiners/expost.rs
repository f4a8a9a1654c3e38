use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;

use super::pelasso::{stage2_forecast, Stage2};
use super::MethodError;
use crate::grid::LambdaGrid;
use crate::panel::{build_info, Panel};
use crate::shrinkage::{fit_path, PenalizedSpec};

/// How the hindsight penalty is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpostMode {
    /// One penalty minimizing RMSE over the union of all windows.
    Fixed,
    /// A separate penalty for each window.
    PerWindow,
}

/// Hindsight-optimal peLASSO forecasts over one evaluation window.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpostWindow {
    /// 1-based origins, ascending.
    pub origins: Vec<usize>,
    pub forecasts: Vec<f64>,
    pub actuals: Vec<f64>,
    pub lambda: f64,
    pub rmse: f64,
}

fn rmse_at(table: &HashMap<usize, Vec<f64>>, panel: &Panel, origins: &[usize], li: usize) -> f64 {
    let sse: f64 = origins
        .iter()
        .map(|t| (panel.actuals()[t - 1] - table[t][li]).powi(2))
        .sum();
    (sse / origins.len() as f64).sqrt()
}

fn best_index(
    table: &HashMap<usize, Vec<f64>>,
    panel: &Panel,
    origins: &[usize],
    levels: usize,
) -> usize {
    let mut best = (0, f64::INFINITY);
    for li in 0..levels {
        let r = rmse_at(table, panel, origins, li);
        if r < best.1 {
            best = (li, r);
        }
    }
    best.0
}

/// peLASSO evaluated with the first-stage penalty chosen with hindsight.
///
/// Every origin in every window is forecast at every grid level (rolling
/// window `w`); the level with the lowest realized RMSE is then picked either
/// once for all windows or separately per window. Ties go to the larger
/// penalty. Empty selections fall back to the simple average.
pub fn expost_pelasso(
    panel: &Panel,
    windows: &[Vec<usize>],
    stage2: Stage2,
    mode: ExpostMode,
    grid: &LambdaGrid,
    w: usize,
) -> Result<Vec<ExpostWindow>, MethodError> {
    if windows.is_empty() || windows.iter().any(|o| o.is_empty()) {
        return Err(MethodError::Invalid(
            "ex post evaluation needs non-empty origin sets".into(),
        ));
    }
    let union: BTreeSet<usize> = windows.iter().flatten().copied().collect();
    let union: Vec<usize> = union.into_iter().collect();
    let rows: Result<Vec<(usize, Vec<f64>)>, MethodError> = union
        .par_iter()
        .map(|&t| {
            let info = build_info(panel, t, w, grid)?;
            let fits = fit_path(
                info.x_train.view(),
                info.y_train.view(),
                grid,
                &PenalizedSpec::lasso(0.0),
                None,
            )?;
            let mut cache: HashMap<Vec<usize>, f64> = HashMap::new();
            let mut out = Vec::with_capacity(fits.len());
            for fit in &fits {
                let active = fit.active();
                let value = match cache.get(&active) {
                    Some(v) => *v,
                    None => {
                        let v = if active.is_empty() {
                            info.x_new.mean().expect("at least one forecaster")
                        } else {
                            stage2_forecast(
                                info.x_train.view(),
                                info.y_train.view(),
                                &active,
                                info.x_new.view(),
                                stage2,
                            )?
                        };
                        cache.insert(active, v);
                        v
                    }
                };
                out.push(value);
            }
            Ok((t, out))
        })
        .collect();
    let table: HashMap<usize, Vec<f64>> = rows?.into_iter().collect();
    let fixed = best_index(&table, panel, &union, grid.len());
    windows
        .iter()
        .map(|origins| {
            let mut origins = origins.clone();
            origins.sort_unstable();
            origins.dedup();
            let li = match mode {
                ExpostMode::Fixed => fixed,
                ExpostMode::PerWindow => best_index(&table, panel, &origins, grid.len()),
            };
            Ok(ExpostWindow {
                forecasts: origins.iter().map(|t| table[t][li]).collect(),
                actuals: origins.iter().map(|t| panel.actuals()[t - 1]).collect(),
                rmse: rmse_at(&table, panel, &origins, li),
                lambda: grid[li],
                origins,
            })
        })
        .collect()
}
