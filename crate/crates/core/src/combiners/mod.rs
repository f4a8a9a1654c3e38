//! Forecast-combination rules. Every rule maps an [`Info`] to one point
//! forecast plus a label; labels carry a `[...]` suffix whenever a fallback
//! or downgrade path fired.

mod basic;
mod expost;
mod pelasso;
mod quantile;
mod registry;
mod run1;
mod run2;
mod run3;

use std::fmt;

use ndarray::ArrayView1;
use thiserror::Error;

use crate::panel::{Info, PanelError};
use crate::shrinkage::{CvError, SolverError};

pub use basic::{
    best_individual, best_subset_average, simple_average, BestIndividual, BestSubsetAverage,
    SimpleAverage, SubsetChoice,
};
pub use expost::{expost_pelasso, ExpostMode, ExpostWindow};
pub use pelasso::{egalitarian_forecast, pelasso_two_step, Pelasso, Stage2};
pub use quantile::{median, weighted_quantile};
pub use registry::{display_name, lookup, method_names, Registered};
pub use run1::{
    composite_log_weights, dominant, run1_forecast, stability_frequencies, stability_neighborhood,
    Run1, Run1Params,
};
pub use run2::{
    loo_profile, run2_choice, run2_forecast, temporal_weights, weighted_mae, LooProfile, Run2,
    Run2Choice, Run2Params,
};
pub use run3::{
    adaptive_penalty_factors, run3_criterion, run3_forecast, AggregationRule, Run3, Run3Params,
};

#[derive(Debug, Error)]
pub enum MethodError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Cv(#[from] CvError),
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error("{0}")]
    Invalid(String),
}

/// A combined point forecast and the label of the path that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Forecast {
    pub value: f64,
    pub label: String,
}

impl Forecast {
    pub fn new(value: f64, label: impl Into<String>) -> Self {
        Forecast {
            value,
            label: label.into(),
        }
    }
}

/// A named combination rule. Implementations must be deterministic and read
/// nothing but the information set.
pub trait ForecastMethod: Send + Sync {
    fn name(&self) -> &str;
    fn forecast(&self, info: &Info) -> Result<Forecast, MethodError>;
}

/// Variant selector shared by the three discovered method families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Final,
    A,
    B,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Final => "final",
            Variant::A => "a",
            Variant::B => "b",
        })
    }
}

pub(crate) fn fallback_label(name: &str, reason: &str) -> String {
    format!("{name}[fallback:{reason}]")
}

pub(crate) fn mean_over(row: ArrayView1<'_, f64>, indices: &[usize]) -> f64 {
    indices.iter().map(|&k| row[k]).sum::<f64>() / indices.len() as f64
}
