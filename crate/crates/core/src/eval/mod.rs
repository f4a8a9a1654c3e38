//! Rolling-origin evaluation, sample scoring and reports.

mod dm;
mod report;

use std::collections::BTreeSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::combiners::{ForecastMethod, MethodError};
use crate::grid::LambdaGrid;
use crate::panel::{build_info, Panel, PanelError};

pub use dm::{default_basis, dm_test_ewc, DmResult};
pub use report::{
    make_report, parse_report_tsv, render_report, report_rows, MethodRun, ReportLayout, ReportRow,
};

/// Name of the benchmark every result is measured against.
pub const BENCHMARK: &str = "simple_average";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid evaluation setup: {0}")]
    Config(String),
    #[error("method failed at origin t={t} ({date}): {source}")]
    Method {
        t: usize,
        date: String,
        #[source]
        source: MethodError,
    },
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error("sample `{0}` contains no scored origins")]
    EmptySample(String),
    #[error("report parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Origins to call and score.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub w: usize,
    pub first_call_t: usize,
    /// Last origin called; `None` means the last panel row.
    pub last_call_t: Option<usize>,
    pub score_from_t: usize,
    /// Dates excluded from scoring.
    pub scoring_mask: BTreeSet<String>,
    pub grid: LambdaGrid,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            w: 20,
            first_call_t: 5,
            last_call_t: None,
            score_from_t: 6,
            scoring_mask: BTreeSet::new(),
            grid: LambdaGrid::default(),
        }
    }
}

impl EvalConfig {
    /// Last origin for a panel of `rows` rows, after validation.
    pub fn resolve(&self, rows: usize) -> Result<usize, EvalError> {
        let last = self.last_call_t.unwrap_or(rows);
        if self.first_call_t < 2 {
            return Err(EvalError::Config(
                "origins start at t=2 at the earliest".into(),
            ));
        }
        if !(self.first_call_t <= self.score_from_t && self.score_from_t <= last) {
            return Err(EvalError::Config(format!(
                "need first_call_t <= score_from_t <= last_call_t, got {} <= {} <= {}",
                self.first_call_t, self.score_from_t, last
            )));
        }
        if last > rows {
            return Err(EvalError::Config(format!(
                "last origin {last} beyond the {rows}-row panel"
            )));
        }
        if self.w == 0 {
            return Err(EvalError::Config("window must be at least 1".into()));
        }
        Ok(last)
    }
}

/// One forecast origin.
#[derive(Clone, Debug, PartialEq)]
pub struct OriginRecord {
    pub t: usize,
    pub date: String,
    pub forecast: f64,
    pub actual: f64,
    /// `actual - forecast`.
    pub error: f64,
    /// Simple-average forecast at the same origin.
    pub benchmark: f64,
    pub label: String,
    pub scored: bool,
}

impl OriginRecord {
    pub fn benchmark_error(&self) -> f64 {
        self.actual - self.benchmark
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    pub method: String,
    pub records: Vec<OriginRecord>,
    pub rmse: f64,
    pub benchmark_rmse: f64,
    pub relative_rmse: f64,
    pub dm: Option<DmResult>,
}

fn rmse<'a>(errors: impl Iterator<Item = &'a f64>) -> f64 {
    let (mut sse, mut n) = (0.0, 0usize);
    for e in errors {
        sse += e * e;
        n += 1;
    }
    (sse / n as f64).sqrt()
}

impl EvalResult {
    /// Assembles a result from per-origin forecasts; scores every record
    /// marked `scored`.
    pub fn from_records(
        method: impl Into<String>,
        records: Vec<OriginRecord>,
    ) -> Result<Self, EvalError> {
        let method = method.into();
        let scored: Vec<&OriginRecord> = records.iter().filter(|r| r.scored).collect();
        if scored.is_empty() {
            return Err(EvalError::EmptySample(method));
        }
        let errors: Vec<f64> = scored.iter().map(|r| r.error).collect();
        let bench: Vec<f64> = scored.iter().map(|r| r.benchmark_error()).collect();
        let rmse_value = rmse(errors.iter());
        let benchmark_rmse = rmse(bench.iter());
        Ok(EvalResult {
            method,
            rmse: rmse_value,
            benchmark_rmse,
            relative_rmse: rmse_value / benchmark_rmse,
            records,
            dm: None,
        })
    }

    pub fn scored(&self) -> impl Iterator<Item = &OriginRecord> {
        self.records.iter().filter(|r| r.scored)
    }

    pub fn n_scored(&self) -> usize {
        self.scored().count()
    }

    /// Attaches a DM test against the benchmark over the scored origins.
    pub fn with_dm(mut self, basis: Option<usize>) -> Result<Self, EvalError> {
        let e: Vec<f64> = self.scored().map(|r| r.error).collect();
        let b: Vec<f64> = self.scored().map(|r| r.benchmark_error()).collect();
        self.dm = Some(dm_test_ewc(&e, &b, basis)?);
        Ok(self)
    }

    /// Distinct non-primary labels with their counts, e.g.
    /// `run1.final[loo] x4`.
    pub fn label_notes(&self) -> String {
        let mut counts: Vec<(String, usize)> = Vec::new();
        for r in self.scored() {
            if r.label == self.method {
                continue;
            }
            match counts.iter_mut().find(|(l, _)| *l == r.label) {
                Some((_, c)) => *c += 1,
                None => counts.push((r.label.clone(), 1)),
            }
        }
        counts
            .into_iter()
            .map(|(l, c)| format!("{l} x{c}"))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Builds the record for origin `t` given a forecast and its label.
pub fn origin_record(
    panel: &Panel,
    t: usize,
    forecast: f64,
    label: String,
    scored: bool,
) -> OriginRecord {
    let actual = panel.actuals()[t - 1];
    let forecasts = panel.forecasts();
    let row = forecasts.row(t - 1);
    OriginRecord {
        t,
        date: panel.dates()[t - 1].clone(),
        forecast,
        actual,
        error: actual - forecast,
        benchmark: row.mean().expect("panel has forecasters"),
        label,
        scored,
    }
}

/// Calls `method` at every origin of the configured range, handing it only
/// rows before the origin, and scores the configured origins.
pub fn rolling_evaluate(
    panel: &Panel,
    method: &dyn ForecastMethod,
    config: &EvalConfig,
) -> Result<EvalResult, EvalError> {
    let last = config.resolve(panel.rows())?;
    let origins: Vec<usize> = (config.first_call_t..=last).collect();
    let records: Result<Vec<OriginRecord>, EvalError> = origins
        .par_iter()
        .map(|&t| {
            let date = panel.dates()[t - 1].clone();
            let info = build_info(panel, t, config.w, &config.grid)?;
            let f = method.forecast(&info).map_err(|source| EvalError::Method {
                t,
                date: date.clone(),
                source,
            })?;
            if !f.value.is_finite() {
                return Err(EvalError::Method {
                    t,
                    date,
                    source: MethodError::Invalid(format!("non-finite forecast {}", f.value)),
                });
            }
            let scored = t >= config.score_from_t && !config.scoring_mask.contains(&date);
            Ok(origin_record(panel, t, f.value, f.label, scored))
        })
        .collect();
    EvalResult::from_records(method.name(), records?)
}

/// A named set of dates to score over.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    /// Identifier used in TSV output.
    pub name: String,
    /// Column heading in the text table.
    pub title: String,
    pub dates: BTreeSet<String>,
    /// Whether to report DM p-values on this sample.
    pub dm: bool,
}

impl Sample {
    pub fn new(name: &str, title: &str, dates: impl IntoIterator<Item = String>, dm: bool) -> Self {
        Sample {
            name: name.into(),
            title: title.into(),
            dates: dates.into_iter().collect(),
            dm,
        }
    }

    /// Copy without the given dates.
    pub fn excluding(&self, name: &str, title: &str, drop: &BTreeSet<String>) -> Sample {
        Sample {
            name: name.into(),
            title: title.into(),
            dates: self.dates.difference(drop).cloned().collect(),
            dm: self.dm,
        }
    }
}

/// The four quarters of 2020.
pub fn covid_quarters() -> BTreeSet<String> {
    (1..=4).map(|q| format!("2020Q{q}")).collect()
}

/// Search sample, and when the panel has a holdout, the holdout plus one
/// extra holdout column per named exclusion set.
pub fn standard_samples(panel: &Panel, exclusions: &[(String, BTreeSet<String>)]) -> Vec<Sample> {
    let split = panel.split();
    let dates = panel.dates();
    let mut samples = vec![Sample::new(
        "search",
        "Search sample",
        dates[..split].to_vec(),
        false,
    )];
    if split < dates.len() {
        let holdout = Sample::new("holdout", "Holdout", dates[split..].to_vec(), true);
        for (tag, drop) in exclusions {
            let title = if tag == "covid" {
                "Holdout excl. COVID".to_string()
            } else {
                format!("Holdout excl. {tag}")
            };
            samples.push(holdout.excluding(&format!("holdout_excl_{tag}"), &title, drop));
        }
        samples.insert(1, holdout);
    }
    samples
}

/// Scores of one result on one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleScore {
    pub sample: String,
    pub n_scored: usize,
    pub rmse: f64,
    pub benchmark_rmse: f64,
    pub relative: f64,
    pub dm: Option<DmResult>,
}

/// RMSE of `result` over the scored origins that fall in each sample.
pub fn score_subsets(
    result: &EvalResult,
    samples: &[Sample],
    dm_basis: Option<usize>,
) -> Result<Vec<SampleScore>, EvalError> {
    samples
        .iter()
        .map(|sample| {
            let picked: Vec<&OriginRecord> = result
                .scored()
                .filter(|r| sample.dates.contains(&r.date))
                .collect();
            if picked.is_empty() {
                return Err(EvalError::EmptySample(sample.name.clone()));
            }
            let e: Vec<f64> = picked.iter().map(|r| r.error).collect();
            let b: Vec<f64> = picked.iter().map(|r| r.benchmark_error()).collect();
            let r = rmse(e.iter());
            let br = rmse(b.iter());
            let dm = if sample.dm && result.method != BENCHMARK && picked.len() >= 4 {
                Some(dm_test_ewc(&e, &b, dm_basis)?)
            } else {
                None
            };
            Ok(SampleScore {
                sample: sample.name.clone(),
                n_scored: picked.len(),
                rmse: r,
                benchmark_rmse: br,
                relative: r / br,
                dm,
            })
        })
        .collect()
}

/// The evaluator output block: `---`, `method:`, `rmse:`,
/// `benchmark_rmse:`, `relative_rmse:`.
pub fn evaluator_block(result: &EvalResult) -> String {
    format!(
        "---\nmethod:         {}\nrmse:           {:.6}\nbenchmark_rmse: {:.6}\nrelative_rmse:  {:.6}\n",
        result.method, result.rmse, result.benchmark_rmse, result.relative_rmse
    )
}

/// Score from evaluator output: the value on the last line starting with
/// `rmse:`.
pub fn parse_score(output: &str) -> Option<f64> {
    output
        .lines()
        .filter_map(|l| l.strip_prefix("rmse:"))
        .next_back()
        .and_then(|v| v.trim().parse::<f64>().ok())
        .filter(|v| v.is_finite())
}
