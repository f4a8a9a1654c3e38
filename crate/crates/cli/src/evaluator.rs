use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use auditloop_core::combiners::{expost_pelasso, lookup, method_names, ExpostMode, Stage2};
use auditloop_core::eval::{
    covid_quarters, origin_record, rolling_evaluate, standard_samples, EvalConfig, EvalResult,
    Sample,
};
use auditloop_core::panel::mark_split;
use auditloop_core::{impute_panel, load_panel, Panel, PanelFormat};
use serde::Deserialize;

use crate::Failure;

/// Ex post peLASSO rows are computed over whole windows, not origin by origin.
pub const EXPOST_METHODS: [&str; 2] = ["pelasso_expost", "pelasso_expost_fixed"];

/// The evaluator file of a run: which panel to score on and how.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluatorFile {
    pub panel: Option<PathBuf>,
    pub format: Option<String>,
    pub window: Option<usize>,
    pub first_call: Option<usize>,
    pub score_from: Option<usize>,
    pub last_call: Option<usize>,
    pub holdout_start: Option<String>,
    #[serde(default)]
    pub mask: Vec<String>,
    pub dm_basis: Option<usize>,
}

impl EvaluatorFile {
    /// Reads TOML; a relative panel path resolves against the file's directory.
    pub fn read(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
        let mut file: EvaluatorFile = toml::from_str(&text)
            .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
        if let Some(p) = &file.panel {
            if p.is_relative() {
                file.panel = Some(path.parent().unwrap_or(Path::new(".")).join(p));
            }
        }
        Ok(file)
    }
}

/// Everything needed to score methods on one panel.
#[derive(Clone, Debug)]
pub struct Settings {
    pub panel: PathBuf,
    pub format: PanelFormat,
    pub eval: EvalConfig,
    pub holdout_start: Option<String>,
    pub mask: Vec<String>,
    pub dm_basis: Option<usize>,
}

impl Settings {
    pub fn from_file(file: EvaluatorFile) -> Result<Self, Failure> {
        let panel = file
            .panel
            .ok_or_else(|| Failure::Validation("no panel given".into()))?;
        let format = match &file.format {
            Some(f) => f.parse().map_err(Failure::Validation)?,
            None => PanelFormat::Generic,
        };
        let mut eval = EvalConfig::default();
        if let Some(w) = file.window {
            eval.w = w;
        }
        if let Some(t) = file.first_call {
            eval.first_call_t = t;
        }
        if let Some(t) = file.score_from {
            eval.score_from_t = t;
        }
        eval.last_call_t = file.last_call;
        Ok(Settings {
            panel,
            format,
            eval,
            holdout_start: file.holdout_start,
            mask: file.mask,
            dm_basis: file.dm_basis,
        })
    }

    /// Loads, imputes and, if asked, marks the holdout.
    pub fn load_panel(&self) -> Result<Panel, Failure> {
        let invalid = |e: &dyn std::fmt::Display| {
            Failure::Validation(format!("{}: {e}", self.panel.display()))
        };
        let raw = load_panel(&self.panel, self.format).map_err(|e| invalid(&e))?;
        let mut panel = impute_panel(&raw).map_err(|e| invalid(&e))?;
        if let Some(boundary) = &self.holdout_start {
            panel = mark_split(&panel, boundary).map_err(|e| invalid(&e))?;
        }
        self.eval
            .resolve(panel.rows())
            .map_err(|e| Failure::Validation(e.to_string()))?;
        Ok(panel)
    }

    /// Search and holdout samples, plus one holdout column per mask entry.
    pub fn samples(&self, panel: &Panel) -> Vec<Sample> {
        let mut exclusions: Vec<(String, BTreeSet<String>)> = Vec::new();
        let mut dates = BTreeSet::new();
        for m in &self.mask {
            if m.eq_ignore_ascii_case("covid") {
                exclusions.push(("covid".into(), covid_quarters()));
            } else {
                dates.insert(m.clone());
            }
        }
        if !dates.is_empty() {
            exclusions.push(("mask".into(), dates));
        }
        standard_samples(panel, &exclusions)
    }
}

/// Canonical method name, or a validation failure listing what exists.
pub fn resolve_method(name: &str) -> Result<String, Failure> {
    let trimmed = name.trim();
    if EXPOST_METHODS.contains(&trimmed) {
        return Ok(trimmed.to_string());
    }
    lookup(trimmed)
        .map(|m| m.name().to_string())
        .ok_or_else(|| {
            let mut known: Vec<&str> = method_names().to_vec();
            known.extend(EXPOST_METHODS);
            Failure::Validation(format!(
                "unknown method `{trimmed}`; registered methods: {}",
                known.join(", ")
            ))
        })
}

/// The method named by a candidate file: its first line that is neither
/// blank nor a `#` comment.
pub fn candidate_method(content: &str) -> Option<&str> {
    content
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
}

pub fn evaluate_method(
    panel: &Panel,
    settings: &Settings,
    name: &str,
) -> Result<EvalResult, Failure> {
    let name = resolve_method(name)?;
    let failed = |e: &dyn std::fmt::Display| Failure::Evaluation(format!("{name}: {e}"));
    if let Some(mode) = expost_mode(&name) {
        return expost_result(panel, settings, &name, mode).map_err(|e| failed(&e));
    }
    let method = lookup(&name).expect("resolved above");
    rolling_evaluate(panel, method.as_ref(), &settings.eval).map_err(|e| failed(&e))
}

fn expost_mode(name: &str) -> Option<ExpostMode> {
    match name {
        "pelasso_expost" => Some(ExpostMode::PerWindow),
        "pelasso_expost_fixed" => Some(ExpostMode::Fixed),
        _ => None,
    }
}

/// Scored origins grouped into search and holdout windows.
fn expost_result(
    panel: &Panel,
    settings: &Settings,
    name: &str,
    mode: ExpostMode,
) -> Result<EvalResult, Box<dyn std::error::Error>> {
    let cfg = &settings.eval;
    let last = cfg.resolve(panel.rows())?;
    let scored: Vec<usize> = (cfg.score_from_t..=last)
        .filter(|t| !cfg.scoring_mask.contains(&panel.dates()[t - 1]))
        .collect();
    let (search, holdout): (Vec<usize>, Vec<usize>) =
        scored.into_iter().partition(|t| *t <= panel.split());
    let windows: Vec<Vec<usize>> = [search, holdout]
        .into_iter()
        .filter(|w| !w.is_empty())
        .collect();
    let fitted = expost_pelasso(panel, &windows, Stage2::Avg, mode, &cfg.grid, cfg.w)?;
    let mut records = Vec::new();
    for window in &fitted {
        for (t, f) in window.origins.iter().zip(&window.forecasts) {
            let label = format!("lambda={}", window.lambda);
            records.push(origin_record(panel, *t, *f, label, true));
        }
    }
    records.sort_by_key(|r| r.t);
    Ok(EvalResult::from_records(name, records)?)
}
