use std::fmt::Write as _;

use super::{score_subsets, EvalError, EvalResult, Sample, SampleScore, BENCHMARK};
use crate::combiners::display_name;

/// A method's full evaluation with its per-sample scores.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodRun {
    pub method: String,
    pub result: EvalResult,
    pub scores: Vec<SampleScore>,
}

impl MethodRun {
    pub fn new(
        result: EvalResult,
        samples: &[Sample],
        dm_basis: Option<usize>,
    ) -> Result<Self, EvalError> {
        let scores = score_subsets(&result, samples, dm_basis)?;
        Ok(MethodRun {
            method: result.method.clone(),
            result,
            scores,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportLayout {
    /// Fixed-width table, one column group per sample.
    Table,
    Tsv,
}

/// One (method, sample) cell of a report.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub sample: String,
    pub n_scored: usize,
    pub rmse: f64,
    pub relative: f64,
    pub p_value: Option<f64>,
    pub label_notes: String,
}

pub const TSV_HEADER: &str = "method\tsample\tn_scored\trmse\trelative\tp_value\tlabel_notes";

fn ordered(runs: &[MethodRun]) -> Vec<&MethodRun> {
    let mut out: Vec<&MethodRun> = runs.iter().filter(|r| r.method == BENCHMARK).collect();
    out.extend(runs.iter().filter(|r| r.method != BENCHMARK));
    out
}

/// Report cells, benchmark rows first.
pub fn report_rows(runs: &[MethodRun]) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for run in ordered(runs) {
        let labels = run.result.label_notes();
        for s in &run.scores {
            let mut notes = labels.clone();
            if let Some(dm) = &s.dm {
                if !notes.is_empty() {
                    notes.push_str("; ");
                }
                write!(notes, "dm_b={}", dm.basis).expect("write to string");
                if dm.degenerate {
                    notes.push_str("; dm_degenerate");
                }
            }
            rows.push(ReportRow {
                method: run.method.clone(),
                sample: s.sample.clone(),
                n_scored: s.n_scored,
                rmse: s.rmse,
                relative: s.relative,
                p_value: s.dm.map(|d| d.p_value),
                label_notes: notes,
            });
        }
    }
    rows
}

fn tsv(rows: &[ReportRow]) -> String {
    let mut out = String::from(TSV_HEADER);
    out.push('\n');
    for r in rows {
        let p = r.p_value.map(|p| p.to_string()).unwrap_or_default();
        let notes = r.label_notes.replace(['\t', '\n'], " ");
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.method, r.sample, r.n_scored, r.rmse, r.relative, p, notes
        )
        .expect("write to string");
    }
    out
}

fn table(runs: &[MethodRun], samples: &[Sample]) -> String {
    let runs = ordered(runs);
    let names: Vec<String> = runs.iter().map(|r| display_name(&r.method)).collect();
    let name_width = names
        .iter()
        .map(|n| n.chars().count())
        .max()
        .unwrap_or(0)
        .max(6);
    const CELL: usize = 22;
    let mut out = String::new();
    let _ = write!(out, "{:name_width$}", "");
    for s in samples {
        let _ = write!(out, "  {:^CELL$}", s.title);
    }
    out.push('\n');
    let _ = write!(out, "{:name_width$}", "");
    for s in samples {
        let n = runs
            .first()
            .and_then(|r| r.scores.iter().find(|c| c.sample == s.name))
            .map_or(0, |c| c.n_scored);
        let _ = write!(out, "  {:^CELL$}", format!("({n} quarters)"));
    }
    out.push('\n');
    let _ = write!(out, "{:name_width$}", "Method");
    for _ in samples {
        let _ = write!(out, "  {:>7} {:>14}", "RMSE", "Relative");
    }
    out.push('\n');
    let rule_len = name_width + samples.len() * (CELL + 2);
    out.push_str(&"-".repeat(rule_len));
    out.push('\n');
    let mut bases = Vec::new();
    for (run, name) in runs.iter().zip(&names) {
        let _ = write!(out, "{name:name_width$}");
        for s in samples {
            match run.scores.iter().find(|c| c.sample == s.name) {
                Some(c) => {
                    let rel = match &c.dm {
                        Some(dm) => {
                            if !bases.contains(&dm.basis) {
                                bases.push(dm.basis);
                            }
                            format!("{:.3} [{}]", c.relative, bracket(dm.p_value))
                        }
                        None => format!("{:.3}", c.relative),
                    };
                    let _ = write!(out, "  {:>7.3} {:>14}", c.rmse, rel);
                }
                None => {
                    let _ = write!(out, "  {:>7} {:>14}", "-", "-");
                }
            }
        }
        out.push('\n');
    }
    out.push_str(&"-".repeat(rule_len));
    out.push('\n');
    out.push_str(
        "Relative: RMSE divided by the simple-average RMSE on the same quarters.\n\
         Rolling estimation windows continue across the search/holdout boundary.\n",
    );
    if !bases.is_empty() {
        let b: Vec<String> = bases.iter().map(|b| b.to_string()).collect();
        let _ = writeln!(
            out,
            "Brackets: one-sided Diebold-Mariano p-values against the simple average, \
             EWC long-run variance, t reference with B={} degrees of freedom.",
            b.join("/")
        );
    }
    out
}

/// `.127` style p-value.
fn bracket(p: f64) -> String {
    let s = format!("{p:.3}");
    match s.strip_prefix('0') {
        Some(rest) => rest.to_string(),
        None => s,
    }
}

/// Renders already-scored runs.
pub fn render_report(runs: &[MethodRun], samples: &[Sample], layout: ReportLayout) -> String {
    match layout {
        ReportLayout::Tsv => tsv(&report_rows(runs)),
        ReportLayout::Table => table(runs, samples),
    }
}

/// Scores each result on every sample and renders the report. All results
/// must have been computed against the same panel.
pub fn make_report(
    results: &[EvalResult],
    samples: &[Sample],
    layout: ReportLayout,
    dm_basis: Option<usize>,
) -> Result<String, EvalError> {
    let runs = results
        .iter()
        .map(|r| MethodRun::new(r.clone(), samples, dm_basis))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(render_report(&runs, samples, layout))
}

/// Parses the TSV layout back into rows.
pub fn parse_report_tsv(text: &str) -> Result<Vec<ReportRow>, EvalError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == TSV_HEADER => {}
        _ => {
            return Err(EvalError::Parse {
                line: 1,
                message: "missing report header".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let err = |message: String| EvalError::Parse {
            line: i + 1,
            message,
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 7 {
            return Err(err(format!("expected 7 fields, found {}", f.len())));
        }
        let float = |s: &str| s.parse::<f64>().map_err(|e| err(format!("`{s}`: {e}")));
        rows.push(ReportRow {
            method: f[0].to_string(),
            sample: f[1].to_string(),
            n_scored: f[2].parse().map_err(|e| err(format!("`{}`: {e}", f[2])))?,
            rmse: float(f[3])?,
            relative: float(f[4])?,
            p_value: if f[5].is_empty() {
                None
            } else {
                Some(float(f[5])?)
            },
            label_notes: f[6].to_string(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bracket_drops_leading_zero() {
        assert_eq!(bracket(0.1274), ".127");
        assert_eq!(bracket(1.0), "1.000");
    }
}
