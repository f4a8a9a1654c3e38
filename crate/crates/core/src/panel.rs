//! Forecaster panels: loading, validation, imputation, sample splits and the
//! per-origin information set.
//!
//! CSV layout: the first column holds the date label (e.g. `1999Q3`), the next
//! K columns hold the individual forecasts, and the last column holds the
//! realization. A blank cell or `NA` marks a missing forecast.
//!
//! Origins `t` are 1-based throughout, matching the rolling-evaluation
//! convention where the forecast at origin `t` may use rows `1..=t-1` only.

use std::cmp::Ordering;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use thiserror::Error;

use crate::grid::LambdaGrid;

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("cannot read panel: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },
    #[error("dates are not strictly increasing at row {row}: {previous} then {next}")]
    NonMonotone {
        row: usize,
        previous: String,
        next: String,
    },
    #[error("{format} panel must be {expected_rows}x{expected_k}, found {rows}x{k}")]
    Dimension {
        format: &'static str,
        expected_rows: usize,
        expected_k: usize,
        rows: usize,
        k: usize,
    },
    #[error("row {row} ({date}) has no observed forecaster")]
    Unimputable { row: usize, date: String },
    #[error("split boundary {0} lies outside the panel date range")]
    Boundary(String),
    #[error("origin t={t} has no history (need 2 <= t <= {rows})")]
    NoHistory { t: usize, rows: usize },
    #[error("invalid panel: {0}")]
    Invalid(String),
}

/// Declared shape of a panel file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PanelFormat {
    /// 1999Q3..2016Q4, 70 rows, 23 forecasters.
    Original70,
    /// 1999Q3..2025Q4, 106 rows, 23 forecasters; holdout starts at row 71.
    Extended106,
    Generic,
}

impl PanelFormat {
    pub const FORECASTERS: usize = 23;
    pub const SEARCH_ROWS: usize = 70;
    pub const EXTENDED_ROWS: usize = 106;

    fn name(self) -> &'static str {
        match self {
            PanelFormat::Original70 => "original_70",
            PanelFormat::Extended106 => "extended_106",
            PanelFormat::Generic => "generic",
        }
    }
}

impl std::str::FromStr for PanelFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "original_70" | "original" => Ok(PanelFormat::Original70),
            "extended_106" | "extended" => Ok(PanelFormat::Extended106),
            "generic" => Ok(PanelFormat::Generic),
            other => Err(format!(
                "unknown panel format '{other}' (expected original_70, extended_106 or generic)"
            )),
        }
    }
}

/// Orders two date labels: numerically when both parse as numbers, otherwise
/// lexicographically (`1999Q3 < 2000Q1`).
pub fn compare_dates(a: &str, b: &str) -> Ordering {
    match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
        (Ok(x), Ok(y)) => x.partial_cmp(&y).unwrap_or(Ordering::Equal),
        _ => a.cmp(b),
    }
}

/// Forecaster-by-time matrix of predictions plus realized outcomes.
///
/// Missing forecasts are stored as `NaN` and flagged in the missing mask.
/// Rows at or after `split` form the holdout.
#[derive(Clone, Debug, PartialEq)]
pub struct Panel {
    dates: Vec<String>,
    forecasters: Vec<String>,
    forecasts: Array2<f64>,
    actuals: Array1<f64>,
    missing: Array2<bool>,
    split: usize,
}

impl Panel {
    /// Builds a panel, deriving the missing mask from non-finite forecasts.
    pub fn new(
        dates: Vec<String>,
        forecasters: Vec<String>,
        forecasts: Array2<f64>,
        actuals: Array1<f64>,
    ) -> Result<Self, PanelError> {
        let missing = forecasts.mapv(|v| !v.is_finite());
        let split = dates.len();
        let panel = Panel {
            dates,
            forecasters,
            forecasts,
            actuals,
            missing,
            split,
        };
        panel.validate()?;
        Ok(panel)
    }

    fn validate(&self) -> Result<(), PanelError> {
        let (rows, k) = self.forecasts.dim();
        if rows == 0 {
            return Err(PanelError::Invalid("panel has no rows".into()));
        }
        if k < 2 {
            return Err(PanelError::Invalid(format!(
                "panel needs at least 2 forecasters, found {k}"
            )));
        }
        if self.dates.len() != rows || self.actuals.len() != rows {
            return Err(PanelError::Invalid(format!(
                "{} dates and {} realizations for {rows} forecast rows",
                self.dates.len(),
                self.actuals.len()
            )));
        }
        if self.forecasters.len() != k {
            return Err(PanelError::Invalid(format!(
                "{} forecaster names for {k} columns",
                self.forecasters.len()
            )));
        }
        for (i, pair) in self.dates.windows(2).enumerate() {
            if compare_dates(&pair[0], &pair[1]) != Ordering::Less {
                return Err(PanelError::NonMonotone {
                    row: i + 2,
                    previous: pair[0].clone(),
                    next: pair[1].clone(),
                });
            }
        }
        if let Some(i) = self.actuals.iter().position(|v| !v.is_finite()) {
            return Err(PanelError::Invalid(format!(
                "realization missing or non-finite at row {} ({})",
                i + 1,
                self.dates[i]
            )));
        }
        if self.split > rows {
            return Err(PanelError::Invalid(format!(
                "split {} beyond {rows} rows",
                self.split
            )));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.dates.len()
    }

    pub fn forecaster_count(&self) -> usize {
        self.forecasters.len()
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn forecaster_names(&self) -> &[String] {
        &self.forecasters
    }

    pub fn forecasts(&self) -> ArrayView2<'_, f64> {
        self.forecasts.view()
    }

    pub fn actuals(&self) -> ArrayView1<'_, f64> {
        self.actuals.view()
    }

    pub fn missing_mask(&self) -> ArrayView2<'_, bool> {
        self.missing.view()
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|m| **m).count()
    }

    /// 0-based index of the first holdout row; equals `rows()` when there is
    /// no holdout.
    pub fn split(&self) -> usize {
        self.split
    }

    pub fn holdout_len(&self) -> usize {
        self.rows() - self.split
    }

    /// Row index (0-based) of a date label.
    pub fn position(&self, date: &str) -> Option<usize> {
        self.dates.iter().position(|d| d == date)
    }

    /// Forecaster columns with no observation at all.
    pub fn inactive_forecasters(&self) -> Vec<usize> {
        (0..self.forecaster_count())
            .filter(|&k| self.missing.column(k).iter().all(|m| *m))
            .collect()
    }

    /// Same data with the holdout starting at 0-based row `split`.
    pub fn with_split_index(mut self, split: usize) -> Result<Self, PanelError> {
        if split == 0 || split > self.rows() {
            return Err(PanelError::Invalid(format!(
                "split index {split} outside 1..={}",
                self.rows()
            )));
        }
        self.split = split;
        Ok(self)
    }

    /// Copy holding only the first `end` rows; the copy has no holdout.
    fn slice_rows(&self, end: usize) -> Panel {
        Panel {
            dates: self.dates[..end].to_vec(),
            forecasters: self.forecasters.clone(),
            forecasts: self.forecasts.slice(s![..end, ..]).to_owned(),
            actuals: self.actuals.slice(s![..end]).to_owned(),
            missing: self.missing.slice(s![..end, ..]).to_owned(),
            split: end,
        }
    }

    /// The search-sample rows only (everything before the split).
    pub fn search_sample(&self) -> Panel {
        self.slice_rows(self.split)
    }

    /// Writes the panel in the CSV layout accepted by [`load_panel`].
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), PanelError> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string()];
        header.extend(self.forecasters.iter().cloned());
        header.push("actual".to_string());
        out.write_record(&header).map_err(csv_io)?;
        for (i, date) in self.dates.iter().enumerate() {
            let mut record = vec![date.clone()];
            for k in 0..self.forecaster_count() {
                if self.missing[[i, k]] {
                    record.push("NA".to_string());
                } else {
                    record.push(format!("{}", self.forecasts[[i, k]]));
                }
            }
            record.push(format!("{}", self.actuals[i]));
            out.write_record(&record).map_err(csv_io)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), PanelError> {
        self.write_csv(File::create(path)?)
    }
}

fn csv_io(err: csv::Error) -> PanelError {
    PanelError::Io(std::io::Error::other(err))
}

/// Reads a panel CSV. Missing forecasts are flagged, not imputed.
pub fn load_panel(path: &Path, format: PanelFormat) -> Result<Panel, PanelError> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_panel(&text, format)
}

pub fn parse_panel(text: &str, format: PanelFormat) -> Result<Panel, PanelError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| PanelError::Parse {
            row: 1,
            column: 1,
            message: e.to_string(),
        })?
        .clone();
    if header.len() < 4 {
        return Err(PanelError::Parse {
            row: 1,
            column: header.len(),
            message: format!(
                "header needs a date column, at least 2 forecasters and a realization column; found {} columns",
                header.len()
            ),
        });
    }
    let k = header.len() - 2;
    let forecasters: Vec<String> = header.iter().skip(1).take(k).map(str::to_string).collect();

    let mut dates = Vec::new();
    let mut values = Vec::new();
    let mut actuals = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // Header is row 1, so data rows start at 2.
        let row = i + 2;
        let record = record.map_err(|e| PanelError::Parse {
            row,
            column: 0,
            message: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(PanelError::Parse {
                row,
                column: record.len(),
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let date = record[0].to_string();
        if date.is_empty() {
            return Err(PanelError::Parse {
                row,
                column: 1,
                message: "empty date".into(),
            });
        }
        dates.push(date);
        for column in 1..=k {
            values.push(parse_cell(&record[column], row, column + 1, true)?);
        }
        actuals.push(parse_cell(&record[k + 1], row, k + 2, false)?);
    }
    let rows = dates.len();
    let forecasts = Array2::from_shape_vec((rows, k), values)
        .map_err(|e| PanelError::Invalid(e.to_string()))?;
    let panel = Panel::new(dates, forecasters, forecasts, Array1::from(actuals))?;

    let panel = match format {
        PanelFormat::Generic => panel,
        PanelFormat::Original70 | PanelFormat::Extended106 => {
            let expected_rows = if format == PanelFormat::Original70 {
                PanelFormat::SEARCH_ROWS
            } else {
                PanelFormat::EXTENDED_ROWS
            };
            if rows != expected_rows || k != PanelFormat::FORECASTERS {
                return Err(PanelError::Dimension {
                    format: format.name(),
                    expected_rows,
                    expected_k: PanelFormat::FORECASTERS,
                    rows,
                    k,
                });
            }
            if format == PanelFormat::Extended106 {
                panel.with_split_index(PanelFormat::SEARCH_ROWS)?
            } else {
                panel
            }
        }
    };
    for k in panel.inactive_forecasters() {
        log::warn!(
            "forecaster '{}' has no observations; it will be imputed with cross-sectional means",
            panel.forecasters[k]
        );
    }
    Ok(panel)
}

fn parse_cell(
    cell: &str,
    row: usize,
    column: usize,
    allow_missing: bool,
) -> Result<f64, PanelError> {
    if cell.is_empty() || cell.eq_ignore_ascii_case("NA") {
        if allow_missing {
            return Ok(f64::NAN);
        }
        return Err(PanelError::Parse {
            row,
            column,
            message: "realization is missing".into(),
        });
    }
    let value: f64 = cell.parse().map_err(|_| PanelError::Parse {
        row,
        column,
        message: format!("'{cell}' is not a number"),
    })?;
    if !value.is_finite() {
        return Err(PanelError::Parse {
            row,
            column,
            message: format!("'{cell}' is not finite"),
        });
    }
    Ok(value)
}

/// Fills missing forecasts: interior gaps by linear interpolation in row
/// index, leading and trailing gaps (and inactive forecasters) by the
/// cross-sectional mean of the forecasters observed at that date.
pub fn impute_panel(panel: &Panel) -> Result<Panel, PanelError> {
    let (rows, k) = panel.forecasts.dim();
    let observed = |i: usize, j: usize| !panel.missing[[i, j]];

    let mut cross_mean = Vec::with_capacity(rows);
    for i in 0..rows {
        let (sum, count) = (0..k)
            .filter(|&j| observed(i, j))
            .fold((0.0, 0usize), |(s, c), j| {
                (s + panel.forecasts[[i, j]], c + 1)
            });
        if count == 0 {
            return Err(PanelError::Unimputable {
                row: i + 1,
                date: panel.dates[i].clone(),
            });
        }
        cross_mean.push(sum / count as f64);
    }

    let mut filled = panel.forecasts.clone();
    for j in 0..k {
        let seen: Vec<usize> = (0..rows).filter(|&i| observed(i, j)).collect();
        for i in (0..rows).filter(|&i| !observed(i, j)) {
            let after = seen.partition_point(|&r| r < i);
            filled[[i, j]] = if after == 0 || after == seen.len() {
                cross_mean[i]
            } else {
                let (lo, hi) = (seen[after - 1], seen[after]);
                let (a, b) = (panel.forecasts[[lo, j]], panel.forecasts[[hi, j]]);
                a + (b - a) * (i - lo) as f64 / (hi - lo) as f64
            };
        }
    }
    Ok(Panel {
        forecasts: filled,
        missing: Array2::from_elem((rows, k), false),
        ..panel.clone()
    })
}

/// Splits off the search sample: rows strictly before `boundary`.
///
/// Returns the search panel (which holds no holdout rows at all) and the
/// number of holdout rows. A boundary after the last date yields an empty
/// holdout.
pub fn split_panel(panel: &Panel, boundary: &str) -> Result<(Panel, usize), PanelError> {
    let split = split_index(panel, boundary)?;
    Ok((panel.slice_rows(split), panel.rows() - split))
}

/// The parent panel with its holdout marked at `boundary`.
pub fn mark_split(panel: &Panel, boundary: &str) -> Result<Panel, PanelError> {
    let split = split_index(panel, boundary)?;
    panel.clone().with_split_index(split)
}

fn split_index(panel: &Panel, boundary: &str) -> Result<usize, PanelError> {
    if compare_dates(boundary, &panel.dates[0]) != Ordering::Greater {
        return Err(PanelError::Boundary(boundary.to_string()));
    }
    Ok(panel
        .dates
        .iter()
        .position(|d| compare_dates(d, boundary) != Ordering::Less)
        .unwrap_or(panel.rows()))
}

/// The information set handed to a combination method at origin `t`.
///
/// Holds owned copies of rows `1..=t-1` only; nothing at or after `t` except
/// the current forecasts `x_new`.
#[derive(Clone, Debug, PartialEq)]
pub struct Info {
    /// Rolling window rows `max(1, t-w)..=t-1`.
    pub x_train: Array2<f64>,
    pub y_train: Array1<f64>,
    pub x_history: Array2<f64>,
    pub y_history: Array1<f64>,
    /// Forecasts issued for origin `t`.
    pub x_new: Array1<f64>,
    pub lambda_grid: LambdaGrid,
    pub lambda_grid2: LambdaGrid,
    pub t: usize,
    pub w: usize,
}

impl Info {
    /// Assembles an information set from a history block (rows `1..=t-1`)
    /// and the current forecasts. The training window is carved out of the
    /// history.
    pub fn new(
        x_history: Array2<f64>,
        y_history: Array1<f64>,
        x_new: Array1<f64>,
        w: usize,
        grid: LambdaGrid,
    ) -> Result<Self, PanelError> {
        let history = x_history.nrows();
        if history == 0 {
            return Err(PanelError::NoHistory { t: 1, rows: 0 });
        }
        if w == 0 {
            return Err(PanelError::Invalid("window size must be at least 1".into()));
        }
        if y_history.len() != history || x_new.len() != x_history.ncols() {
            return Err(PanelError::Invalid(format!(
                "history is {}x{} with {} realizations and {} new forecasts",
                history,
                x_history.ncols(),
                y_history.len(),
                x_new.len()
            )));
        }
        let t = history + 1;
        // Rows max(1, t-w)..=t-1 in 1-based terms.
        let start = t.saturating_sub(w).max(1) - 1;
        Ok(Info {
            x_train: x_history.slice(s![start.., ..]).to_owned(),
            y_train: y_history.slice(s![start..]).to_owned(),
            x_history,
            y_history,
            x_new,
            lambda_grid2: grid.clone(),
            lambda_grid: grid,
            t,
            w,
        })
    }

    pub fn forecaster_count(&self) -> usize {
        self.x_new.len()
    }

    pub fn train_len(&self) -> usize {
        self.y_train.len()
    }

    /// The last `rows` rows of the history (clipped to what exists).
    pub fn recent(&self, rows: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let start = self.y_history.len() - rows.min(self.y_history.len());
        (
            self.x_history.slice(s![start.., ..]),
            self.y_history.slice(s![start..]),
        )
    }

    /// Same information with every forecast and realization shifted by `c`.
    pub fn shifted(&self, c: f64) -> Info {
        Info {
            x_train: &self.x_train + c,
            y_train: &self.y_train + c,
            x_history: &self.x_history + c,
            y_history: &self.y_history + c,
            x_new: &self.x_new + c,
            ..self.clone()
        }
    }

    /// Same information with forecaster columns reordered: column `j` of the
    /// result is column `order[j]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Info {
        Info {
            x_train: self.x_train.select(Axis(1), order),
            x_history: self.x_history.select(Axis(1), order),
            x_new: self.x_new.select(Axis(0), order),
            ..self.clone()
        }
    }
}

/// Information set for 1-based origin `t` with rolling window `w`.
pub fn build_info(
    panel: &Panel,
    t: usize,
    w: usize,
    grid: &LambdaGrid,
) -> Result<Info, PanelError> {
    if t < 2 || t > panel.rows() {
        return Err(PanelError::NoHistory {
            t,
            rows: panel.rows(),
        });
    }
    Info::new(
        panel.forecasts.slice(s![..t - 1, ..]).to_owned(),
        panel.actuals.slice(s![..t - 1]).to_owned(),
        panel.forecasts.row(t - 1).to_owned(),
        w,
        grid.clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn quarters(start_year: u32, start_q: u32, n: usize) -> Vec<String> {
        (0..n)
            .map(|i| {
                let q = start_q - 1 + i as u32;
                format!("{}Q{}", start_year + q / 4, q % 4 + 1)
            })
            .collect()
    }

    fn toy(rows: usize, k: usize) -> Panel {
        let x = Array2::from_shape_fn((rows, k), |(i, j)| i as f64 + 0.1 * j as f64);
        let y = Array1::from_shape_fn(rows, |i| i as f64 + 0.05);
        Panel::new(
            quarters(1999, 3, rows),
            (0..k).map(|j| format!("f{j}")).collect(),
            x,
            y,
        )
        .unwrap()
    }

    #[test]
    fn generic_csv_flags_blank_cell() {
        let text = "date,a,b,actual\n1,1.0,2.0,1.5\n2,,2.5,2.0\n3,3.0,NA,2.5\n";
        let panel = parse_panel(text, PanelFormat::Generic).unwrap();
        assert_eq!(panel.rows(), 3);
        assert_eq!(panel.forecaster_count(), 2);
        assert_eq!(panel.missing_count(), 2);
        assert!(panel.missing_mask()[[1, 0]]);
        assert!(panel.missing_mask()[[2, 1]]);

        let one_blank = "date,a,b,actual\n1,1.0,2.0,1.5\n2,,2.5,2.0\n3,3.0,3.5,2.5\n";
        let panel = parse_panel(one_blank, PanelFormat::Generic).unwrap();
        assert_eq!(panel.missing_count(), 1);
    }

    #[test]
    fn malformed_cell_reports_position() {
        let text = "date,a,b,actual\n1,1.0,2.0,1.5\n2,abc,2.5,2.0\n";
        match parse_panel(text, PanelFormat::Generic) {
            Err(PanelError::Parse { row, column, .. }) => assert_eq!((row, column), (3, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_monotone_dates_rejected() {
        let text = "date,a,b,actual\n2000Q1,1,2,1\n1999Q4,1,2,1\n";
        assert!(matches!(
            parse_panel(text, PanelFormat::Generic),
            Err(PanelError::NonMonotone { row: 2, .. })
        ));
        let dup = "date,a,b,actual\n2000Q1,1,2,1\n2000Q1,1,2,1\n";
        assert!(matches!(
            parse_panel(dup, PanelFormat::Generic),
            Err(PanelError::NonMonotone { .. })
        ));
    }

    #[test]
    fn declared_format_checks_dimensions() {
        let text = "date,a,b,actual\n1,1,2,1\n2,1,2,1\n";
        assert!(matches!(
            parse_panel(text, PanelFormat::Original70),
            Err(PanelError::Dimension { rows: 2, k: 2, .. })
        ));
    }

    #[test]
    fn declared_formats_set_split() {
        for (rows, format, split) in [
            (70, PanelFormat::Original70, 70),
            (106, PanelFormat::Extended106, 70),
        ] {
            let mut buf = Vec::new();
            toy(rows, 23).write_csv(&mut buf).unwrap();
            let panel = parse_panel(std::str::from_utf8(&buf).unwrap(), format).unwrap();
            assert_eq!(panel.rows(), rows);
            assert_eq!(panel.forecaster_count(), 23);
            assert_eq!(panel.split(), split);
            if format == PanelFormat::Extended106 {
                assert_eq!(panel.dates()[split], "2017Q1");
                assert_eq!(panel.holdout_len(), 36);
            }
        }
    }

    #[test]
    fn interior_gap_is_interpolated() {
        let x = array![[1.0, 5.0], [f64::NAN, 5.0], [3.0, 5.0]];
        let panel = Panel::new(
            quarters(2000, 1, 3),
            vec!["a".into(), "b".into()],
            x,
            array![1.0, 2.0, 3.0],
        )
        .unwrap();
        let filled = impute_panel(&panel).unwrap();
        assert_eq!(filled.forecasts().column(0).to_vec(), vec![1.0, 2.0, 3.0]);
        assert_eq!(filled.missing_count(), 0);
    }

    #[test]
    fn trailing_and_leading_gaps_use_cross_sectional_mean() {
        let x = array![[f64::NAN, 2.0, 4.0], [1.0, 2.0, 4.0], [f64::NAN, 2.0, 4.0]];
        let panel = Panel::new(
            quarters(2000, 1, 3),
            vec!["a".into(), "b".into(), "c".into()],
            x,
            array![1.0, 2.0, 3.0],
        )
        .unwrap();
        let filled = impute_panel(&panel).unwrap();
        assert_eq!(filled.forecasts()[[0, 0]], 3.0);
        assert_eq!(filled.forecasts()[[2, 0]], 3.0);
        assert_eq!(filled.forecasts()[[1, 0]], 1.0);
    }

    #[test]
    fn inactive_forecaster_filled_and_reported() {
        let x = array![[f64::NAN, 2.0, 4.0], [f64::NAN, 1.0, 3.0]];
        let panel = Panel::new(
            quarters(2000, 1, 2),
            vec!["a".into(), "b".into(), "c".into()],
            x,
            array![1.0, 2.0],
        )
        .unwrap();
        assert_eq!(panel.inactive_forecasters(), vec![0]);
        let filled = impute_panel(&panel).unwrap();
        assert_eq!(filled.forecasts().column(0).to_vec(), vec![3.0, 2.0]);
    }

    #[test]
    fn fully_observed_panel_unchanged_by_imputation() {
        let panel = toy(8, 3);
        assert_eq!(impute_panel(&panel).unwrap(), panel);
    }

    #[test]
    fn empty_row_is_unimputable() {
        let x = array![[1.0, 2.0], [f64::NAN, f64::NAN]];
        let panel = Panel::new(
            quarters(2000, 1, 2),
            vec!["a".into(), "b".into()],
            x,
            array![1.0, 2.0],
        )
        .unwrap();
        assert!(matches!(
            impute_panel(&panel),
            Err(PanelError::Unimputable { row: 2, .. })
        ));
    }

    #[test]
    fn split_at_2017q1_gives_36_holdout_rows() {
        let panel = toy(106, 23);
        let (search, holdout) = split_panel(&panel, "2017Q1").unwrap();
        assert_eq!(search.rows(), 70);
        assert_eq!(search.split(), 70);
        assert_eq!(holdout, 36);
        assert_eq!(search.dates().last().unwrap(), "2016Q4");
        let marked = mark_split(&panel, "2017Q1").unwrap();
        assert_eq!(marked.split(), 70);
        assert_eq!(marked.search_sample(), search);
    }

    #[test]
    fn split_edges() {
        let panel = toy(10, 2);
        let (search, holdout) = split_panel(&panel, &panel.dates()[7].clone()).unwrap();
        assert_eq!((search.rows(), holdout), (7, 3));
        let (search, holdout) = split_panel(&panel, "2099Q1").unwrap();
        assert_eq!((search.rows(), holdout), (10, 0));
        assert!(split_panel(&panel, "1990Q1").is_err());
        assert!(split_panel(&panel, &panel.dates()[0].clone()).is_err());
    }

    #[test]
    fn info_window_clips_at_sample_start() {
        let panel = toy(70, 3);
        let grid = LambdaGrid::default();
        let info = build_info(&panel, 5, 20, &grid).unwrap();
        assert_eq!(info.x_train.nrows(), 4);
        assert_eq!(info.x_history.nrows(), 4);
        assert_eq!(info.x_train, panel.forecasts().slice(s![0..4, ..]));

        let info = build_info(&panel, 25, 20, &grid).unwrap();
        assert_eq!(info.x_train.nrows(), 20);
        // Rows 5..=24 in 1-based terms.
        assert_eq!(info.x_train, panel.forecasts().slice(s![4..24, ..]));
        assert_eq!(info.y_train, panel.actuals().slice(s![4..24]));
        assert_eq!(info.x_new, panel.forecasts().row(24));
        assert_eq!(info.t, 25);
        assert_eq!(info.w, 20);
    }

    #[test]
    fn info_requires_history() {
        let panel = toy(10, 3);
        let grid = LambdaGrid::default();
        assert!(matches!(
            build_info(&panel, 1, 20, &grid),
            Err(PanelError::NoHistory { t: 1, .. })
        ));
        assert!(build_info(&panel, 11, 20, &grid).is_err());
    }

    #[test]
    fn mutating_info_leaves_panel_untouched() {
        let panel = toy(12, 3);
        let before = panel.clone();
        let mut info = build_info(&panel, 8, 4, &LambdaGrid::default()).unwrap();
        info.y_history.fill(-99.0);
        info.x_train.fill(-99.0);
        info.x_new.fill(-99.0);
        assert_eq!(panel, before);
    }

    #[test]
    fn csv_round_trip_keeps_missing_cells() {
        let text = "date,a,b,actual\n1,1.5,,0.5\n2,2.5,3.25,1.5\n";
        let panel = parse_panel(text, PanelFormat::Generic).unwrap();
        let mut buf = Vec::new();
        panel.write_csv(&mut buf).unwrap();
        let again = parse_panel(std::str::from_utf8(&buf).unwrap(), PanelFormat::Generic).unwrap();
        assert_eq!(again.missing_mask(), panel.missing_mask());
        assert_eq!(again.actuals(), panel.actuals());
    }
}
