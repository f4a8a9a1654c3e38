use ndarray::{s, ArrayView1, ArrayView2};

use super::{mean_over, Forecast, ForecastMethod, MethodError};
use crate::panel::Info;

/// Equal-weight mean of the current forecasts.
pub fn simple_average(info: &Info) -> f64 {
    info.x_new.mean().unwrap_or(f64::NAN)
}

#[derive(Clone, Debug, Default)]
pub struct SimpleAverage;

impl ForecastMethod for SimpleAverage {
    fn name(&self) -> &str {
        "simple_average"
    }

    fn forecast(&self, info: &Info) -> Result<Forecast, MethodError> {
        Ok(Forecast::new(simple_average(info), self.name()))
    }
}

/// Forecaster with the lowest RMSE on the training window (ties to the lower
/// index) and its current forecast.
pub fn best_individual(info: &Info) -> (usize, f64) {
    let x = &info.x_train;
    let y = &info.y_train;
    let mut best = (0, f64::INFINITY);
    for k in 0..x.ncols() {
        let sse: f64 = x
            .column(k)
            .iter()
            .zip(y)
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        if sse < best.1 {
            best = (k, sse);
        }
    }
    (best.0, info.x_new[best.0])
}

#[derive(Clone, Debug, Default)]
pub struct BestIndividual;

impl ForecastMethod for BestIndividual {
    fn name(&self) -> &str {
        "best_individual"
    }

    fn forecast(&self, info: &Info) -> Result<Forecast, MethodError> {
        Ok(Forecast::new(best_individual(info).1, self.name()))
    }
}

/// The winning subset of a best-subset search.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsetChoice {
    /// 0-based forecaster columns, ascending.
    pub indices: Vec<usize>,
    /// Number of most recent rows the criterion was computed on.
    pub window: usize,
    /// Training RMSE of the equal-weight average.
    pub criterion_value: f64,
    /// (subset, window) pairs examined.
    pub evaluated: usize,
}

impl SubsetChoice {
    fn beats(&self, other: &SubsetChoice) -> bool {
        if self.criterion_value != other.criterion_value {
            return self.criterion_value < other.criterion_value;
        }
        if self.indices.len() != other.indices.len() {
            return self.indices.len() < other.indices.len();
        }
        if self.indices != other.indices {
            return self.indices < other.indices;
        }
        self.window > other.window
    }
}

struct Search<'a> {
    x: ArrayView2<'a, f64>,
    y: ArrayView1<'a, f64>,
    n_max: usize,
    windows: &'a [usize],
    /// `levels[d]`: row sums over the first `d` chosen columns.
    levels: Vec<Vec<f64>>,
    chosen: Vec<usize>,
    tail_sse: Vec<f64>,
    best: Option<SubsetChoice>,
    evaluated: usize,
}

impl Search<'_> {
    fn visit(&mut self, next: usize) {
        let depth = self.chosen.len();
        for k in next..self.x.ncols() {
            self.chosen.push(k);
            let x = self.x;
            let (done, rest) = self.levels.split_at_mut(depth + 1);
            for ((s, prev), v) in rest[0].iter_mut().zip(&done[depth]).zip(x.column(k)) {
                *s = prev + v;
            }
            self.score();
            if self.chosen.len() < self.n_max {
                self.visit(k + 1);
            }
            self.chosen.pop();
        }
    }

    fn score(&mut self) {
        let rows = self.y.len();
        let size = self.chosen.len() as f64;
        // tail_sse[l] holds the squared error summed over the l newest rows.
        let mut acc = 0.0;
        self.tail_sse[0] = 0.0;
        for l in 1..=rows {
            let r = rows - l;
            let e = self.levels[self.chosen.len()][r] / size - self.y[r];
            acc += e * e;
            self.tail_sse[l] = acc;
        }
        for &w in self.windows {
            self.evaluated += 1;
            let candidate = SubsetChoice {
                indices: self.chosen.clone(),
                window: w,
                criterion_value: (self.tail_sse[w] / w as f64).sqrt(),
                evaluated: 0,
            };
            if self.best.as_ref().is_none_or(|b| candidate.beats(b)) {
                self.best = Some(candidate);
            }
        }
    }
}

/// Exhaustive search over all subsets of at most `n_max` forecasters for the
/// equal-weight average with the lowest training RMSE.
///
/// Without `windows` the criterion uses the training window. With `windows`,
/// each length is scored on that many most recent history rows (lengths
/// beyond the available history are clipped to it). Ties prefer the smaller
/// subset, then the lexicographically smaller index list, then the longer
/// window.
pub fn best_subset_average(
    info: &Info,
    n_max: usize,
    windows: Option<&[usize]>,
) -> Result<(f64, SubsetChoice), MethodError> {
    if n_max == 0 {
        return Err(MethodError::Invalid(
            "subset size limit must be at least 1".into(),
        ));
    }
    let (x, y, mut lengths) = match windows {
        None => (
            info.x_train.view(),
            info.y_train.view(),
            vec![info.train_len()],
        ),
        Some(ws) => {
            if ws.is_empty() || ws.contains(&0) {
                return Err(MethodError::Invalid(
                    "window candidates must be non-empty and positive".into(),
                ));
            }
            let history = info.y_history.len();
            let lengths: Vec<usize> = ws.iter().map(|w| (*w).min(history)).collect();
            let longest = *lengths.iter().max().expect("non-empty");
            let start = history - longest;
            (
                info.x_history.slice(s![start.., ..]),
                info.y_history.slice(s![start..]),
                lengths,
            )
        }
    };
    lengths.sort_unstable_by(|a, b| b.cmp(a));
    lengths.dedup();
    let mut search = Search {
        x,
        y,
        n_max: n_max.min(x.ncols()),
        windows: &lengths,
        levels: vec![vec![0.0; y.len()]; n_max.min(x.ncols()) + 1],
        chosen: Vec::new(),
        tail_sse: vec![0.0; y.len() + 1],
        best: None,
        evaluated: 0,
    };
    search.visit(0);
    let mut choice = search
        .best
        .ok_or_else(|| MethodError::Invalid("no forecasters to choose from".into()))?;
    choice.evaluated = search.evaluated;
    Ok((mean_over(info.x_new.view(), &choice.indices), choice))
}

/// Best equal-weight subset average, optionally with a searched window.
#[derive(Clone, Debug)]
pub struct BestSubsetAverage {
    pub name: String,
    pub n_max: usize,
    pub windows: Option<Vec<usize>>,
}

impl BestSubsetAverage {
    /// Subsets of at most six on the training window.
    pub fn fixed_window() -> Self {
        BestSubsetAverage {
            name: "best_subset_avg".into(),
            n_max: 6,
            windows: None,
        }
    }

    /// Subsets of at most six, window lengths 4 through 40.
    pub fn searched_window() -> Self {
        BestSubsetAverage {
            name: "best_subset_window_avg".into(),
            n_max: 6,
            windows: Some((4..=40).collect()),
        }
    }
}

impl ForecastMethod for BestSubsetAverage {
    fn name(&self) -> &str {
        &self.name
    }

    fn forecast(&self, info: &Info) -> Result<Forecast, MethodError> {
        let (value, _) = best_subset_average(info, self.n_max, self.windows.as_deref())?;
        Ok(Forecast::new(value, self.name()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::LambdaGrid;
    use ndarray::{array, Array2};

    fn info(x: Array2<f64>, y: Vec<f64>, x_new: Vec<f64>, w: usize) -> Info {
        Info::new(x, y.into(), x_new.into(), w, LambdaGrid::default()).unwrap()
    }

    #[test]
    fn simple_average_examples() {
        let i = info(array![[0.0, 0.0, 0.0]], vec![1.0], vec![1.0, 2.0, 3.0], 20);
        assert_eq!(simple_average(&i), 2.0);
        let i = info(array![[0.0, 0.0]], vec![1.0], vec![4.5, 4.5], 20);
        assert_eq!(simple_average(&i), 4.5);
    }

    #[test]
    fn exact_forecaster_is_best_individual() {
        let x = array![[1.0, 2.0, 0.0], [2.0, 3.0, 5.0], [0.0, 1.0, 1.0]];
        let i = info(x, vec![2.0, 3.0, 1.0], vec![7.0, 8.0, 9.0], 20);
        assert_eq!(best_individual(&i), (1, 8.0));
        let i = info(array![[1.0]], vec![3.0], vec![2.5], 20);
        assert_eq!(best_individual(&i), (0, 2.5));
    }

    #[test]
    fn k3_nmax2_evaluates_six_subsets() {
        let x = array![[1.0, 2.0, 4.0], [2.0, 1.0, 3.0], [0.5, 2.5, 1.0]];
        let i = info(x, vec![1.7, 1.4, 1.9], vec![1.0, 2.0, 3.0], 20);
        let (_, choice) = best_subset_average(&i, 2, None).unwrap();
        assert_eq!(choice.evaluated, 6);
    }

    #[test]
    fn exact_singleton_wins() {
        let x = array![[1.0, 2.0, 4.0], [2.0, 1.0, 3.0], [0.5, 2.5, 1.0]];
        let i = info(x, vec![4.0, 3.0, 1.0], vec![1.0, 2.0, 3.0], 20);
        let (value, choice) = best_subset_average(&i, 3, None).unwrap();
        assert_eq!(choice.indices, vec![2]);
        assert_eq!(choice.criterion_value, 0.0);
        assert_eq!(value, 3.0);
    }

    #[test]
    fn windows_are_clipped_to_history() {
        let x = array![[1.0, 2.0], [2.0, 1.0]];
        let i = info(x, vec![1.5, 1.5], vec![1.0, 2.0], 20);
        let (_, choice) = best_subset_average(&i, 2, Some(&[40, 60])).unwrap();
        assert_eq!(choice.window, 2);
        assert_eq!(choice.evaluated, 3);
        assert!(best_subset_average(&i, 2, Some(&[])).is_err());
    }
}
