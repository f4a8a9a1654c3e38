//! Log-equispaced penalty grids.

use std::ops::Deref;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("a lambda grid needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("log bounds must satisfy log_hi > log_lo, got {hi} and {lo}")]
    Bounds { hi: f64, lo: f64 },
    #[error("lambda grid must be strictly positive and strictly descending")]
    NotDescending,
}

/// Strictly positive, strictly descending penalty levels.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaGrid(Vec<f64>);

impl LambdaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self, GridError> {
        let positive = values.iter().all(|v| v.is_finite() && *v > 0.0);
        let descending = values.windows(2).all(|p| p[0] > p[1]);
        if values.is_empty() || !positive || !descending {
            return Err(GridError::NotDescending);
        }
        Ok(LambdaGrid(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Sub-grid of the given indices (kept in grid order).
    pub fn subset(&self, indices: &[usize]) -> LambdaGrid {
        let mut picked: Vec<usize> = indices.to_vec();
        picked.sort_unstable();
        picked.dedup();
        LambdaGrid(picked.into_iter().map(|i| self.0[i]).collect())
    }
}

impl Default for LambdaGrid {
    /// 200 points from `e^15` down to `e^-15`.
    fn default() -> Self {
        make_lambda_grid(200, 15.0, -15.0).expect("default grid bounds are valid")
    }
}

impl Deref for LambdaGrid {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// `n` penalty levels, log-equispaced and descending from `exp(log_hi)` to
/// `exp(log_lo)`.
pub fn make_lambda_grid(n: usize, log_hi: f64, log_lo: f64) -> Result<LambdaGrid, GridError> {
    if n < 2 {
        return Err(GridError::TooFewPoints(n));
    }
    if !log_hi.is_finite() || !log_lo.is_finite() || log_hi <= log_lo {
        return Err(GridError::Bounds {
            hi: log_hi,
            lo: log_lo,
        });
    }
    let step = (log_hi - log_lo) / (n - 1) as f64;
    let mut values: Vec<f64> = (0..n).map(|i| (log_hi - step * i as f64).exp()).collect();
    values[n - 1] = log_lo.exp();
    LambdaGrid::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_spans_e15_to_em15() {
        let grid = make_lambda_grid(200, 15.0, -15.0).unwrap();
        assert_eq!(grid.len(), 200);
        assert_eq!(grid[0], 15f64.exp());
        assert_eq!(grid[199], (-15f64).exp());
        assert_eq!(grid, LambdaGrid::default());
    }

    #[test]
    fn three_point_grid() {
        let grid = make_lambda_grid(3, 1.0, -1.0).unwrap();
        let expected = [1f64.exp(), 1.0, (-1f64).exp()];
        for (g, e) in grid.iter().zip(expected) {
            assert!((g - e).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_bounds_rejected() {
        assert_eq!(
            make_lambda_grid(2, 0.0, 0.0),
            Err(GridError::Bounds { hi: 0.0, lo: 0.0 })
        );
        assert_eq!(
            make_lambda_grid(1, 1.0, 0.0),
            Err(GridError::TooFewPoints(1))
        );
    }

    #[test]
    fn log_spacing_is_uniform() {
        let grid = make_lambda_grid(50, 3.0, -4.0).unwrap();
        let steps: Vec<f64> = grid.windows(2).map(|p| p[0].ln() - p[1].ln()).collect();
        for s in &steps {
            assert!((s - 7.0 / 49.0).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_must_descend() {
        assert!(LambdaGrid::new(vec![1.0, 2.0]).is_err());
        assert!(LambdaGrid::new(vec![1.0, 0.0]).is_err());
        assert!(LambdaGrid::new(vec![]).is_err());
    }
}
