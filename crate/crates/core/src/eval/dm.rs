//! Diebold–Mariano comparison with an equal-weighted cosine (EWC) long-run
//! variance and fixed-b Student-t reference.

use statrs::distribution::{ContinuousCDF, StudentsT};

use super::EvalError;

/// Outcome of a one-sided predictive-accuracy test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DmResult {
    pub stat: f64,
    /// `P(t_B > stat)`; small values favor the method.
    pub p_value: f64,
    /// Number of cosine basis functions (and degrees of freedom).
    pub basis: usize,
    /// Set when the loss differential has zero estimated variance.
    pub degenerate: bool,
}

/// Nearest even integer to `0.4 * T^(2/3)`, at least 2.
pub fn default_basis(t: usize) -> usize {
    let target = 0.4 * (t as f64).powf(2.0 / 3.0);
    let even = 2 * (target / 2.0).round() as usize;
    even.max(2)
}

/// One-sided test that `e_method` has lower squared-error loss than
/// `e_benchmark`. The loss differential is `e_benchmark^2 - e_method^2`.
pub fn dm_test_ewc(
    e_method: &[f64],
    e_benchmark: &[f64],
    basis: Option<usize>,
) -> Result<DmResult, EvalError> {
    let t = e_method.len();
    if t != e_benchmark.len() {
        return Err(EvalError::Config(format!(
            "error series lengths differ: {t} and {}",
            e_benchmark.len()
        )));
    }
    if t < 4 {
        return Err(EvalError::Config(format!(
            "DM test needs at least 4 periods, got {t}"
        )));
    }
    if e_method.iter().chain(e_benchmark).any(|v| !v.is_finite()) {
        return Err(EvalError::Config("DM test inputs must be finite".into()));
    }
    let b = basis.unwrap_or_else(|| default_basis(t));
    if b == 0 || b >= t {
        return Err(EvalError::Config(format!(
            "basis count {b} must lie in 1..{t}"
        )));
    }
    let d: Vec<f64> = e_method
        .iter()
        .zip(e_benchmark)
        .map(|(m, bm)| bm * bm - m * m)
        .collect();
    let n = t as f64;
    let mean = d.iter().sum::<f64>() / n;
    let scale = (2.0 / n).sqrt();
    let omega = (1..=b)
        .map(|j| {
            let lambda: f64 = d
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let arg = std::f64::consts::PI * j as f64 * (i as f64 + 0.5) / n;
                    arg.cos() * (v - mean)
                })
                .sum::<f64>()
                * scale;
            lambda * lambda
        })
        .sum::<f64>()
        / b as f64;
    if omega == 0.0 || !omega.is_finite() {
        let p_value = if mean > 0.0 {
            0.0
        } else if mean < 0.0 {
            1.0
        } else {
            0.5
        };
        let stat = if mean == 0.0 {
            0.0
        } else {
            mean.signum() * f64::INFINITY
        };
        return Ok(DmResult {
            stat,
            p_value,
            basis: b,
            degenerate: true,
        });
    }
    let stat = mean / (omega / n).sqrt();
    let reference = StudentsT::new(0.0, 1.0, b as f64)
        .map_err(|e| EvalError::Config(format!("t reference: {e}")))?;
    let tail = reference.sf(stat.abs());
    let p_value = if stat >= 0.0 { tail } else { 1.0 - tail };
    Ok(DmResult {
        stat,
        p_value,
        basis: b,
        degenerate: false,
    })
}
