use super::MethodError;

/// Weighted quantile by linear interpolation between order statistics.
///
/// Zero-weight entries are dropped. The sorted value `v_i` sits at the
/// cumulative position `(S_i - w_i) / (S_n - w_n)`, where `S_i` is the running
/// weight total, so equal weights reproduce the usual interpolated
/// ("type 7") sample quantile.
pub fn weighted_quantile(values: &[f64], weights: &[f64], q: f64) -> Result<f64, MethodError> {
    if values.is_empty() {
        return Err(MethodError::Invalid("quantile of an empty set".into()));
    }
    if values.len() != weights.len() {
        return Err(MethodError::Invalid(format!(
            "{} values but {} weights",
            values.len(),
            weights.len()
        )));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(MethodError::Invalid(format!(
            "quantile level {q} outside [0, 1]"
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || values.iter().any(|v| !v.is_finite()) {
        return Err(MethodError::Invalid(
            "quantile inputs must be finite with weights >= 0".into(),
        ));
    }
    let mut pairs: Vec<(f64, f64)> = values
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(v, w)| (*v, *w))
        .collect();
    if pairs.is_empty() {
        return Err(MethodError::Invalid("quantile weights sum to zero".into()));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pairs.len();
    if n == 1 {
        return Ok(pairs[0].0);
    }
    let mut cumulative = Vec::with_capacity(n);
    let mut running = 0.0;
    for (_, w) in &pairs {
        running += w;
        cumulative.push(running);
    }
    let span = cumulative[n - 1] - pairs[n - 1].1;
    let position = |i: usize| (cumulative[i] - pairs[i].1) / span;
    for i in 0..n - 1 {
        let (lo, hi) = (position(i), position(i + 1));
        if q <= hi {
            if q <= lo || hi == lo {
                return Ok(pairs[i].0);
            }
            let frac = (q - lo) / (hi - lo);
            return Ok(pairs[i].0 + frac * (pairs[i + 1].0 - pairs[i].0));
        }
    }
    Ok(pairs[n - 1].0)
}

/// Interpolated sample median.
pub fn median(values: &[f64]) -> Result<f64, MethodError> {
    weighted_quantile(values, &vec![1.0; values.len()], 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_value() {
        assert_eq!(weighted_quantile(&[4.2], &[0.3], 0.9).unwrap(), 4.2);
    }

    #[test]
    fn equal_weight_median() {
        assert_eq!(
            weighted_quantile(&[3.0, 1.0, 2.0], &[1.0; 3], 0.5).unwrap(),
            2.0
        );
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]).unwrap(), 2.5);
    }

    #[test]
    fn type7_quartile() {
        // (n - 1) * 0.25 = 0.75 of the way from 1 to 2.
        let v = weighted_quantile(&[1.0, 2.0, 3.0, 4.0], &[1.0; 4], 0.25).unwrap();
        assert!((v - 1.75).abs() < 1e-15);
    }

    #[test]
    fn zero_weights_dropped() {
        let v = weighted_quantile(&[100.0, 1.0, 3.0], &[0.0, 1.0, 1.0], 0.5).unwrap();
        assert_eq!(v, 2.0);
    }

    #[test]
    fn empty_and_bad_inputs() {
        assert!(weighted_quantile(&[], &[], 0.5).is_err());
        assert!(weighted_quantile(&[1.0], &[0.0], 0.5).is_err());
        assert!(weighted_quantile(&[1.0], &[1.0], 1.5).is_err());
    }
}
