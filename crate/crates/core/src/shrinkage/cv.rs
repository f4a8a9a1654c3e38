//! Cross-validation curves over a penalty grid and the rules that pick a
//! penalty from them.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use thiserror::Error;

use super::solver::{fit_path, Fit, PenalizedSpec, SolverError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CvError {
    #[error("{scheme} cross-validation needs {constraint}; have n = {n}")]
    Infeasible {
        scheme: &'static str,
        constraint: String,
        n: usize,
    },
    #[error("empty lambda grid")]
    EmptyGrid,
    #[error("no finite cross-validation score")]
    NoFiniteScore,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Walk-forward validation: fold `f` trains on the first `min_train + f - 1`
/// rows and scores the following `horizon_weights.len()` rows.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardCv {
    /// Weight of the error `s` steps past the training block (`s = 1, 2, ...`).
    pub horizon_weights: Vec<f64>,
    /// Fold `f` of `F` gets weight proportional to `fold_decay^(F - f)`.
    pub fold_decay: f64,
    pub min_train: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CvScheme {
    Loo,
    /// Contiguous, deterministic blocks.
    KFold(usize),
    Forward(ForwardCv),
}

impl CvScheme {
    pub fn tag(&self) -> &'static str {
        match self {
            CvScheme::Loo => "loo",
            CvScheme::KFold(_) => "kfold",
            CvScheme::Forward(_) => "forward",
        }
    }

    pub fn check(&self, n: usize) -> Result<(), CvError> {
        let infeasible = |constraint: String| {
            Err(CvError::Infeasible {
                scheme: self.tag(),
                constraint,
                n,
            })
        };
        match self {
            CvScheme::Loo if n < 3 => infeasible("n >= 3".into()),
            CvScheme::KFold(m) if *m < 2 || n < *m => infeasible(format!("2 <= folds ({m}) <= n")),
            CvScheme::Forward(fwd) => {
                let horizon = fwd.horizon_weights.len();
                if horizon == 0 || fwd.min_train == 0 {
                    return infeasible("at least one horizon and min_train >= 1".into());
                }
                if n < fwd.min_train + horizon {
                    return infeasible(format!(
                        "n >= min_train + horizon = {}",
                        fwd.min_train + horizon
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Mean held-out loss per penalty level.
#[derive(Clone, Debug, PartialEq)]
pub struct CvCurve {
    pub lambdas: Vec<f64>,
    pub scores: Vec<f64>,
    /// Standard error across folds; unavailable for forward validation.
    pub score_se: Option<Vec<f64>>,
    pub scheme: &'static str,
    pub folds: usize,
}

impl CvCurve {
    /// Index of the smallest finite score; ties go to the largest lambda.
    pub fn argmin(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, s) in self.scores.iter().enumerate() {
            if s.is_finite() && best.is_none_or(|b| *s < self.scores[b]) {
                best = Some(i);
            }
        }
        best
    }
}

/// Rule for reading a penalty level off a curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LambdaRule {
    Min,
    /// Largest lambda whose score is within `c` standard errors (taken at
    /// the minimizer) of the minimum.
    WithinSe(f64),
    /// Every lambda whose score is at most `(1 + p)` times the minimum.
    WithinPct(f64),
}

/// Grid indices selected by `rule`, in grid order.
pub fn pick_lambda(curve: &CvCurve, rule: LambdaRule) -> Result<Vec<usize>, CvError> {
    let best = curve.argmin().ok_or(CvError::NoFiniteScore)?;
    let min = curve.scores[best];
    match rule {
        LambdaRule::Min => Ok(vec![best]),
        LambdaRule::WithinSe(c) => {
            let se = curve.score_se.as_ref().map_or(0.0, |se| se[best]);
            let bound = min + c * if se.is_finite() { se } else { 0.0 };
            let first = curve
                .scores
                .iter()
                .position(|s| s.is_finite() && *s <= bound)
                .unwrap_or(best);
            Ok(vec![first])
        }
        LambdaRule::WithinPct(p) => {
            let bound = (1.0 + p) * min;
            Ok(curve
                .scores
                .iter()
                .enumerate()
                .filter(|(_, s)| s.is_finite() && **s <= bound)
                .map(|(i, _)| i)
                .collect())
        }
    }
}

/// A rule mapping a fitted model and one row of regressors to a forecast.
pub type Predictor<'a> = &'a (dyn Fn(&Fit, ArrayView1<'_, f64>) -> f64 + Sync);

/// Ordinary prediction `b0 + x'beta`.
pub fn linear_predictor(fit: &Fit, row: ArrayView1<'_, f64>) -> f64 {
    fit.predict(row)
}

/// Cross-validation curve for one predictor.
pub fn cv_curve(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    lambdas: &[f64],
    scheme: &CvScheme,
    spec: &PenalizedSpec,
    predictor: Predictor<'_>,
) -> Result<CvCurve, CvError> {
    let mut curves = cv_curves(x, y, lambdas, scheme, spec, &[predictor])?;
    Ok(curves.remove(0))
}

/// Cross-validation curves for several predictors sharing the same fits.
pub fn cv_curves(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    lambdas: &[f64],
    scheme: &CvScheme,
    spec: &PenalizedSpec,
    predictors: &[Predictor<'_>],
) -> Result<Vec<CvCurve>, CvError> {
    if lambdas.is_empty() {
        return Err(CvError::EmptyGrid);
    }
    let n = y.len();
    scheme.check(n)?;
    match scheme {
        CvScheme::Loo => {
            let folds: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
            held_out_curves(x, y, lambdas, spec, predictors, &folds, "loo")
        }
        CvScheme::KFold(m) => {
            let folds = contiguous_folds(n, *m);
            held_out_curves(x, y, lambdas, spec, predictors, &folds, "kfold")
        }
        CvScheme::Forward(fwd) => forward_curves(x, y, lambdas, spec, predictors, fwd),
    }
}

/// `m` contiguous blocks whose sizes differ by at most one; earlier blocks
/// take the remainder.
pub fn contiguous_folds(n: usize, m: usize) -> Vec<Vec<usize>> {
    let base = n / m;
    let extra = n % m;
    let mut start = 0;
    (0..m)
        .map(|f| {
            let size = base + usize::from(f < extra);
            let fold: Vec<usize> = (start..start + size).collect();
            start += size;
            fold
        })
        .collect()
}

fn complement(n: usize, held: &[usize]) -> Vec<usize> {
    (0..n).filter(|i| !held.contains(i)).collect()
}

fn held_out_curves(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    lambdas: &[f64],
    spec: &PenalizedSpec,
    predictors: &[Predictor<'_>],
    folds: &[Vec<usize>],
    scheme: &'static str,
) -> Result<Vec<CvCurve>, CvError> {
    let n = y.len();
    let (p, l) = (predictors.len(), lambdas.len());
    // fold_loss[pred][fold][lambda]: mean squared error on the fold.
    let mut fold_loss = vec![vec![vec![0.0; l]; folds.len()]; p];
    for (f, held) in folds.iter().enumerate() {
        let keep = complement(n, held);
        let xt: Array2<f64> = x.select(Axis(0), &keep);
        let yt: Array1<f64> = y.select(Axis(0), &keep);
        let fits = fit_path(xt.view(), yt.view(), lambdas, spec, None)?;
        for (pi, predictor) in predictors.iter().enumerate() {
            for (li, fit) in fits.iter().enumerate() {
                let sse: f64 = held
                    .iter()
                    .map(|&i| (y[i] - predictor(fit, x.row(i))).powi(2))
                    .sum();
                fold_loss[pi][f][li] = sse / held.len() as f64;
            }
        }
    }
    let m = folds.len() as f64;
    Ok(fold_loss
        .into_iter()
        .map(|per_fold| {
            let mut scores = Vec::with_capacity(l);
            let mut se = Vec::with_capacity(l);
            for li in 0..l {
                let means: Vec<f64> = per_fold.iter().map(|f| f[li]).collect();
                // Overall mean over observations: fold means weighted by size.
                let score = folds
                    .iter()
                    .zip(&means)
                    .map(|(fold, mean)| mean * fold.len() as f64)
                    .sum::<f64>()
                    / n as f64;
                let centre = means.iter().sum::<f64>() / m;
                let var = means.iter().map(|v| (v - centre).powi(2)).sum::<f64>() / (m - 1.0);
                scores.push(score);
                se.push((var / m).sqrt());
            }
            CvCurve {
                lambdas: lambdas.to_vec(),
                scores,
                score_se: Some(se),
                scheme,
                folds: folds.len(),
            }
        })
        .collect())
}

/// Normalized fold weights `gamma^(F - f)` for folds `f = 1..=F`.
pub fn fold_weights(folds: usize, decay: f64) -> Vec<f64> {
    let raw: Vec<f64> = (1..=folds)
        .map(|f| decay.powi((folds - f) as i32))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

fn forward_curves(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    lambdas: &[f64],
    spec: &PenalizedSpec,
    predictors: &[Predictor<'_>],
    fwd: &ForwardCv,
) -> Result<Vec<CvCurve>, CvError> {
    let n = y.len();
    let horizon = fwd.horizon_weights.len();
    let folds = n - horizon - fwd.min_train + 1;
    let weights = fold_weights(folds, fwd.fold_decay);
    let (p, l) = (predictors.len(), lambdas.len());
    let mut scores = vec![vec![0.0; l]; p];
    for (f, wf) in weights.iter().enumerate() {
        let train = fwd.min_train + f;
        let fits = fit_path(
            x.slice(s![..train, ..]),
            y.slice(s![..train]),
            lambdas,
            spec,
            None,
        )?;
        for (pi, predictor) in predictors.iter().enumerate() {
            for (li, fit) in fits.iter().enumerate() {
                let loss: f64 = fwd
                    .horizon_weights
                    .iter()
                    .enumerate()
                    .map(|(step, hw)| {
                        let row = train + step;
                        hw * (predictor(fit, x.row(row)) - y[row]).powi(2)
                    })
                    .sum();
                scores[pi][li] += wf * loss;
            }
        }
    }
    Ok(scores
        .into_iter()
        .map(|scores| CvCurve {
            lambdas: lambdas.to_vec(),
            scores,
            score_se: None,
            scheme: "forward",
            folds,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(scores: Vec<f64>, se: Option<Vec<f64>>) -> CvCurve {
        let lambdas = (0..scores.len()).map(|i| 10.0 / (i + 1) as f64).collect();
        CvCurve {
            lambdas,
            scores,
            score_se: se,
            scheme: "loo",
            folds: 3,
        }
    }

    #[test]
    fn min_rule_on_decreasing_scores_picks_smallest_lambda() {
        let c = curve(vec![5.0, 4.0, 3.0, 2.0], None);
        assert_eq!(pick_lambda(&c, LambdaRule::Min).unwrap(), vec![3]);
    }

    #[test]
    fn min_rule_ties_go_to_largest_lambda() {
        let c = curve(vec![3.0, 2.0, 2.0, 4.0], None);
        assert_eq!(pick_lambda(&c, LambdaRule::Min).unwrap(), vec![1]);
    }

    #[test]
    fn flat_curve_within_se_picks_largest_lambda() {
        let c = curve(vec![1.0; 5], Some(vec![0.1; 5]));
        assert_eq!(pick_lambda(&c, LambdaRule::WithinSe(1.5)).unwrap(), vec![0]);
    }

    #[test]
    fn within_se_uses_se_at_minimum() {
        let c = curve(vec![4.0, 2.6, 2.0, 2.2], Some(vec![9.0, 9.0, 0.4, 9.0]));
        // Bound 2.0 + 1.5 * 0.4 = 2.6.
        assert_eq!(pick_lambda(&c, LambdaRule::WithinSe(1.5)).unwrap(), vec![1]);
        assert_eq!(pick_lambda(&c, LambdaRule::WithinSe(1.0)).unwrap(), vec![2]);
    }

    #[test]
    fn within_pct_band() {
        let c = curve(vec![10.0, 10.05, 12.0], None);
        assert_eq!(
            pick_lambda(&c, LambdaRule::WithinPct(0.01)).unwrap(),
            vec![0, 1]
        );
    }

    #[test]
    fn non_finite_scores_skipped_or_rejected() {
        let c = curve(vec![f64::NAN, 3.0, f64::INFINITY], None);
        assert_eq!(pick_lambda(&c, LambdaRule::Min).unwrap(), vec![1]);
        let c = curve(vec![f64::NAN, f64::INFINITY], None);
        assert_eq!(
            pick_lambda(&c, LambdaRule::Min),
            Err(CvError::NoFiniteScore)
        );
    }

    #[test]
    fn contiguous_folds_cover_rows_once() {
        let folds = contiguous_folds(11, 5);
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 2, 2, 2, 2]);
        let flat: Vec<usize> = folds.concat();
        assert_eq!(flat, (0..11).collect::<Vec<_>>());
    }

    #[test]
    fn fold_weights_decay_towards_the_past() {
        let w = fold_weights(3, 0.5);
        let total = 0.25 + 0.5 + 1.0;
        assert_eq!(w, vec![0.25 / total, 0.5 / total, 1.0 / total]);
        assert_eq!(fold_weights(4, 1.0), vec![0.25; 4]);
    }

    #[test]
    fn infeasible_schemes_name_constraint() {
        assert!(matches!(
            CvScheme::Loo.check(2),
            Err(CvError::Infeasible { scheme: "loo", .. })
        ));
        assert!(CvScheme::KFold(5).check(4).is_err());
        let fwd = CvScheme::Forward(ForwardCv {
            horizon_weights: vec![0.05, 0.95],
            fold_decay: 0.75,
            min_train: 5,
        });
        assert!(fwd.check(6).is_err());
        assert!(fwd.check(7).is_ok());
    }
}
