//! Penalized regression by coordinate descent and the cross-validation
//! machinery built on it.

pub mod cv;
pub mod solver;

pub use cv::{
    contiguous_folds, cv_curve, cv_curves, fold_weights, linear_predictor, pick_lambda, CvCurve,
    CvError, CvScheme, ForwardCv, LambdaRule, Predictor,
};
pub use solver::{
    fit_path, fit_path_with, fit_penalized, fit_penalized_with, kkt_residual, objective, Fit,
    PenalizedSpec, SolverControl, SolverError,
};
