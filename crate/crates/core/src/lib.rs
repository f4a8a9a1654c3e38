//! Forecast-combination methods, penalized regression, and rolling-origin
//! evaluation for survey-forecaster panels.

pub mod combiners;
pub mod eval;
pub mod grid;
pub mod panel;
pub mod shrinkage;

pub use grid::{make_lambda_grid, GridError, LambdaGrid};
pub use panel::{
    build_info, impute_panel, load_panel, split_panel, Info, Panel, PanelError, PanelFormat,
};
