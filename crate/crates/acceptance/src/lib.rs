//! Acceptance checks, one function per criterion.
//!
//! Criteria 1 and 2 need the original 70-row search panel, located through
//! `AUDITLOOP_ORIGINAL_PANEL`; without it they are skipped. Criterion 8 runs
//! on that panel when given and on the bundled demo panel otherwise.

mod data;
mod harness;
mod methods;
mod solver;

use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const PANEL_VAR: &str = "AUDITLOOP_ORIGINAL_PANEL";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    Skip,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Skip => "SKIP",
        })
    }
}

#[derive(Clone, Debug)]
pub struct Verdict {
    pub outcome: Outcome,
    pub detail: String,
    pub elapsed: Duration,
}

/// What the checks may use from the outside world.
#[derive(Clone, Debug)]
pub struct Env {
    /// A program that behaves like the `auditloop` binary.
    pub exe: PathBuf,
    pub original_panel: Option<PathBuf>,
    pub demo: PathBuf,
}

impl Env {
    pub fn from_process(exe: PathBuf) -> Self {
        Env {
            exe,
            original_panel: std::env::var_os(PANEL_VAR)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from),
            demo: Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo"),
        }
    }
}

type Check = fn(&Env) -> Result<Option<String>, String>;

pub struct Criterion {
    pub id: usize,
    pub title: &'static str,
    check: Check,
}

impl Criterion {
    /// Runs the check; `Ok(None)` from a check means skipped, a panic counts
    /// as a failure.
    pub fn run(&self, env: &Env) -> Verdict {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(|| (self.check)(env)));
        let (outcome, detail) = match result {
            Ok(Ok(Some(detail))) => (Outcome::Pass, detail),
            Ok(Ok(None)) => (Outcome::Skip, format!("{PANEL_VAR} is not set")),
            Ok(Err(detail)) => (Outcome::Fail, detail),
            Err(panic) => {
                let message = panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (Outcome::Fail, format!("panicked: {message}"))
            }
        };
        Verdict {
            outcome,
            detail,
            elapsed: start.elapsed(),
        }
    }
}

pub fn criteria() -> Vec<Criterion> {
    vec![
        Criterion {
            id: 1,
            title: "reference RMSEs of the deterministic methods",
            check: data::reference_rmses,
        },
        Criterion {
            id: 2,
            title: "ex post peLASSO with a fixed oracle penalty",
            check: data::expost_fixed,
        },
        Criterion {
            id: 3,
            title: "solver suite",
            check: solver::suite,
        },
        Criterion {
            id: 4,
            title: "method properties",
            check: methods::properties,
        },
        Criterion {
            id: 5,
            title: "evaluator call and score counts",
            check: methods::evaluator_counts,
        },
        Criterion {
            id: 6,
            title: "DM-EWC size and swap antisymmetry",
            check: methods::dm_size,
        },
        Criterion {
            id: 7,
            title: "harness integrity",
            check: harness::integrity,
        },
        Criterion {
            id: 8,
            title: "end-to-end scripted loop and report",
            check: data::end_to_end,
        },
    ]
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
}

fn ensure(ok: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message())
    }
}

fn within(elapsed: Duration, limit_secs: u64, what: &str) -> Result<(), String> {
    ensure(elapsed < Duration::from_secs(limit_secs), || {
        format!(
            "{what} took {:.1}s, limit {limit_secs}s",
            elapsed.as_secs_f64()
        )
    })
}
