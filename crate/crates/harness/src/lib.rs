//! An auditable specification-search loop.
//!
//! A run lives in a workspace directory holding an instruction contract, an
//! evaluator that must not change, and one editable candidate file. Every
//! evaluated candidate is snapshotted into a content-addressed store under
//! `.audit/` and logged to `results.tsv` before the keep/discard decision, so
//! an interrupted run can always be reconciled from disk.

mod config;
mod error;
mod fsutil;
mod isolation;
mod log;
mod run;
mod runner;
mod searcher;
mod store;

pub use config::{HoldoutManifest, RunConfig, RunRecord, SearcherConfig};
pub use error::{HarnessError, LockViolation};
pub use fsutil::{sha256_hex, write_atomic};
pub use isolation::scan_workspace;
pub use log::{parse_log, render_log, LogEntry, Status, LOG_HEADER};
pub use run::{
    init_run, init_run_with_fault, recover_session, run_loop, step, verify_evaluator_lock, Fault,
    FaultPoint, LoopReport, RunState, StopReason,
};
pub use runner::{run_command, Exit, Outcome};
pub use searcher::{ExternalSearcher, Proposal, ScriptedSearcher, SearchView, Searcher};
pub use store::{SnapshotRef, SnapshotStore};

/// Directory under the workspace holding run metadata and snapshots.
pub const AUDIT_DIR: &str = ".audit";
/// The experiment log, relative to the workspace.
pub const LOG_FILE: &str = "results.tsv";
