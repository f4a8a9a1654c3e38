use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use auditloop_core::eval::parse_score;

use crate::config::{RunConfig, RunRecord};
use crate::error::{HarnessError, LockViolation};
use crate::fsutil::{append_line, one_line, read, sha256_hex, write_atomic};
use crate::isolation::scan_workspace;
use crate::log::{parse_log, round4, LogEntry, Status, LOG_HEADER};
use crate::runner::{run_command, Exit};
use crate::searcher::{SearchView, Searcher};
use crate::store::{SnapshotRef, SnapshotStore};
use crate::{AUDIT_DIR, LOG_FILE};

/// Boundaries inside one experiment where a test can simulate a crash of
/// the driver itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FaultPoint {
    /// Candidate written to the workspace, no snapshot yet.
    BeforeSnapshot,
    AfterSnapshot,
    /// Evaluator finished, nothing logged.
    AfterEvaluation,
    /// Row appended, keep/revert not applied.
    AfterLog,
    AfterDecision,
}

impl FaultPoint {
    pub const ALL: [FaultPoint; 5] = [
        FaultPoint::BeforeSnapshot,
        FaultPoint::AfterSnapshot,
        FaultPoint::AfterEvaluation,
        FaultPoint::AfterLog,
        FaultPoint::AfterDecision,
    ];
}

/// Makes the driver stop with [`HarnessError::Interrupted`] at `point` of
/// experiment `experiment` (0 is the baseline).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fault {
    pub point: FaultPoint,
    pub experiment: usize,
}

#[derive(Debug)]
pub struct RunState {
    pub workspace: PathBuf,
    pub record: RunRecord,
    pub log: Vec<LogEntry>,
    pub best_score: f64,
    /// Short id of the best snapshot; empty before the baseline is logged.
    pub best_snapshot: String,
    best_blob: Option<String>,
    store: SnapshotStore,
    pub fault: Option<Fault>,
}

impl RunState {
    pub fn tag(&self) -> &str {
        &self.record.tag
    }

    /// Log rows, baseline included.
    pub fn experiments_done(&self) -> usize {
        self.log.len()
    }

    /// Log rows after the baseline; the budget counts these.
    pub fn candidates_evaluated(&self) -> usize {
        self.log.len().saturating_sub(1)
    }

    pub fn remaining(&self) -> usize {
        self.record
            .budget
            .saturating_sub(self.candidates_evaluated())
    }

    pub fn store(&self) -> &SnapshotStore {
        &self.store
    }

    pub fn candidate_path(&self) -> PathBuf {
        self.workspace.join(&self.record.candidate)
    }

    pub fn log_path(&self) -> PathBuf {
        self.workspace.join(LOG_FILE)
    }

    /// Evaluator output of experiment `k`.
    pub fn output_path(&self, k: usize) -> PathBuf {
        self.workspace
            .join(AUDIT_DIR)
            .join("logs")
            .join(format!("{k:04}.log"))
    }

    pub fn best_content(&self) -> Result<Vec<u8>, HarnessError> {
        match &self.best_blob {
            Some(b) => self.store.content(b),
            None => Err(HarnessError::CorruptStore("no baseline snapshot".into())),
        }
    }

    /// Reads the run back from disk, checking the log against the store and
    /// replaying every keep/discard decision.
    pub fn load(workspace: &Path) -> Result<Self, HarnessError> {
        let workspace = &fs::canonicalize(workspace)
            .map_err(|_| HarnessError::NotInitialized(workspace.to_path_buf()))?;
        let audit = workspace.join(AUDIT_DIR);
        let meta = audit.join("run.json");
        if !meta.exists() {
            return Err(HarnessError::NotInitialized(workspace.to_path_buf()));
        }
        let record = read_record(&meta)?;
        let store = SnapshotStore::open(&audit);
        let refs = store.refs()?;
        let log_path = workspace.join(LOG_FILE);
        let text = fs::read_to_string(&log_path).map_err(|e| HarnessError::io(&log_path, e))?;
        let log = parse_log(&text)?;
        if refs.len() < log.len() || refs.len() > log.len() + 1 {
            return Err(HarnessError::CorruptStore(format!(
                "{} snapshots for {} log rows",
                refs.len(),
                log.len()
            )));
        }

        let mut best_score = f64::INFINITY;
        let mut best: Option<&SnapshotRef> = None;
        for (e, r) in log.iter().zip(&refs) {
            let line = e.index + 2;
            let bad = |reason: String| HarnessError::CorruptLog { line, reason };
            if e.snapshot != r.short_id() {
                return Err(bad(format!(
                    "commit {} is not snapshot {}",
                    e.snapshot, r.index
                )));
            }
            if e.description != r.description {
                return Err(bad("description differs from the snapshot's".into()));
            }
            let expected = if e.score.is_infinite() {
                Status::Crash
            } else if e.score < best_score {
                Status::Keep
            } else {
                Status::Discard
            };
            if e.status != expected || (e.index == 0 && e.status != Status::Keep) {
                return Err(bad(format!("status {} inconsistent with scores", e.status)));
            }
            if e.status == Status::Keep {
                best_score = e.score;
                best = Some(r);
            }
        }
        Ok(RunState {
            workspace: workspace.to_path_buf(),
            best_snapshot: best.map(|r| r.short_id().to_string()).unwrap_or_default(),
            best_blob: best.map(|r| r.blob.clone()),
            best_score,
            record,
            log,
            store,
            fault: None,
        })
    }

    fn checkpoint(&self, point: FaultPoint, experiment: usize) -> Result<(), HarnessError> {
        match self.fault {
            Some(f) if f.point == point && f.experiment == experiment => {
                Err(HarnessError::Interrupted { point, experiment })
            }
            _ => Ok(()),
        }
    }

    fn restore_candidate(&self) -> Result<(), HarnessError> {
        let best = self.best_content()?;
        let path = self.candidate_path();
        if fs::read(&path).ok().as_deref() != Some(&best[..]) {
            write_atomic(&path, &best)?;
        }
        Ok(())
    }
}

fn absolute(path: &Path) -> Result<PathBuf, HarnessError> {
    fs::canonicalize(path).map_err(|e| HarnessError::io(path, e))
}

fn read_record(meta: &Path) -> Result<RunRecord, HarnessError> {
    serde_json::from_slice(&read(meta)?)
        .map_err(|e| HarnessError::CorruptStore(format!("run.json: {e}")))
}

/// Recomputes the digest of every locked file.
pub fn verify_evaluator_lock(state: &RunState) -> Result<(), LockViolation> {
    for (rel, digest) in &state.record.digests {
        let reason = match fs::read(state.workspace.join(rel)) {
            Err(_) => "is missing",
            Ok(bytes) if sha256_hex(&bytes) != *digest => "changed since init",
            Ok(_) => continue,
        };
        return Err(LockViolation {
            file: rel.clone(),
            reason: reason.to_string(),
        });
    }
    Ok(())
}

pub fn init_run(config: &RunConfig) -> Result<RunState, HarnessError> {
    init_run_with_fault(config, None)
}

/// [`init_run`] with a fault armed from the first instruction.
pub fn init_run_with_fault(
    config: &RunConfig,
    fault: Option<Fault>,
) -> Result<RunState, HarnessError> {
    config.validate()?;
    if !config.workspace.is_dir() {
        return Err(HarnessError::Config(format!(
            "workspace {} is not a directory",
            config.workspace.display()
        )));
    }
    let ws = &absolute(&config.workspace)?;
    let audit = ws.join(AUDIT_DIR);
    let meta = audit.join("run.json");
    if meta.exists() {
        let existing = read_record(&meta)?.tag;
        return Err(if existing == config.tag {
            HarnessError::TagCollision(existing)
        } else {
            HarnessError::WorkspaceInUse { existing }
        });
    }
    if audit.exists() || ws.join(LOG_FILE).exists() {
        return Err(HarnessError::Config(format!(
            "{} holds leftovers of an earlier run",
            ws.display()
        )));
    }

    let mut digests = BTreeMap::new();
    for rel in [&config.contract, &config.evaluator]
        .into_iter()
        .chain(&config.locked)
    {
        let path = ws.join(rel);
        if !path.is_file() {
            return Err(HarnessError::Config(format!(
                "{} not found",
                path.display()
            )));
        }
        digests.insert(rel.clone(), sha256_hex(&read(&path)?));
    }
    let baseline = read(&ws.join(&config.candidate))?;
    scan_workspace(ws, &config.holdout)?;

    let record = RunRecord {
        tag: config.tag.clone(),
        contract: config.contract.clone(),
        evaluator: config.evaluator.clone(),
        candidate: config.candidate.clone(),
        evaluator_command: config.evaluator_command.clone(),
        digests,
        budget: config.budget,
        hard_cap: config.hard_cap.unwrap_or(2 * config.budget),
        session_size: config.session_size,
        timeout_ms: (config.timeout_secs * 1000.0).round() as u64,
        grace_ms: (config.grace_secs * 1000.0).round() as u64,
        baseline_description: config.baseline_description.clone(),
        holdout: config.holdout.clone(),
    };
    let store = SnapshotStore::create(&audit)?;
    let logs = audit.join("logs");
    fs::create_dir_all(&logs).map_err(|e| HarnessError::io(&logs, e))?;
    write_atomic(&ws.join(LOG_FILE), format!("{LOG_HEADER}\n").as_bytes())?;
    let json =
        serde_json::to_vec_pretty(&record).map_err(|e| HarnessError::Config(e.to_string()))?;
    write_atomic(&meta, &json)?;

    let mut state = RunState {
        workspace: ws.clone(),
        record,
        log: Vec::new(),
        best_score: f64::INFINITY,
        best_snapshot: String::new(),
        best_blob: None,
        store,
        fault,
    };
    let timeout = state.record.timeout();
    let description = state.record.baseline_description.clone();
    let result = (|| {
        state.checkpoint(FaultPoint::BeforeSnapshot, 0)?;
        let snap = state.store.put(0, &baseline, &description)?;
        state.checkpoint(FaultPoint::AfterSnapshot, 0)?;
        evaluate_and_record(&mut state, &snap, timeout)
    })();
    match result {
        Ok(_) => Ok(state),
        Err(e @ HarnessError::InitFailed(_)) => {
            let _ = fs::remove_dir_all(&audit);
            let _ = fs::remove_file(ws.join(LOG_FILE));
            Err(e)
        }
        Err(e) => Err(e),
    }
}

/// One experiment: snapshot, evaluate, log, then keep or revert.
pub fn step(
    state: &mut RunState,
    content: &[u8],
    description: &str,
    timeout: Duration,
) -> Result<LogEntry, HarnessError> {
    verify_evaluator_lock(state)?;
    if state.log.is_empty() {
        return Err(HarnessError::CorruptStore("baseline not logged".into()));
    }
    if state.candidates_evaluated() >= state.record.hard_cap {
        return Err(HarnessError::BudgetExhausted {
            cap: state.record.hard_cap,
        });
    }
    let k = state.log.len();
    write_atomic(&state.candidate_path(), content)?;
    state.checkpoint(FaultPoint::BeforeSnapshot, k)?;
    let snap = state.store.put(k, content, description)?;
    state.checkpoint(FaultPoint::AfterSnapshot, k)?;
    evaluate_and_record(state, &snap, timeout)
}

fn evaluate_and_record(
    state: &mut RunState,
    snap: &SnapshotRef,
    timeout: Duration,
) -> Result<LogEntry, HarnessError> {
    let k = snap.index;
    let verdict = evaluate(state, snap, timeout)?;
    state.checkpoint(FaultPoint::AfterEvaluation, k)?;
    let entry = match verdict {
        Ok(score) => {
            let status = if round4(score) < state.best_score {
                Status::Keep
            } else {
                Status::Discard
            };
            LogEntry::new(k, snap.short_id(), score, status, &snap.description)
        }
        Err(reason) if k == 0 => return Err(HarnessError::InitFailed(reason)),
        Err(reason) => {
            log::warn!("experiment {k} crashed: {reason}");
            LogEntry::new(
                k,
                snap.short_id(),
                f64::INFINITY,
                Status::Crash,
                &snap.description,
            )
        }
    };
    append_line(&state.log_path(), &entry.to_row())?;
    state.log.push(entry.clone());
    state.checkpoint(FaultPoint::AfterLog, k)?;

    if entry.status == Status::Keep {
        state.best_score = entry.score;
        state.best_snapshot = entry.snapshot.clone();
        state.best_blob = Some(snap.blob.clone());
    } else {
        state.restore_candidate()?;
    }
    log::info!(
        "{} {} {:.4} {}",
        entry.snapshot,
        entry.status,
        entry.score,
        entry.description
    );
    state.checkpoint(FaultPoint::AfterDecision, k)?;
    Ok(entry)
}

/// Runs the evaluator on the candidate currently in the workspace. The inner
/// result is the score, or why the run counts as a crash. A transcript left
/// by an interrupted driver for the same snapshot is reused instead.
fn evaluate(
    state: &RunState,
    snap: &SnapshotRef,
    timeout: Duration,
) -> Result<Result<f64, String>, HarnessError> {
    let path = state.output_path(snap.index);
    if let Some(verdict) = fs::read_to_string(&path)
        .ok()
        .and_then(|t| read_transcript(&t, &snap.id))
    {
        log::info!("reusing evaluation of snapshot {}", snap.short_id());
        return Ok(verdict);
    }
    let ws = &state.workspace;
    let argv: Vec<String> = state
        .record
        .evaluator_command
        .iter()
        .map(|a| {
            a.replace(
                "{candidate}",
                &ws.join(&state.record.candidate).to_string_lossy(),
            )
            .replace(
                "{evaluator}",
                &ws.join(&state.record.evaluator).to_string_lossy(),
            )
            .replace("{workspace}", &ws.to_string_lossy())
        })
        .collect();
    let env = [("AUDIT_EXPERIMENT".to_string(), snap.index.to_string())];
    let out = run_command(&argv, ws, &env, timeout, state.record.grace());
    let verdict = match &out.exit {
        Exit::Code(0) => parse_score(&out.stdout).ok_or_else(|| "no rmse line".to_string()),
        Exit::Code(c) => Err(format!("exit code {c}")),
        Exit::Signaled => Err("killed by a signal".into()),
        Exit::TimedOut => Err(format!("timed out after {:.1}s", timeout.as_secs_f64())),
        Exit::SpawnFailed(m) => Err(m.clone()),
    };
    let verdict_line = match &verdict {
        Ok(s) => format!("score {s}"),
        Err(reason) => format!("crash {}", one_line(reason)),
    };
    let transcript = format!(
        "snapshot: {}\nverdict: {verdict_line}\nexit: {:?}\nelapsed_secs: {:.3}\n--- stdout\n{}--- stderr\n{}",
        snap.id,
        out.exit,
        out.elapsed.as_secs_f64(),
        out.stdout,
        out.stderr
    );
    write_atomic(&path, transcript.as_bytes())?;
    Ok(verdict)
}

fn read_transcript(text: &str, id: &str) -> Option<Result<f64, String>> {
    let mut lines = text.lines();
    if lines.next()?.strip_prefix("snapshot: ")? != id {
        return None;
    }
    let verdict = lines.next()?.strip_prefix("verdict: ")?;
    if let Some(score) = verdict.strip_prefix("score ") {
        return score.parse().ok().map(Ok);
    }
    verdict.strip_prefix("crash ").map(|r| Err(r.to_string()))
}

/// Rebuilds the run from disk and brings it to a consistent point: a
/// snapshot without a log row is evaluated and logged, and the workspace
/// candidate is reset to the best snapshot.
pub fn recover_session(workspace: &Path) -> Result<RunState, HarnessError> {
    recover_with(workspace, None)
}

fn recover_with(workspace: &Path, fault: Option<Fault>) -> Result<RunState, HarnessError> {
    let mut state = RunState::load(workspace)?;
    state.fault = fault;
    scan_workspace(workspace, &state.record.holdout)?;
    let refs = state.store.refs()?;
    let timeout = state.record.timeout();
    if refs.is_empty() {
        verify_evaluator_lock(&state)?;
        let baseline = read(&state.candidate_path())?;
        let description = state.record.baseline_description.clone();
        let snap = state.store.put(0, &baseline, &description)?;
        evaluate_and_record(&mut state, &snap, timeout)?;
    } else if refs.len() > state.log.len() {
        let pending = &refs[state.log.len()];
        log::info!("evaluating unlogged snapshot {}", pending.short_id());
        verify_evaluator_lock(&state)?;
        write_atomic(
            &state.candidate_path(),
            &state.store.content(&pending.blob)?,
        )?;
        evaluate_and_record(&mut state, pending, timeout)?;
    }
    state.restore_candidate()?;
    Ok(state)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// No new session may start: the soft budget is used up.
    BudgetReached,
    HardCap,
    SearcherDone,
    SearcherFailed(String),
}

#[derive(Debug)]
pub struct LoopReport {
    pub state: RunState,
    /// Candidates already evaluated when each session started.
    pub sessions: Vec<usize>,
    pub stop: StopReason,
}

/// Drives sessions of `session_size` proposals until the searcher is done
/// or the budget forbids another session. The best snapshot is left in the
/// workspace on return.
pub fn run_loop(state: RunState, searcher: &mut dyn Searcher) -> Result<LoopReport, HarnessError> {
    let mut state = state;
    let mut sessions = Vec::new();
    let stop = 'run: loop {
        if state.candidates_evaluated() >= state.record.budget {
            break StopReason::BudgetReached;
        }
        state = recover_with(&state.workspace.clone(), state.fault)?;
        if state.candidates_evaluated() >= state.record.budget {
            break StopReason::BudgetReached;
        }
        sessions.push(state.candidates_evaluated());
        for _ in 0..state.record.session_size {
            if state.candidates_evaluated() >= state.record.hard_cap {
                break 'run StopReason::HardCap;
            }
            let view = SearchView::new(&state)?;
            let proposal = match searcher.next_candidate(&view) {
                Ok(Some(p)) => p,
                Ok(None) => break 'run StopReason::SearcherDone,
                Err(e) => {
                    log::warn!("searcher failed: {e}");
                    break 'run StopReason::SearcherFailed(e);
                }
            };
            let timeout = state.record.timeout();
            step(
                &mut state,
                &proposal.content,
                &proposal.description,
                timeout,
            )?;
        }
    };
    state.restore_candidate()?;
    Ok(LoopReport {
        state,
        sessions,
        stop,
    })
}
