use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::error::HarnessError;
use crate::fsutil::sha256_hex;
use crate::log::LogEntry;
use crate::run::RunState;
use crate::runner::{run_command, Exit};

/// What a searcher may look at: the log so far and the best candidate.
#[derive(Clone, Debug)]
pub struct SearchView<'a> {
    pub workspace: &'a Path,
    pub candidate_path: PathBuf,
    pub log: &'a [LogEntry],
    pub best_content: Vec<u8>,
    pub candidates_evaluated: usize,
    pub budget: usize,
    pub remaining: usize,
    /// Content digests of every snapshot taken so far.
    pub evaluated: BTreeSet<String>,
}

impl<'a> SearchView<'a> {
    pub fn new(state: &'a RunState) -> Result<Self, HarnessError> {
        Ok(SearchView {
            workspace: &state.workspace,
            candidate_path: state.candidate_path(),
            log: &state.log,
            best_content: state.best_content()?,
            candidates_evaluated: state.candidates_evaluated(),
            budget: state.record.budget,
            remaining: state.remaining(),
            evaluated: state.store().refs()?.into_iter().map(|r| r.blob).collect(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Proposal {
    pub content: Vec<u8>,
    pub description: String,
}

pub trait Searcher {
    /// `Ok(None)` ends the search.
    fn next_candidate(&mut self, view: &SearchView<'_>) -> Result<Option<Proposal>, String>;
}

/// Proposes a fixed list of files in order. The position is taken from the
/// number of candidates already evaluated, so a recovered run resumes where
/// it stopped.
#[derive(Clone, Debug)]
pub struct ScriptedSearcher {
    proposals: Vec<Proposal>,
}

impl ScriptedSearcher {
    pub fn from_files(files: &[PathBuf]) -> Result<Self, HarnessError> {
        let proposals = files
            .iter()
            .map(|f| {
                let content = fs::read(f).map_err(|e| HarnessError::io(f, e))?;
                let description = f
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                Ok(Proposal {
                    content,
                    description,
                })
            })
            .collect::<Result<_, HarnessError>>()?;
        Ok(ScriptedSearcher { proposals })
    }

    pub fn new(proposals: Vec<Proposal>) -> Self {
        ScriptedSearcher { proposals }
    }

    pub fn len(&self) -> usize {
        self.proposals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proposals.is_empty()
    }
}

impl Searcher for ScriptedSearcher {
    fn next_candidate(&mut self, view: &SearchView<'_>) -> Result<Option<Proposal>, String> {
        Ok(self.proposals.get(view.candidates_evaluated).cloned())
    }
}

/// Delegates to an outside program, typically an agent wrapper.
///
/// The command runs in the workspace with `{workspace}` and `{remaining}`
/// expanded in its arguments and with these variables set:
///
/// - `AUDIT_WORKSPACE`, `AUDIT_CANDIDATE`: absolute paths
/// - `AUDIT_BUDGET_REMAINING`: experiments left in the soft budget
/// - `AUDIT_PROMPT`: the same budget as a sentence
///
/// Its proposal is whatever it leaves in the candidate file; the last
/// non-empty stdout line is the description. Exiting nonzero, or leaving the
/// candidate unchanged or equal to an earlier snapshot, ends the search.
#[derive(Clone, Debug)]
pub struct ExternalSearcher {
    pub command: Vec<String>,
    pub timeout: Duration,
    pub grace: Duration,
}

impl ExternalSearcher {
    pub fn new(command: Vec<String>) -> Self {
        ExternalSearcher {
            command,
            timeout: Duration::from_secs(1800),
            grace: Duration::from_secs(5),
        }
    }
}

impl Searcher for ExternalSearcher {
    fn next_candidate(&mut self, view: &SearchView<'_>) -> Result<Option<Proposal>, String> {
        let before = fs::read(&view.candidate_path).unwrap_or_default();
        let ws = view.workspace.to_string_lossy();
        let remaining = view.remaining.to_string();
        let argv: Vec<String> = self
            .command
            .iter()
            .map(|a| {
                a.replace("{workspace}", &ws)
                    .replace("{remaining}", &remaining)
            })
            .collect();
        let env = vec![
            ("AUDIT_WORKSPACE".to_string(), ws.to_string()),
            (
                "AUDIT_CANDIDATE".to_string(),
                view.candidate_path.to_string_lossy().into_owned(),
            ),
            ("AUDIT_BUDGET_REMAINING".to_string(), remaining.clone()),
            (
                "AUDIT_PROMPT".to_string(),
                format!("You have a budget of {remaining} more experiments. Stop after that."),
            ),
        ];
        let out = run_command(&argv, view.workspace, &env, self.timeout, self.grace);
        match out.exit {
            Exit::Code(0) => {}
            other => return Err(format!("searcher command ended with {other:?}")),
        }
        let after = fs::read(&view.candidate_path).map_err(|e| e.to_string())?;
        if after == before || view.evaluated.contains(&sha256_hex(&after)) {
            return Ok(None);
        }
        let description = out
            .stdout
            .lines()
            .rev()
            .map(str::trim)
            .find(|l| !l.is_empty())
            .map(str::to_string)
            .unwrap_or_else(|| format!("external proposal {}", view.candidates_evaluated + 1));
        Ok(Some(Proposal {
            content: after,
            description,
        }))
    }
}
