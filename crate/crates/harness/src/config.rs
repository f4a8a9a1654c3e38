use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

/// Holdout material that must never appear in the agent workspace.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoldoutManifest {
    /// Glob patterns matched against workspace-relative paths.
    #[serde(default)]
    pub patterns: Vec<String>,
    /// Row keys (quarter labels) of the holdout period.
    #[serde(default)]
    pub dates: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SearcherConfig {
    Scripted { candidates: Vec<PathBuf> },
    External { command: Vec<String> },
}

/// Operator-facing run configuration, usually read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub tag: String,
    pub workspace: PathBuf,
    #[serde(default = "default_contract")]
    pub contract: PathBuf,
    pub evaluator: PathBuf,
    pub candidate: PathBuf,
    /// Argument vector; `{candidate}` and `{evaluator}` expand to workspace paths.
    pub evaluator_command: Vec<String>,
    /// Further files locked alongside the evaluator, e.g. the panel.
    #[serde(default)]
    pub locked: Vec<PathBuf>,
    pub budget: usize,
    #[serde(default)]
    pub hard_cap: Option<usize>,
    #[serde(default = "default_session")]
    pub session_size: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_grace")]
    pub grace_secs: f64,
    #[serde(default = "default_baseline")]
    pub baseline_description: String,
    #[serde(default)]
    pub holdout: HoldoutManifest,
    #[serde(default)]
    pub searcher: Option<SearcherConfig>,
}

fn default_contract() -> PathBuf {
    PathBuf::from("program.md")
}

fn default_session() -> usize {
    1
}

fn default_timeout() -> f64 {
    1800.0
}

fn default_grace() -> f64 {
    5.0
}

fn default_baseline() -> String {
    "baseline".to_string()
}

impl RunConfig {
    /// A config with defaults for everything optional.
    pub fn new(
        tag: &str,
        workspace: impl Into<PathBuf>,
        evaluator: impl Into<PathBuf>,
        candidate: impl Into<PathBuf>,
        evaluator_command: Vec<String>,
        budget: usize,
    ) -> Self {
        RunConfig {
            tag: tag.to_string(),
            workspace: workspace.into(),
            contract: default_contract(),
            evaluator: evaluator.into(),
            candidate: candidate.into(),
            evaluator_command,
            locked: Vec::new(),
            budget,
            hard_cap: None,
            session_size: default_session(),
            timeout_secs: default_timeout(),
            grace_secs: default_grace(),
            baseline_description: default_baseline(),
            holdout: HoldoutManifest::default(),
            searcher: None,
        }
    }

    /// Parses TOML. A relative workspace and relative scripted candidate
    /// paths resolve against the directory holding the config file.
    pub fn from_toml_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut config: RunConfig = toml::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if config.workspace.is_relative() {
            config.workspace = base.join(&config.workspace);
        }
        if let Some(SearcherConfig::Scripted { candidates }) = &mut config.searcher {
            for c in candidates.iter_mut() {
                if c.is_relative() {
                    *c = base.join(&*c);
                }
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.tag.trim().is_empty() || self.tag.contains(['/', '\\', '\t', '\n']) {
            return bad("tag must be a non-empty single token");
        }
        if self.evaluator_command.is_empty() {
            return bad("evaluator_command is empty");
        }
        if self.budget == 0 {
            return bad("budget must be positive");
        }
        if self.session_size == 0 {
            return bad("session_size must be positive");
        }
        if let Some(cap) = self.hard_cap {
            if cap < self.budget {
                return bad("hard_cap below budget");
            }
        }
        for (name, secs) in [
            ("timeout_secs", self.timeout_secs),
            ("grace_secs", self.grace_secs),
        ] {
            if !(secs.is_finite() && secs > 0.0) {
                return Err(HarnessError::Config(format!("{name} must be positive")));
            }
        }
        for p in [&self.contract, &self.evaluator, &self.candidate]
            .into_iter()
            .chain(&self.locked)
        {
            if p.is_absolute() || p.components().any(|c| c.as_os_str() == "..") {
                return Err(HarnessError::Config(format!(
                    "{} must be relative to the workspace",
                    p.display()
                )));
            }
        }
        if self.candidate == self.evaluator || self.candidate == self.contract {
            return bad("candidate must differ from the locked files");
        }
        for p in &self.holdout.patterns {
            globset::Glob::new(p)
                .map_err(|e| HarnessError::Config(format!("holdout pattern {p}: {e}")))?;
        }
        Ok(())
    }
}

/// Settings persisted at init in `.audit/run.json`. Paths are workspace-relative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tag: String,
    pub contract: PathBuf,
    pub evaluator: PathBuf,
    pub candidate: PathBuf,
    pub evaluator_command: Vec<String>,
    /// Digest per locked file, contract and evaluator included.
    pub digests: BTreeMap<PathBuf, String>,
    pub budget: usize,
    pub hard_cap: usize,
    pub session_size: usize,
    pub timeout_ms: u64,
    pub grace_ms: u64,
    pub baseline_description: String,
    pub holdout: HoldoutManifest,
}

impl RunRecord {
    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn grace(&self) -> Duration {
        Duration::from_millis(self.grace_ms)
    }

    pub fn contract_hash(&self) -> &str {
        &self.digests[&self.contract]
    }

    pub fn evaluator_hash(&self) -> &str {
        &self.digests[&self.evaluator]
    }
}
