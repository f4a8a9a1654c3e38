//! The `auditloop` command line.
//!
//! Every verb is a thin adapter over the core and harness libraries; [`run`]
//! takes the argument vector and output streams so tests can drive it
//! in-process.

pub mod evaluator;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use auditloop_core::eval::{evaluator_block, make_report, ReportLayout, BENCHMARK};
use auditloop_harness::{
    init_run, recover_session, run_loop, scan_workspace, verify_evaluator_lock, ExternalSearcher,
    HarnessError, RunConfig, RunState, ScriptedSearcher, Searcher, SearcherConfig, Status,
    StopReason,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

use evaluator::{candidate_method, evaluate_method, resolve_method, EvaluatorFile, Settings};

/// Exit status classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Failure {
    /// Bad arguments, configuration or input data: exit 2.
    Validation(String),
    /// Evaluator lock, holdout isolation or log integrity broken: exit 3.
    Violation(String),
    /// A method or the loop failed while running: exit 4.
    Evaluation(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Violation(_) => 3,
            Failure::Evaluation(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(m) | Failure::Violation(m) | Failure::Evaluation(m) => {
                f.write_str(m)
            }
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        let msg = e.to_string();
        match e {
            HarnessError::Config(_)
            | HarnessError::TagCollision(_)
            | HarnessError::WorkspaceInUse { .. }
            | HarnessError::NotInitialized(_)
            | HarnessError::BudgetExhausted { .. } => Failure::Validation(msg),
            HarnessError::Lock(_)
            | HarnessError::Isolation { .. }
            | HarnessError::CorruptLog { .. }
            | HarnessError::CorruptStore(_) => Failure::Violation(msg),
            _ => Failure::Evaluation(msg),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "auditloop",
    version,
    about = "Forecast-combination evaluator and auditable search loop"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score methods on a panel, or score one candidate file.
    Evaluate(EvaluateArgs),
    /// Initialize a run and drive its searcher.
    Loop(LoopArgs),
    /// Reconcile an interrupted run.
    Recover(WorkspaceArgs),
    /// Summarize a run and report the methods it evaluated.
    Report(ReportArgs),
    /// Check locks, holdout isolation and log consistency.
    Verify(WorkspaceArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Tsv,
}

impl From<Format> for ReportLayout {
    fn from(f: Format) -> Self {
        match f {
            Format::Text => ReportLayout::Table,
            Format::Tsv => ReportLayout::Tsv,
        }
    }
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Evaluator file (TOML) with panel and window settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    panel: Option<PathBuf>,
    /// original_70, extended_106 or generic.
    #[arg(long)]
    panel_format: Option<String>,
    /// Comma-separated method names.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    /// File naming one method; prints only its evaluator block.
    #[arg(long, conflicts_with = "methods")]
    candidate: Option<PathBuf>,
    /// Extra holdout columns: `covid` or date labels.
    #[arg(long, value_delimiter = ',')]
    mask: Vec<String>,
    #[arg(long)]
    window: Option<usize>,
    /// First holdout date.
    #[arg(long)]
    holdout_start: Option<String>,
    #[arg(long, value_enum, default_value = "text")]
    report_format: Format,
}

#[derive(Debug, Args)]
struct LoopArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    budget: Option<usize>,
    /// Evaluator timeout in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long)]
    tag: Option<String>,
    /// Continue an existing run instead of initializing one.
    #[arg(long)]
    resume: bool,
}

#[derive(Debug, Args)]
struct WorkspaceArgs {
    #[arg(long)]
    workspace: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    workspace: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    report_format: Format,
}

/// Process-level facts the verbs need.
#[derive(Clone, Debug)]
pub struct Context {
    /// Substituted for `{self}` in configured commands.
    pub exe: PathBuf,
}

impl Context {
    pub fn current() -> Self {
        Context {
            exe: std::env::current_exe().unwrap_or_else(|_| PathBuf::from("auditloop")),
        }
    }
}

/// Parses `args` (program name first), runs the verb and returns the exit code.
pub fn run<I, T>(args: I, ctx: &Context, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Evaluate(a) => evaluate(a, out),
        Command::Loop(a) => run_loop_cmd(a, ctx, out),
        Command::Recover(a) => recover(a, out),
        Command::Report(a) => report(a, out),
        Command::Verify(a) => verify(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {f}");
            f.code()
        }
    }
}

fn io(e: std::io::Error) -> Failure {
    Failure::Evaluation(format!("writing output: {e}"))
}

fn settings_for(a: &EvaluateArgs) -> Result<Settings, Failure> {
    let mut file = match &a.config {
        Some(p) => EvaluatorFile::read(p)?,
        None => EvaluatorFile::default(),
    };
    if let Some(p) = &a.panel {
        file.panel = Some(p.clone());
    }
    if a.panel_format.is_some() {
        file.format = a.panel_format.clone();
    }
    if a.window.is_some() {
        file.window = a.window;
    }
    if a.holdout_start.is_some() {
        file.holdout_start = a.holdout_start.clone();
    }
    if !a.mask.is_empty() {
        file.mask = a.mask.clone();
    }
    Settings::from_file(file)
}

fn evaluate(a: EvaluateArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let settings = settings_for(&a)?;
    if let Some(path) = &a.candidate {
        // Evaluator role: a bad candidate is the candidate's failure.
        let content = std::fs::read_to_string(path)
            .map_err(|e| Failure::Evaluation(format!("{}: {e}", path.display())))?;
        let name = candidate_method(&content)
            .ok_or_else(|| Failure::Evaluation("candidate names no method".into()))?;
        let name = resolve_method(name).map_err(|f| Failure::Evaluation(f.to_string()))?;
        let panel = settings.load_panel()?;
        let result = evaluate_method(&panel, &settings, &name)?;
        return write!(out, "{}", evaluator_block(&result)).map_err(io);
    }
    if a.methods.is_empty() {
        return Err(Failure::Validation("give --methods or --candidate".into()));
    }
    let names = a
        .methods
        .iter()
        .map(|m| resolve_method(m))
        .collect::<Result<Vec<_>, _>>()?;
    let panel = settings.load_panel()?;
    let text = report_text(&panel, &settings, &names, a.report_format, out)?;
    write!(out, "{text}").map_err(io)
}

/// Evaluates `names` (benchmark added when missing) and renders the report.
/// In text layout the evaluator blocks are written to `out` first.
fn report_text(
    panel: &auditloop_core::Panel,
    settings: &Settings,
    names: &[String],
    format: Format,
    out: &mut dyn Write,
) -> Result<String, Failure> {
    let mut all: Vec<String> = Vec::new();
    if !names.iter().any(|n| n == BENCHMARK) {
        all.push(BENCHMARK.to_string());
    }
    for n in names {
        if !all.contains(n) {
            all.push(n.clone());
        }
    }
    let mut results = Vec::new();
    for name in &all {
        let result = evaluate_method(panel, settings, name)?;
        if format == Format::Text && names.contains(name) {
            write!(out, "{}", evaluator_block(&result)).map_err(io)?;
        }
        results.push(result);
    }
    let samples = settings.samples(panel);
    let mut text = make_report(&results, &samples, format.into(), settings.dm_basis)
        .map_err(|e| Failure::Evaluation(e.to_string()))?;
    if format == Format::Text {
        text.insert(0, '\n');
    }
    Ok(text)
}

fn substitute_self(args: &mut [String], exe: &Path) {
    let exe = exe.to_string_lossy();
    for a in args {
        *a = a.replace("{self}", &exe);
    }
}

fn run_loop_cmd(a: LoopArgs, ctx: &Context, out: &mut dyn Write) -> Result<(), Failure> {
    let mut config = RunConfig::from_toml_file(&a.config)?;
    if let Some(b) = a.budget {
        config.budget = b;
    }
    if let Some(t) = a.timeout {
        config.timeout_secs = t;
    }
    if let Some(t) = a.tag {
        config.tag = t;
    }
    substitute_self(&mut config.evaluator_command, &ctx.exe);
    let mut searcher: Box<dyn Searcher> = match &config.searcher {
        Some(SearcherConfig::Scripted { candidates }) => {
            Box::new(ScriptedSearcher::from_files(candidates)?)
        }
        Some(SearcherConfig::External { command }) => {
            let mut command = command.clone();
            substitute_self(&mut command, &ctx.exe);
            let mut s = ExternalSearcher::new(command);
            s.timeout = std::time::Duration::from_secs_f64(config.timeout_secs);
            Box::new(s)
        }
        None => return Err(Failure::Validation("run config has no [searcher]".into())),
    };
    let state = if a.resume {
        recover_session(&config.workspace)?
    } else {
        init_run(&config)?
    };
    let report = run_loop(state, searcher.as_mut())?;
    let stop = match &report.stop {
        StopReason::BudgetReached => "budget reached".to_string(),
        StopReason::HardCap => "hard cap reached".to_string(),
        StopReason::SearcherDone => "searcher done".to_string(),
        StopReason::SearcherFailed(e) => format!("searcher failed: {e}"),
    };
    let sessions: Vec<String> = report.sessions.iter().map(usize::to_string).collect();
    write!(out, "{}", summary(&report.state)).map_err(io)?;
    writeln!(out, "sessions:    {}", sessions.join(" ")).map_err(io)?;
    writeln!(out, "stop:        {stop}").map_err(io)
}

fn summary(state: &RunState) -> String {
    format!(
        "tag:         {}\nexperiments: {} ({} after baseline)\nbest_rmse:   {:.4}\nbest_commit: {}\n",
        state.tag(),
        state.experiments_done(),
        state.candidates_evaluated(),
        state.best_score,
        state.best_snapshot
    )
}

fn recover(a: WorkspaceArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let state = recover_session(&a.workspace)?;
    write!(out, "{}", summary(&state)).map_err(io)
}

fn verify(a: WorkspaceArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let state = RunState::load(&a.workspace)?;
    verify_evaluator_lock(&state).map_err(HarnessError::from)?;
    scan_workspace(&a.workspace, &state.record.holdout)?;
    writeln!(
        out,
        "ok: {} rows, evaluator {}, contract {}",
        state.experiments_done(),
        &state.record.evaluator_hash()[..12],
        &state.record.contract_hash()[..12]
    )
    .map_err(io)
}

fn report(a: ReportArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let state = RunState::load(&a.workspace)?;
    let evaluator = a.workspace.join(&state.record.evaluator);
    let settings = Settings::from_file(EvaluatorFile::read(&evaluator)?)?;

    let refs = state.store().refs()?;
    let mut names: Vec<String> = Vec::new();
    for entry in state.log.iter().filter(|e| e.status != Status::Crash) {
        let content = state.store().content(&refs[entry.index].blob)?;
        let text = String::from_utf8_lossy(&content);
        if let Some(name) = candidate_method(&text).and_then(|n| resolve_method(n).ok()) {
            if !names.contains(&name) {
                names.push(name);
            }
        }
    }
    let panel = settings.load_panel()?;
    if a.report_format == Format::Text {
        writeln!(
            out,
            "run {}: {} experiments",
            state.tag(),
            state.experiments_done()
        )
        .map_err(io)?;
        writeln!(
            out,
            "{:>4}  {:<7}  {:>7}  {:<7}  {:>7}  description",
            "k", "commit", "rmse", "status", "best"
        )
        .map_err(io)?;
        let mut best = f64::INFINITY;
        for e in &state.log {
            if e.status == Status::Keep {
                best = e.score;
            }
            let score = if e.score.is_finite() {
                format!("{:.4}", e.score)
            } else {
                "-".into()
            };
            writeln!(
                out,
                "{:>4}  {:<7}  {:>7}  {:<7}  {:>7.4}  {}",
                e.index,
                e.snapshot,
                score,
                e.status.to_string(),
                best,
                e.description
            )
            .map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    let mut sink = std::io::sink();
    let text = report_text(&panel, &settings, &names, a.report_format, &mut sink)?;
    write!(out, "{text}").map_err(io)
}
