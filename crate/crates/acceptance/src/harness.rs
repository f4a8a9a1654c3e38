use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use auditloop_harness::{
    init_run, init_run_with_fault, recover_session, run_loop, step, Fault, FaultPoint,
    HarnessError, Proposal, RunConfig, ScriptedSearcher, Status, LOG_FILE,
};
use tempfile::TempDir;

use crate::{ensure, Env};

// The candidate holds a score, or `fail` or `silent`.
const EVALUATOR: &str = r#"echo call >> ../calls.txt
c=$(cat "$1")
case "$c" in
  fail) echo boom >&2; exit 1 ;;
  silent) echo "method: none" ;;
  *) printf -- "---\nmethod:         scripted\nrmse:           %s\n" "$c" ;;
esac
"#;

const TEN: [&str; 10] = [
    "1.6", "1.2", "fail", "1.2", "1.1", "silent", "1.3", "0.8", "0.8", "0.7",
];

const T: Duration = Duration::from_secs(30);

struct Fixture {
    _dir: TempDir,
    root: PathBuf,
    config: RunConfig,
}

impl Fixture {
    fn new(budget: usize) -> Result<Self, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let root = dir.path().to_path_buf();
        let ws = root.join("ws");
        let write = |p: &Path, c: &str| fs::write(p, c).map_err(|e| e.to_string());
        fs::create_dir(&ws).map_err(|e| e.to_string())?;
        write(&ws.join("program.md"), "Edit candidate.txt only.\n")?;
        write(&ws.join("evaluate.sh"), EVALUATOR)?;
        write(&ws.join("candidate.txt"), "1.5")?;
        let mut config = RunConfig::new(
            "acceptance",
            &ws,
            "evaluate.sh",
            "candidate.txt",
            vec!["sh".into(), "{evaluator}".into(), "{candidate}".into()],
            budget,
        );
        config.timeout_secs = 30.0;
        config.grace_secs = 0.5;
        Ok(Fixture {
            _dir: dir,
            root,
            config,
        })
    }

    fn ws(&self) -> &Path {
        &self.config.workspace
    }

    fn log_text(&self) -> String {
        fs::read_to_string(self.ws().join(LOG_FILE)).unwrap_or_default()
    }

    fn calls(&self) -> usize {
        fs::read_to_string(self.root.join("calls.txt"))
            .map(|t| t.lines().count())
            .unwrap_or(0)
    }
}

fn scripted(contents: &[&str]) -> ScriptedSearcher {
    ScriptedSearcher::new(
        contents
            .iter()
            .enumerate()
            .map(|(i, c)| Proposal {
                content: c.as_bytes().to_vec(),
                description: format!("candidate {} ({c})", i + 1),
            })
            .collect(),
    )
}

fn err(e: HarnessError) -> String {
    e.to_string()
}

fn reference_log() -> Result<String, String> {
    let fx = Fixture::new(200)?;
    let state = init_run(&fx.config).map_err(err)?;
    run_loop(state, &mut scripted(&TEN)).map_err(err)?;
    Ok(fx.log_text())
}

fn interrupts(reference: &str) -> Result<usize, String> {
    let mut cases = 0;
    for k in 0..=TEN.len() {
        for point in FaultPoint::ALL {
            let fx = Fixture::new(200)?;
            let fault = Some(Fault {
                point,
                experiment: k,
            });
            let interrupted = if k == 0 {
                init_run_with_fault(&fx.config, fault).map(|_| ())
            } else {
                let mut state = init_run(&fx.config).map_err(err)?;
                state.fault = fault;
                run_loop(state, &mut scripted(&TEN)).map(|_| ())
            };
            ensure(
                matches!(interrupted, Err(HarnessError::Interrupted { .. })),
                || format!("{point:?} at {k}: no interruption ({interrupted:?})"),
            )?;
            let state = recover_session(fx.ws()).map_err(err)?;
            let report = run_loop(state, &mut scripted(&TEN)).map_err(err)?;
            ensure(fx.log_text() == reference, || {
                format!("{point:?} at {k}: recovered log differs")
            })?;
            ensure(fx.calls() == report.state.log.len(), || {
                format!(
                    "{point:?} at {k}: {} evaluator calls for {} rows",
                    fx.calls(),
                    report.state.log.len()
                )
            })?;
            cases += 1;
        }
    }
    Ok(cases)
}

fn tamper() -> Result<(), String> {
    let fx = Fixture::new(200)?;
    let mut state = init_run(&fx.config).map_err(err)?;
    step(&mut state, b"1.4", "first", T).map_err(err)?;
    let evaluator = fx.ws().join("evaluate.sh");
    let mut bytes = fs::read(&evaluator).map_err(|e| e.to_string())?;
    let middle = bytes.len() / 2;
    bytes[middle] ^= 0x01;
    fs::write(&evaluator, bytes).map_err(|e| e.to_string())?;
    let (log, calls) = (fx.log_text(), fx.calls());
    let outcome = step(&mut state, b"1.0", "after tamper", T);
    ensure(matches!(outcome, Err(HarnessError::Lock(_))), || {
        format!("flipped evaluator byte not reported: {outcome:?}")
    })?;
    ensure(fx.log_text() == log && fx.calls() == calls, || {
        "evaluator ran after the flip".into()
    })
}

fn crash_row() -> Result<(), String> {
    let fx = Fixture::new(200)?;
    let mut state = init_run(&fx.config).map_err(err)?;
    let entry = step(&mut state, b"fail", "crashes", T).map_err(err)?;
    ensure(
        entry.status == Status::Crash && state.best_score == 1.5,
        || {
            format!(
                "crash handled as {:?}, best {}",
                entry.status, state.best_score
            )
        },
    )?;
    let text = fx.log_text();
    let row = text.lines().last().unwrap_or_default();
    ensure(row.contains("\t0.0000\tcrash\t"), || {
        format!("crash row `{row}`")
    })?;
    let recovered = recover_session(fx.ws()).map_err(err)?;
    ensure(
        recovered.best_score == 1.5 && recovered.best_snapshot == state.log[0].snapshot,
        || "recovered best moved to the crash row".into(),
    )
}

fn soft_budget() -> Result<(), String> {
    let mut fx = Fixture::new(3)?;
    fx.config.session_size = 2;
    let state = init_run(&fx.config).map_err(err)?;
    let ten: Vec<String> = (0..10).map(|i| format!("1.{}", 40 - i)).collect();
    let ten: Vec<&str> = ten.iter().map(String::as_str).collect();
    let report = run_loop(state, &mut scripted(&ten)).map_err(err)?;
    ensure(report.sessions == [0, 2], || {
        format!("sessions at {:?}", report.sessions)
    })?;
    let done = report.state.candidates_evaluated();
    ensure(done == 4, || {
        format!("{done} candidates evaluated, expected 4")
    })
}

pub fn integrity(_: &Env) -> Result<Option<String>, String> {
    let reference = reference_log()?;
    ensure(reference_log()? == reference, || "replay differs".into())?;
    let cases = interrupts(&reference)?;
    tamper()?;
    crash_row()?;
    soft_budget()?;
    Ok(Some(format!(
        "{cases} interrupted runs recover to the reference log; flipped evaluator byte halts \
         before evaluation; crash row 0.0000 never best; sessions at 0 and 2 with budget 3; \
         replay byte-identical"
    )))
}
