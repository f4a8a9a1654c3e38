use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use auditloop_cli::{run, Context};
use auditloop_core::eval::{parse_report_tsv, parse_score};
use tempfile::TempDir;

use crate::{ensure, within, Env};

fn cli(env: &Env, args: &[&str]) -> Result<String, String> {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let ctx = Context {
        exe: env.exe.clone(),
    };
    let argv = std::iter::once("auditloop").chain(args.iter().copied());
    let code = run(argv, &ctx, &mut out, &mut err);
    let err = String::from_utf8_lossy(&err);
    ensure(code == 0, || {
        format!("`{}` exited {code}: {}", args.join(" "), err.trim())
    })?;
    String::from_utf8(out).map_err(|e| e.to_string())
}

fn path(p: &Path) -> Result<&str, String> {
    p.to_str()
        .ok_or_else(|| format!("{} is not UTF-8", p.display()))
}

/// Search-sample RMSE of one method on the original panel, and how long the
/// evaluation took.
fn search_rmse(env: &Env, panel: &Path, method: &str) -> Result<(f64, Duration), String> {
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let candidate = dir.path().join("candidate.txt");
    fs::write(&candidate, format!("{method}\n")).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let out = cli(
        env,
        &[
            "evaluate",
            "--panel",
            path(panel)?,
            "--panel-format",
            "original_70",
            "--candidate",
            path(&candidate)?,
        ],
    )?;
    let elapsed = start.elapsed();
    let score = parse_score(&out).ok_or_else(|| format!("{method}: no rmse line"))?;
    Ok((score, elapsed))
}

fn against(env: &Env, panel: &Path, targets: &[(&str, f64, f64)]) -> Result<String, String> {
    let mut notes = Vec::new();
    for &(method, target, tol) in targets {
        let (score, elapsed) = search_rmse(env, panel, method)?;
        ensure((score - target).abs() <= tol, || {
            format!("{method}: RMSE {score:.4}, expected {target} +/- {tol}")
        })?;
        within(elapsed, 120, method)?;
        notes.push(format!(
            "{method} {score:.4} ({:.1}s)",
            elapsed.as_secs_f64()
        ));
    }
    Ok(notes.join(", "))
}

pub fn reference_rmses(env: &Env) -> Result<Option<String>, String> {
    let Some(panel) = &env.original_panel else {
        return Ok(None);
    };
    let targets = [
        ("simple_average", 1.504, 0.001),
        ("best_individual", 1.403, 0.005),
        ("best_subset_avg", 1.435, 0.005),
    ];
    against(env, panel, &targets).map(Some)
}

pub fn expost_fixed(env: &Env) -> Result<Option<String>, String> {
    let Some(panel) = &env.original_panel else {
        return Ok(None);
    };
    against(env, panel, &[("pelasso_expost_fixed", 1.400, 0.02)]).map(Some)
}

fn copy_tree(from: &Path, to: &Path) -> std::io::Result<()> {
    fs::create_dir_all(to)?;
    for entry in fs::read_dir(from)? {
        let entry = entry?;
        let name = entry.file_name();
        if name == ".audit" || name == "results.tsv" {
            continue;
        }
        let target = to.join(name);
        if entry.file_type()?.is_dir() {
            copy_tree(&entry.path(), &target)?;
        } else {
            fs::copy(entry.path(), target)?;
        }
    }
    Ok(())
}

pub fn end_to_end(env: &Env) -> Result<Option<String>, String> {
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let root = dir.path().join("demo");
    copy_tree(&env.demo, &root).map_err(|e| format!("copying the demo: {e}"))?;
    let ws = root.join("workspace");
    let which = match &env.original_panel {
        Some(p) => {
            fs::copy(p, ws.join("panel_search.csv")).map_err(|e| e.to_string())?;
            "original panel"
        }
        None => "demo panel",
    };

    cli(env, &["loop", "--config", path(&root.join("run.toml"))?])?;
    let log = fs::read_to_string(ws.join("results.tsv")).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<&str>> = log
        .lines()
        .skip(1)
        .map(|l| l.split('\t').collect())
        .collect();
    let descriptions: Vec<&str> = rows.iter().map(|r| r[3]).collect();
    ensure(
        descriptions == ["baseline", "run1b", "run2a", "run2_final"],
        || format!("logged {descriptions:?}"),
    )?;
    let mut best = f64::INFINITY;
    let mut trace = Vec::new();
    for row in &rows {
        let score: f64 = row[1].parse().map_err(|e| format!("{row:?}: {e}"))?;
        let improves = row[2] != "crash" && score < best;
        ensure((row[2] == "keep") == improves, || {
            format!("row {row:?} after best {best}")
        })?;
        if improves {
            best = score;
        }
        trace.push(format!("{best:.4}"));
    }

    let ws_arg = path(&ws)?;
    cli(env, &["verify", "--workspace", ws_arg])?;
    let report = parse_report_tsv(&cli(
        env,
        &["report", "--workspace", ws_arg, "--report-format", "tsv"],
    )?)
    .map_err(|e| e.to_string())?;
    let methods = "simple_average,run1.b,run2.a,run2.final";
    let direct = parse_report_tsv(&cli(
        env,
        &[
            "evaluate",
            "--config",
            path(&ws.join("prepare.toml"))?,
            "--methods",
            methods,
            "--report-format",
            "tsv",
        ],
    )?)
    .map_err(|e| e.to_string())?;
    ensure(report.len() == direct.len() && report.len() == 4, || {
        format!(
            "{} report rows, {} evaluate rows",
            report.len(),
            direct.len()
        )
    })?;
    for (a, b) in report.iter().zip(&direct) {
        ensure(
            a.method == b.method
                && a.sample == b.sample
                && a.n_scored == b.n_scored
                && (a.rmse - b.rmse).abs() <= 1e-12
                && (a.relative - b.relative).abs() <= 1e-12,
            || format!("report row {a:?} vs evaluate row {b:?}"),
        )?;
    }
    Ok(Some(format!(
        "{which}: best {} over {} rows; report matches evaluate for {methods}",
        trace.join(" -> "),
        rows.len()
    )))
}
