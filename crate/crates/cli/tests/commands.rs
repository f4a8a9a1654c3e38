use std::fs;
use std::path::{Path, PathBuf};

use auditloop_cli::{run, Context};
use auditloop_core::combiners::lookup;
use auditloop_core::eval::{
    evaluator_block, make_report, parse_report_tsv, rolling_evaluate, standard_samples, EvalConfig,
    ReportLayout,
};
use auditloop_core::panel::mark_split;
use auditloop_core::{impute_panel, load_panel, Panel, PanelFormat};
use tempfile::TempDir;

fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo")
}

fn ctx() -> Context {
    Context {
        exe: PathBuf::from(env!("CARGO_BIN_EXE_auditloop")),
    }
}

struct Output {
    code: i32,
    out: String,
    err: String,
}

fn call(args: &[&str]) -> Output {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("auditloop").chain(args.iter().copied());
    let code = run(argv, &ctx(), &mut out, &mut err);
    Output {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn copy_tree(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_tree(&entry.path(), &target);
        } else {
            fs::copy(entry.path(), target).unwrap();
        }
    }
}

fn demo_copy() -> (TempDir, PathBuf) {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path().join("demo");
    copy_tree(&demo_dir(), &root);
    let _ = fs::remove_dir_all(root.join("workspace/.audit"));
    let _ = fs::remove_file(root.join("workspace/results.tsv"));
    (tmp, root)
}

fn search_panel() -> Panel {
    let raw = load_panel(
        &demo_dir().join("workspace/panel_search.csv"),
        PanelFormat::Original70,
    )
    .unwrap();
    impute_panel(&raw).unwrap()
}

fn extended_panel() -> Panel {
    let raw = load_panel(
        &demo_dir().join("data/panel_extended.csv"),
        PanelFormat::Generic,
    )
    .unwrap();
    mark_split(&impute_panel(&raw).unwrap(), "2017Q1").unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn candidate_block_matches_library_evaluation() {
    let tmp = TempDir::new().unwrap();
    let candidate = tmp.path().join("candidate.txt");
    fs::write(&candidate, "# comment\n\nbest_subset_avg\n").unwrap();
    let config = demo_dir().join("workspace/prepare.toml");
    let o = call(&[
        "evaluate",
        "--config",
        s(&config),
        "--candidate",
        s(&candidate),
    ]);
    assert_eq!(o.code, 0, "{}", o.err);
    let method = lookup("best_subset_avg").unwrap();
    let expected =
        rolling_evaluate(&search_panel(), method.as_ref(), &EvalConfig::default()).unwrap();
    assert_eq!(o.out, evaluator_block(&expected));
}

#[test]
fn tsv_report_matches_library_report() {
    let panel_path = demo_dir().join("data/panel_extended.csv");
    let o = call(&[
        "evaluate",
        "--panel",
        s(&panel_path),
        "--holdout-start",
        "2017Q1",
        "--methods",
        "best_individual",
        "--report-format",
        "tsv",
    ]);
    assert_eq!(o.code, 0, "{}", o.err);
    let panel = extended_panel();
    let results: Vec<_> = ["simple_average", "best_individual"]
        .iter()
        .map(|n| {
            rolling_evaluate(&panel, lookup(n).unwrap().as_ref(), &EvalConfig::default()).unwrap()
        })
        .collect();
    let expected = make_report(
        &results,
        &standard_samples(&panel, &[]),
        ReportLayout::Tsv,
        None,
    )
    .unwrap();
    assert_eq!(o.out, expected);
    let rows = parse_report_tsv(&o.out).unwrap();
    assert_eq!(rows.len(), 4);
}

#[test]
fn covid_mask_adds_a_thirty_two_quarter_column() {
    let panel_path = demo_dir().join("data/panel_extended.csv");
    let o = call(&[
        "evaluate",
        "--panel",
        s(&panel_path),
        "--holdout-start",
        "2017Q1",
        "--mask",
        "covid",
        "--methods",
        "simple_average",
    ]);
    assert_eq!(o.code, 0, "{}", o.err);
    assert!(o.out.contains("(65 quarters)"), "{}", o.out);
    assert!(o.out.contains("(36 quarters)"), "{}", o.out);
    assert!(o.out.contains("(32 quarters)"), "{}", o.out);
    assert!(o.out.contains("Holdout excl. COVID"), "{}", o.out);
}

#[test]
fn unknown_method_is_a_validation_error_listing_names() {
    let config = demo_dir().join("workspace/prepare.toml");
    let o = call(&["evaluate", "--config", s(&config), "--methods", "nosuch"]);
    assert_eq!(o.code, 2);
    assert!(o.err.contains("unknown method `nosuch`"), "{}", o.err);
    assert!(o.err.contains("simple_average"));
    assert!(o.err.contains("run3.final"));
}

#[test]
fn unknown_verb_and_missing_arguments_exit_two() {
    assert_eq!(call(&["frobnicate"]).code, 2);
    assert_eq!(call(&["evaluate"]).code, 2);
    assert_eq!(call(&["--help"]).code, 0);
}

#[test]
fn candidate_naming_unknown_method_is_an_evaluation_failure() {
    let tmp = TempDir::new().unwrap();
    let candidate = tmp.path().join("candidate.txt");
    fs::write(&candidate, "no_such_method\n").unwrap();
    let config = demo_dir().join("workspace/prepare.toml");
    let o = call(&[
        "evaluate",
        "--config",
        s(&config),
        "--candidate",
        s(&candidate),
    ]);
    assert_eq!(o.code, 4);
}

fn results(root: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(root.join("workspace/results.tsv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect()
}

#[test]
fn demo_loop_logs_every_proposal_and_verifies() {
    let (_tmp, root) = demo_copy();
    let config = root.join("run.toml");
    let o = call(&["loop", "--config", s(&config)]);
    assert_eq!(o.code, 0, "{}", o.err);
    assert!(o.out.contains("stop:        budget reached"), "{}", o.out);

    let rows = results(&root);
    let descriptions: Vec<&str> = rows.iter().map(|r| r[3].as_str()).collect();
    assert_eq!(descriptions, ["baseline", "run1b", "run2a", "run2_final"]);

    let panel = search_panel();
    for (row, method) in rows
        .iter()
        .zip(["simple_average", "run1.b", "run2.a", "run2.final"])
    {
        let r = rolling_evaluate(
            &panel,
            lookup(method).unwrap().as_ref(),
            &EvalConfig::default(),
        )
        .unwrap();
        assert_eq!(row[1], format!("{:.4}", r.rmse), "{method}");
    }
    let mut best = f64::INFINITY;
    for row in &rows {
        let score: f64 = row[1].parse().unwrap();
        assert_eq!(row[2] == "keep", score < best, "{row:?}");
        best = best.min(score);
    }

    let ws = root.join("workspace");
    let v = call(&["verify", "--workspace", s(&ws)]);
    assert_eq!(v.code, 0, "{}", v.err);
    assert!(v.out.starts_with("ok: 4 rows"), "{}", v.out);

    let again = call(&["loop", "--config", s(&config)]);
    assert_eq!(again.code, 2, "{}", again.err);

    let r = call(&["report", "--workspace", s(&ws), "--report-format", "tsv"]);
    assert_eq!(r.code, 0, "{}", r.err);
    let reported = parse_report_tsv(&r.out).unwrap();
    let methods: Vec<&str> = reported.iter().map(|r| r.method.as_str()).collect();
    assert_eq!(
        methods,
        ["simple_average", "run1.b", "run2.a", "run2.final"]
    );

    fs::write(ws.join("prepare.toml"), "window = 12\n").unwrap();
    let tampered = call(&["verify", "--workspace", s(&ws)]);
    assert_eq!(tampered.code, 3, "{}", tampered.err);
}

#[test]
fn external_searcher_editing_the_evaluator_is_a_violation() {
    let (_tmp, root) = demo_copy();
    let config = root.join("run.toml");
    let text = fs::read_to_string(&config).unwrap();
    let head = &text[..text.find("[searcher]").unwrap()];
    let script = "cd {workspace} && echo '# edited' >> prepare.toml && echo run1.b > candidate.txt && echo tampered";
    let tampering = format!(
        "{head}[searcher]\nkind = \"external\"\ncommand = [\"sh\", \"-c\", \"{script}\"]\n"
    );
    fs::write(&config, tampering).unwrap();
    let o = call(&["loop", "--config", s(&config)]);
    assert_eq!(o.code, 3, "{}\n{}", o.out, o.err);
    assert!(o.err.contains("prepare.toml"), "{}", o.err);
    assert_eq!(results(&root).len(), 1);
}
