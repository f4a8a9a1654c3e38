use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use auditloop_core::combiners::{lookup, Forecast, ForecastMethod, MethodError, SimpleAverage};
use auditloop_core::eval::{
    covid_quarters, default_basis, dm_test_ewc, evaluator_block, make_report, parse_report_tsv,
    parse_score, report_rows, rolling_evaluate, score_subsets, standard_samples, EvalConfig,
    EvalError, MethodRun, ReportLayout, Sample,
};
use auditloop_core::panel::mark_split;
use auditloop_core::{Info, Panel};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
}

/// Quarterly labels starting at 1999Q3.
fn quarters(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            let q = i + 2;
            format!("{}Q{}", 1999 + q / 4, q % 4 + 1)
        })
        .collect()
}

fn panel(seed: u64, rows: usize, k: usize) -> Panel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = Array1::from_shape_fn(rows, |_| 2.0 + 1.5 * normal(&mut rng));
    let x = Array2::from_shape_fn((rows, k), |(i, j)| {
        0.5 * y[i] + 1.0 + 0.1 * j as f64 + normal(&mut rng)
    });
    Panel::new(
        quarters(rows),
        (0..k).map(|j| format!("f{j}")).collect(),
        x,
        y,
    )
    .unwrap()
}

/// The search sample and holdout layout: 70 rows through 2016Q4, then 36.
fn extended(seed: u64, k: usize) -> Panel {
    mark_split(&panel(seed, 106, k), "2017Q1").unwrap()
}

struct PerfectForesight(Array1<f64>);

impl ForecastMethod for PerfectForesight {
    fn name(&self) -> &str {
        "perfect_foresight"
    }

    fn forecast(&self, info: &Info) -> Result<Forecast, MethodError> {
        Ok(Forecast::new(self.0[info.t - 1], "perfect_foresight"))
    }
}

/// Checks every information set against the panel and counts calls.
struct Instrumented<'a> {
    panel: &'a Panel,
    calls: AtomicUsize,
}

impl ForecastMethod for Instrumented<'_> {
    fn name(&self) -> &str {
        "instrumented"
    }

    fn forecast(&self, info: &Info) -> Result<Forecast, MethodError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let t = info.t;
        let x = self.panel.forecasts();
        let y = self.panel.actuals();
        assert_eq!(info.x_history.nrows(), t - 1);
        assert_eq!(info.x_history, x.slice(ndarray::s![..t - 1, ..]));
        assert_eq!(info.y_history, y.slice(ndarray::s![..t - 1]));
        assert_eq!(info.x_new, x.row(t - 1));
        SimpleAverage.forecast(info)
    }
}

struct FailsAt(usize);

impl ForecastMethod for FailsAt {
    fn name(&self) -> &str {
        "fails"
    }

    fn forecast(&self, info: &Info) -> Result<Forecast, MethodError> {
        if info.t == self.0 {
            return Err(MethodError::Invalid("boom".into()));
        }
        SimpleAverage.forecast(info)
    }
}

struct NotFinite;

impl ForecastMethod for NotFinite {
    fn name(&self) -> &str {
        "nan"
    }

    fn forecast(&self, _: &Info) -> Result<Forecast, MethodError> {
        Ok(Forecast::new(f64::NAN, "nan"))
    }
}

#[test]
fn default_origins_on_seventy_rows() {
    let p = panel(1, 70, 6);
    let r = rolling_evaluate(&p, &SimpleAverage, &EvalConfig::default()).unwrap();
    assert_eq!(r.records.len(), 66);
    assert_eq!(r.records[0].t, 5);
    assert_eq!(r.n_scored(), 65);
    assert!(r.scored().all(|rec| rec.t >= 6));
    assert_eq!(r.relative_rmse, 1.0);
    for rec in &r.records {
        assert_eq!(rec.error, rec.actual - rec.forecast);
    }
    let by_hand: f64 = (6..=70)
        .map(|t| {
            let row = p.forecasts().row(t - 1).to_owned();
            (p.actuals()[t - 1] - row.mean().unwrap()).powi(2)
        })
        .sum::<f64>()
        / 65.0;
    assert!((r.rmse - by_hand.sqrt()).abs() < 1e-12);
}

#[test]
fn perfect_foresight_scores_zero() {
    let p = panel(2, 40, 4);
    let oracle = PerfectForesight(p.actuals().to_owned());
    let r = rolling_evaluate(&p, &oracle, &EvalConfig::default()).unwrap();
    assert_eq!(r.rmse, 0.0);
    assert_eq!(r.relative_rmse, 0.0);
}

#[test]
fn methods_never_see_rows_at_or_after_the_origin() {
    let p = panel(3, 50, 5);
    let m = Instrumented {
        panel: &p,
        calls: AtomicUsize::new(0),
    };
    let config = EvalConfig {
        first_call_t: 2,
        score_from_t: 2,
        ..EvalConfig::default()
    };
    rolling_evaluate(&p, &m, &config).unwrap();
    assert_eq!(m.calls.load(Ordering::SeqCst), 49);
}

#[test]
fn scored_count_honours_range_and_mask() {
    let p = panel(4, 60, 4);
    let masked: BTreeSet<String> = [10usize, 20, 21, 59]
        .iter()
        .map(|t| p.dates()[t - 1].clone())
        .chain(std::iter::once(p.dates()[2].clone()))
        .collect();
    let config = EvalConfig {
        first_call_t: 7,
        score_from_t: 9,
        last_call_t: Some(58),
        scoring_mask: masked,
        ..EvalConfig::default()
    };
    let r = rolling_evaluate(&p, &SimpleAverage, &config).unwrap();
    assert_eq!(r.records.len(), 52);
    // Rows 10, 20, 21 fall inside 9..=58; row 59 and row 3 do not.
    assert_eq!(r.n_scored(), 58 - 9 + 1 - 3);
}

#[test]
fn method_failure_names_the_origin() {
    let p = panel(5, 40, 4);
    match rolling_evaluate(&p, &FailsAt(23), &EvalConfig::default()) {
        Err(EvalError::Method { t, date, .. }) => {
            assert_eq!(t, 23);
            assert_eq!(date, p.dates()[22]);
        }
        other => panic!("expected a method error, got {other:?}"),
    }
    assert!(matches!(
        rolling_evaluate(&p, &NotFinite, &EvalConfig::default()),
        Err(EvalError::Method { t: 5, .. })
    ));
}

#[test]
fn infeasible_configuration_is_rejected() {
    let p = panel(6, 20, 3);
    for config in [
        EvalConfig {
            score_from_t: 4,
            ..EvalConfig::default()
        },
        EvalConfig {
            last_call_t: Some(21),
            ..EvalConfig::default()
        },
        EvalConfig {
            first_call_t: 1,
            score_from_t: 1,
            ..EvalConfig::default()
        },
    ] {
        assert!(matches!(
            rolling_evaluate(&p, &SimpleAverage, &config),
            Err(EvalError::Config(_))
        ));
    }
}

#[test]
fn evaluation_is_deterministic() {
    let p = panel(7, 40, 5);
    for name in ["run1.final", "run2.final", "run3.b", "best_subset_avg"] {
        let m = lookup(name).unwrap();
        let a = rolling_evaluate(&p, m.as_ref(), &EvalConfig::default()).unwrap();
        let b = rolling_evaluate(&p, m.as_ref(), &EvalConfig::default()).unwrap();
        assert_eq!(a, b, "{name}");
        assert_eq!(a.rmse.to_bits(), b.rmse.to_bits());
    }
}

#[test]
fn holdout_and_covid_columns_count_quarters() {
    let p = extended(8, 4);
    assert_eq!(p.split(), 70);
    let samples = standard_samples(&p, &[("covid".to_string(), covid_quarters())]);
    let names: Vec<&str> = samples.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["search", "holdout", "holdout_excl_covid"]);
    let r = rolling_evaluate(&p, &SimpleAverage, &EvalConfig::default()).unwrap();
    assert_eq!(r.n_scored(), 101);
    let scores = score_subsets(&r, &samples, None).unwrap();
    let counts: Vec<usize> = scores.iter().map(|s| s.n_scored).collect();
    assert_eq!(counts, [65, 36, 32]);
    assert!(scores.iter().all(|s| s.relative == 1.0));
}

#[test]
fn full_sample_subset_reproduces_overall_rmse() {
    let p = panel(9, 50, 4);
    let m = lookup("run2.b").unwrap();
    let r = rolling_evaluate(&p, m.as_ref(), &EvalConfig::default()).unwrap();
    let all = Sample::new("all", "All", p.dates().to_vec(), false);
    let s = score_subsets(&r, &[all.excluding("all", "All", &BTreeSet::new())], None).unwrap();
    assert_eq!(s[0].rmse, r.rmse);
    assert_eq!(s[0].n_scored, r.n_scored());
}

#[test]
fn mask_removing_every_origin_is_an_error() {
    let p = panel(10, 30, 4);
    let r = rolling_evaluate(&p, &SimpleAverage, &EvalConfig::default()).unwrap();
    let early = Sample::new("early", "Early", p.dates()[..5].to_vec(), false);
    assert!(matches!(
        score_subsets(&r, &[early], None),
        Err(EvalError::EmptySample(name)) if name == "early"
    ));
}

#[test]
fn dm_size_under_equal_accuracy_null() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let t = 36;
    let reps = 10_000;
    let mut rejections = 0;
    for _ in 0..reps {
        let a: Vec<f64> = (0..t).map(|_| normal(&mut rng)).collect();
        let b: Vec<f64> = (0..t).map(|_| normal(&mut rng)).collect();
        let r = dm_test_ewc(&a, &b, None).unwrap();
        assert_eq!(r.basis, default_basis(t));
        if r.p_value < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / reps as f64;
    assert!((0.02..=0.10).contains(&rate), "rejection rate {rate}");
}

proptest! {
    #![proptest_config(Config {
        cases: 256,
        rng_seed: RngSeed::Fixed(36),
        failure_persistence: None,
        ..Config::default()
    })]

    #[test]
    fn dm_statistic_negates_under_swap(
        a in prop::collection::vec(-5.0f64..5.0, 4..60),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = a.iter().map(|v| v + normal(&mut rng)).collect();
        let ab = dm_test_ewc(&a, &b, None).unwrap();
        let ba = dm_test_ewc(&b, &a, None).unwrap();
        prop_assert_eq!(ab.stat, -ba.stat);
        if !ab.degenerate {
            prop_assert!((ab.p_value + ba.p_value - 1.0).abs() < 1e-12);
        }
    }
}

fn runs_for(p: &Panel, names: &[&str], samples: &[Sample]) -> Vec<MethodRun> {
    names
        .iter()
        .map(|name| {
            let m = lookup(name).unwrap();
            let r = rolling_evaluate(p, m.as_ref(), &EvalConfig::default()).unwrap();
            MethodRun::new(r, samples, None).unwrap()
        })
        .collect()
}

#[test]
fn report_tsv_round_trips() {
    let p = extended(11, 4);
    let samples = standard_samples(&p, &[("covid".to_string(), covid_quarters())]);
    let runs = runs_for(&p, &["run2.a", "simple_average", "run1.b"], &samples);
    let rows = report_rows(&runs);
    assert_eq!(rows.len(), 9);
    assert_eq!(rows[0].method, "simple_average");
    let results: Vec<_> = runs.iter().map(|r| r.result.clone()).collect();
    let tsv = make_report(&results, &samples, ReportLayout::Tsv, None).unwrap();
    assert_eq!(parse_report_tsv(&tsv).unwrap(), rows);
    let dm_rows: Vec<_> = rows.iter().filter(|r| r.p_value.is_some()).collect();
    assert_eq!(dm_rows.len(), 4);
    assert!(dm_rows.iter().all(|r| r.label_notes.contains("dm_b=")));
}

#[test]
fn table_layout_lists_every_method_under_three_columns() {
    let p = extended(12, 4);
    let samples = standard_samples(&p, &[("covid".to_string(), covid_quarters())]);
    let names: Vec<&str> = auditloop_core::combiners::method_names().to_vec();
    let mut order = names.clone();
    order.rotate_left(3);
    let runs = runs_for(&p, &order, &samples);
    let results: Vec<_> = runs.iter().map(|r| r.result.clone()).collect();
    let table = make_report(&results, &samples, ReportLayout::Table, None).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert!(lines[0].contains("Search sample") && lines[0].contains("Holdout excl. COVID"));
    assert!(
        lines[1].contains("(65 quarters)")
            && lines[1].contains("(36 quarters)")
            && lines[1].contains("(32 quarters)")
    );
    let body: Vec<&str> = lines[4..4 + names.len()].to_vec();
    assert!(body[0].starts_with("Simple average"));
    assert!(body[0].contains("1.000"));
    for name in &names {
        let label = auditloop_core::combiners::display_name(name);
        assert_eq!(
            body.iter().filter(|l| l.starts_with(&label)).count(),
            1,
            "{label}"
        );
    }
    // Two bracketed p-values per non-benchmark row.
    for line in &body[1..] {
        assert_eq!(line.matches('[').count(), 2, "{line}");
    }
    assert!(table.contains("continue across the search/holdout boundary"));
}

#[test]
fn single_method_against_itself_is_relative_one() {
    let p = panel(13, 30, 3);
    let r = rolling_evaluate(&p, &SimpleAverage, &EvalConfig::default()).unwrap();
    let search = Sample::new("search", "Search sample", p.dates().to_vec(), false);
    let text = make_report(&[r], &[search], ReportLayout::Table, None).unwrap();
    assert!(text.lines().nth(4).unwrap().contains("1.000"));
}

#[test]
fn evaluator_block_is_greppable() {
    let p = panel(14, 30, 3);
    let r = rolling_evaluate(&p, &SimpleAverage, &EvalConfig::default()).unwrap();
    let block = evaluator_block(&r);
    let lines: Vec<&str> = block.lines().collect();
    assert_eq!(lines[0], "---");
    assert!(lines[1].starts_with("method:"));
    assert!(lines[2].starts_with("rmse:"));
    assert!(lines[3].starts_with("benchmark_rmse:"));
    assert!(lines[4].starts_with("relative_rmse:"));
    assert!((parse_score(&block).unwrap() - r.rmse).abs() < 5e-7);
}
