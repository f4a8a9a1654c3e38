use super::basic::{BestIndividual, BestSubsetAverage, SimpleAverage};
use super::pelasso::{Pelasso, Stage2};
use super::run1::Run1;
use super::run2::Run2;
use super::run3::Run3;
use super::{ForecastMethod, Variant};

/// A boxed method from the registry.
pub type Registered = Box<dyn ForecastMethod>;

const NAMES: [&str; 13] = [
    "simple_average",
    "best_individual",
    "best_subset_avg",
    "best_subset_window_avg",
    "run1.final",
    "run1.a",
    "run1.b",
    "run2.final",
    "run2.a",
    "run2.b",
    "run3.final",
    "run3.a",
    "run3.b",
];

/// Registered method names in report order.
pub fn method_names() -> &'static [&'static str] {
    &NAMES
}

fn canonical(name: &str) -> Option<&'static str> {
    let lowered = name.trim().to_ascii_lowercase();
    if let Some(found) = NAMES.iter().find(|n| **n == lowered) {
        return Some(found);
    }
    // run1, run1a, run1_a, run1-a, run1.a ...
    let compact: String = lowered
        .chars()
        .filter(|c| !matches!(c, '.' | '_' | '-'))
        .collect();
    let family = ["run1", "run2", "run3"]
        .into_iter()
        .find(|f| compact.starts_with(f))?;
    let suffix = &compact[family.len()..];
    let variant = match suffix {
        "" | "final" => "final",
        "a" => "a",
        "b" => "b",
        _ => return None,
    };
    NAMES
        .iter()
        .find(|n| **n == format!("{family}.{variant}"))
        .copied()
}

fn variant(name: &str) -> Variant {
    match name.rsplit('.').next() {
        Some("a") => Variant::A,
        Some("b") => Variant::B,
        _ => Variant::Final,
    }
}

/// Method by name. Besides the registered names this accepts run-family
/// aliases such as `run2` or `run1b`, and `pelasso@<lambda>` for a peLASSO
/// with a frozen first-stage penalty and equal-weight second stage.
pub fn lookup(name: &str) -> Option<Registered> {
    if let Some(lambda) = name.trim().strip_prefix("pelasso@") {
        let lambda: f64 = lambda.parse().ok()?;
        if !(lambda.is_finite() && lambda >= 0.0) {
            return None;
        }
        return Some(Box::new(Pelasso {
            name: name.trim().to_string(),
            lambda1: lambda,
            stage2: Stage2::Avg,
        }));
    }
    let name = canonical(name)?;
    Some(match name {
        "simple_average" => Box::new(SimpleAverage),
        "best_individual" => Box::new(BestIndividual),
        "best_subset_avg" => Box::new(BestSubsetAverage::fixed_window()),
        "best_subset_window_avg" => Box::new(BestSubsetAverage::searched_window()),
        n if n.starts_with("run1") => Box::new(Run1::new(variant(n))),
        n if n.starts_with("run2") => Box::new(Run2::new(variant(n))),
        n if n.starts_with("run3") => Box::new(Run3::new(variant(n))),
        _ => unreachable!("every canonical name is handled"),
    })
}

/// Row label for reports.
pub fn display_name(name: &str) -> String {
    match canonical(name).unwrap_or(name) {
        "simple_average" => "Simple average".into(),
        "best_individual" => "Best individual".into(),
        "best_subset_avg" => "Best <=6-avg".into(),
        "best_subset_window_avg" => "Best (<=6, <=40)-avg".into(),
        "run1.final" => "Run 1 (final)".into(),
        "run1.a" => "Run 1a (ENet, median)".into(),
        "run1.b" => "Run 1b (peLASSO, CV)".into(),
        "run2.final" => "Run 2 (final)".into(),
        "run2.a" => "Run 2a (no bias corr.)".into(),
        "run2.b" => "Run 2b (weighted avg)".into(),
        "run3.final" => "Run 3 (final)".into(),
        "run3.a" => "Run 3a (h=1, no blend)".into(),
        "run3.b" => "Run 3b (h=2, no blend)".into(),
        "pelasso_expost" => "peLASSO ex post (per window)".into(),
        "pelasso_expost_fixed" => "peLASSO ex post (fixed)".into(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_resolves() {
        for name in method_names() {
            assert_eq!(lookup(name).unwrap().name(), *name);
        }
    }

    #[test]
    fn aliases() {
        assert_eq!(lookup("run2").unwrap().name(), "run2.final");
        assert_eq!(lookup("run1b").unwrap().name(), "run1.b");
        assert_eq!(lookup("RUN3_A").unwrap().name(), "run3.a");
        assert_eq!(lookup("pelasso@0.25").unwrap().name(), "pelasso@0.25");
        assert!(lookup("run4").is_none());
        assert!(lookup("run1c").is_none());
        assert!(lookup("pelasso@-1").is_none());
    }
}
