//! Property bodies and strategies shared by the per-module tests and the
//! acceptance run.

use labelsteward::discrepancy::{bootstrap_ci, compare, mean, rel_err, smape};
use labelsteward::verifier::{reduce_audit, reduce_relabel, ConsensusOutcome, ParsedOutcome};
use labelsteward::Label;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rust_decimal::Decimal;

pub const CASES: u32 = 10_000;

/// Runs `test` over `CASES` deterministic draws of `strategy`.
pub fn check<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    let config = Config { cases: CASES, failure_persistence: None, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

// ---- consensus ----

pub fn vote() -> impl Strategy<Value = ParsedOutcome> {
    prop_oneof![
        4 => Just(ParsedOutcome::No),
        4 => Just(ParsedOutcome::Yes),
        1 => Just(ParsedOutcome::Unparsable),
    ]
}

pub fn answer() -> impl Strategy<Value = ParsedOutcome> {
    // Few distinct values so that groups actually form.
    prop_oneof![
        3 => (0i64..4, 0u32..4).prop_map(|(m, extra)| {
            let base = Decimal::new(1200 + m, 2);
            ParsedOutcome::Label(Label::Real(base + Decimal::new(extra as i64, 4)))
        }),
        1 => Just(ParsedOutcome::Label(Label::Na)),
        1 => Just(ParsedOutcome::Unparsable),
    ]
}

fn permuted(mut runs: Vec<ParsedOutcome>, seed: u64) -> Vec<ParsedOutcome> {
    let n = runs.len();
    runs.rotate_left((seed as usize) % n);
    runs.reverse();
    runs
}

pub fn audit_order_invariant(runs: Vec<ParsedOutcome>, k: usize, seed: u64) -> Result<(), TestCaseError> {
    let before = reduce_audit(&runs, k);
    prop_assert_eq!(before, reduce_audit(&permuted(runs, seed), k));
    Ok(())
}

pub fn relabel_order_invariant(runs: Vec<ParsedOutcome>, k: usize, seed: u64) -> Result<(), TestCaseError> {
    let before = reduce_relabel(&runs, k);
    prop_assert_eq!(before, reduce_relabel(&permuted(runs, seed), k));
    Ok(())
}

/// Adding one more "No" never turns a likely error into anything else.
pub fn audit_monotone(runs: Vec<ParsedOutcome>, k: usize) -> Result<(), TestCaseError> {
    if reduce_audit(&runs, k) == ConsensusOutcome::LikelyError {
        let mut more = runs;
        more.push(ParsedOutcome::No);
        prop_assert_eq!(reduce_audit(&more, k), ConsensusOutcome::LikelyError);
    }
    Ok(())
}

/// With k above half the runs, one more run agreeing with the winning label
/// keeps it.
pub fn relabel_monotone(runs: Vec<ParsedOutcome>, k: usize) -> Result<(), TestCaseError> {
    if 2 * k <= runs.len() {
        return Ok(());
    }
    if let ConsensusOutcome::Labeled(label) = reduce_relabel(&runs, k) {
        let mut more = runs;
        more.push(ParsedOutcome::Label(label.clone()));
        prop_assert_eq!(reduce_relabel(&more, k), ConsensusOutcome::Labeled(label));
    }
    Ok(())
}

pub fn consensus_worked_cases() {
    use ParsedOutcome::{No, Yes};
    assert_eq!(reduce_audit(&[No, No, No, No, No], 4), ConsensusOutcome::LikelyError);
    assert_eq!(reduce_audit(&[No, No, No, No, Yes], 4), ConsensusOutcome::LikelyError);
    assert_eq!(reduce_audit(&[No, No, No, Yes, Yes], 4), ConsensusOutcome::NoConsensus);
    let r = |s: &str| ParsedOutcome::Label(Label::Real(s.parse().unwrap()));
    let na = ParsedOutcome::Label(Label::Na);
    assert_eq!(
        reduce_relabel(&[r("12.50"), r("12.504"), r("12.5"), r("12.499"), r("13.1")], 4),
        ConsensusOutcome::Labeled(Label::Real("12.5".parse().unwrap()))
    );
    assert_eq!(reduce_relabel(&vec![na.clone(); 5], 4), ConsensusOutcome::Labeled(Label::Na));
    assert_eq!(reduce_relabel(&[na.clone(), na.clone(), na, r("12"), r("12")], 4), ConsensusOutcome::Deferred);
}

// ---- discrepancy ----

pub fn dec(mantissa: i64, scale: u32) -> Decimal {
    Decimal::new(mantissa, scale)
}

pub fn nonzero_pair() -> impl Strategy<Value = (Decimal, Decimal)> {
    (-1_000_000i64..1_000_000, -1_000_000i64..1_000_000, 0u32..4)
        .prop_filter("not both zero", |(a, b, _)| *a != 0 || *b != 0)
        .prop_map(|(a, b, s)| (dec(a, s), dec(b, s)))
}

pub fn rel_err_symmetric(a: Decimal, b: Decimal) -> Result<(), TestCaseError> {
    let ab = compare("x", &Label::Real(a), &Label::Real(b));
    let ba = compare("x", &Label::Real(b), &Label::Real(a));
    prop_assert_eq!(ab, ba);
    Ok(())
}

pub fn rel_err_scale_invariant(a: Decimal, b: Decimal, lambda: i64, lscale: u32) -> Result<(), TestCaseError> {
    let l = dec(lambda, lscale);
    let base = compare("x", &Label::Real(a), &Label::Real(b));
    let scaled = compare("x", &Label::Real(a * l), &Label::Real(b * l));
    prop_assert_eq!(base.flagged, scaled.flagged);
    let diff = (base.rel_err.unwrap() - scaled.rel_err.unwrap()).abs();
    // Decimal division keeps 28 significant digits; anything beyond is
    // rounding in the last place.
    prop_assert!(diff <= dec(1, 24), "{} vs {}", base.rel_err.unwrap(), scaled.rel_err.unwrap());
    Ok(())
}

pub fn power_of_ten_exact(a: Decimal, b: Decimal, k: u32) -> Result<(), TestCaseError> {
    let l = Decimal::from(10i64.pow(k));
    prop_assert_eq!(rel_err(a, b), rel_err(a * l, b * l));
    Ok(())
}

/// When either estimate equals the truth, rel_err never exceeds the other
/// estimate's error relative to that truth.
pub fn rel_err_lower_bound(a: Decimal, b: Decimal, truth_is_a: bool) -> Result<(), TestCaseError> {
    let (truth, other) = if truth_is_a { (a, b) } else { (b, a) };
    if truth.is_zero() {
        return Ok(());
    }
    let true_rel = (other - truth).abs() / truth.abs();
    prop_assert!(rel_err(a, b) <= true_rel);
    Ok(())
}

pub fn smape_worked_value() {
    assert!((smape(&[(100.0, 50.0)]).unwrap() - 66.667).abs() <= 0.001);
}

/// Sequential percentile bootstrap written independently of the library.
pub fn oracle_bootstrap(samples: &[f64], n_resamples: usize, level: f64, seed: u64) -> (f64, f64) {
    let mut stats = Vec::with_capacity(n_resamples);
    for i in 0..n_resamples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut total = 0.0;
        for _ in 0..samples.len() {
            total += samples[rng.random_range(0..samples.len())];
        }
        stats.push(total / samples.len() as f64);
    }
    stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pick = |q: f64| {
        let h = (stats.len() as f64 - 1.0) * q;
        let lo = h.floor();
        let i = lo as usize;
        if i + 1 >= stats.len() {
            stats[i]
        } else {
            stats[i] + (h - lo) * (stats[i + 1] - stats[i])
        }
    };
    let alpha = 1.0 - level;
    (pick(alpha / 2.0), pick(1.0 - alpha / 2.0))
}

pub fn bootstrap_matches_oracle_and_is_deterministic() {
    let coin: Vec<f64> = (0..50).map(|i| f64::from((i * 7) % 5 < 2)).collect();
    let got = bootstrap_ci(|x| mean(x).unwrap(), &coin, 10_000, 0.95, 2024).unwrap();
    let (lo, hi) = oracle_bootstrap(&coin, 10_000, 0.95, 2024);
    assert!((got.lo - lo).abs() < 1e-12 && (got.hi - hi).abs() < 1e-12);
    let again = bootstrap_ci(|x| mean(x).unwrap(), &coin, 10_000, 0.95, 2024).unwrap();
    assert_eq!(got, again);
    let skewed: Vec<f64> = (1..=30).map(|i| f64::from(i).ln()).collect();
    let a = bootstrap_ci(|x| mean(x).unwrap(), &skewed, 1_000, 0.95, 2024).unwrap();
    let b = bootstrap_ci(|x| mean(x).unwrap(), &skewed, 1_000, 0.95, 2025).unwrap();
    assert_ne!(a, b);
}
