//! One PASS/FAIL line per acceptance criterion. Runs as a plain binary so the
//! lines are printed whether or not output capture is on.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use labelsteward::grpo::{run_label_swap, TaskSpec, TrainConfig};
use proptest::prelude::*;

use common::{grids, grpo as grpo_checks, pipeline, props};

type Check = Box<dyn FnOnce() -> Result<String, String>>;

fn prop_result(r: Result<(), String>) {
    if let Err(e) = r {
        panic!("{e}");
    }
}

fn calculator_goldens() -> Result<String, String> {
    grids::lace_golden();
    grids::cockcroft_gault_golden();
    grids::bmi_golden();
    Ok("LACE 11, Cockcroft-Gault 25.238, BMI 22.857".into())
}

fn oracle_grids() -> Result<String, String> {
    grids::lace_matches_oracle_and_is_monotone();
    grids::gcs_matches_oracle_and_counts_each_subscore_once();
    grids::curb65_matches_oracle_and_is_monotone();
    grids::cha2ds2_vasc_matches_oracle_and_is_monotone();
    Ok("LACE, GCS, CURB-65, CHA2DS2-VASc: 0 mismatches".into())
}

fn consensus() -> Result<String, String> {
    let votes = || prop::collection::vec(props::vote(), 1..9);
    let answers = || prop::collection::vec(props::answer(), 1..9);
    prop_result(props::check((votes(), 1usize..9, any::<u64>()), |(r, k, s)| props::audit_order_invariant(r, k, s)));
    prop_result(props::check((answers(), 1usize..9, any::<u64>()), |(r, k, s)| props::relabel_order_invariant(r, k, s)));
    prop_result(props::check((votes(), 1usize..9), |(r, k)| props::audit_monotone(r, k)));
    prop_result(props::check((answers(), 3usize..9), |(r, k)| props::relabel_monotone(r, k)));
    props::consensus_worked_cases();
    Ok(format!("4 properties x {} cases, worked cases", props::CASES))
}

fn discrepancy() -> Result<String, String> {
    let pair = props::nonzero_pair;
    prop_result(props::check(pair(), |(a, b)| props::rel_err_symmetric(a, b)));
    prop_result(props::check((pair(), 1i64..100_000, 0u32..3), |((a, b), l, s)| {
        props::rel_err_scale_invariant(a, b, l, s)
    }));
    prop_result(props::check((pair(), 0u32..6), |((a, b), k)| props::power_of_ten_exact(a, b, k)));
    prop_result(props::check((pair(), any::<bool>()), |((a, b), t)| props::rel_err_lower_bound(a, b, t)));
    props::smape_worked_value();
    props::bootstrap_matches_oracle_and_is_deterministic();
    Ok(format!("4 properties x {} cases, sMAPE 66.667, bootstrap", props::CASES))
}

fn blindness() -> Result<String, String> {
    let n = pipeline::check_blindness();
    Ok(format!("{n} prompts/packets, 0 violations"))
}

fn grpo_math() -> Result<String, String> {
    prop_result(props::check(grpo_checks::reward_group(), grpo_checks::advantages_centered));
    grpo_checks::gradient_matches_finite_differences();
    grpo_checks::reward_table();
    Ok(format!("centering x {}, 100 gradient checks, reward table", props::CASES))
}

fn label_swap() -> Result<String, String> {
    let seeds: Vec<u64> = (0..10).collect();
    let spec = TaskSpec::default();
    let report = run_label_swap(&TrainConfig::desk_scale(), &spec, &seeds).map_err(|e| e.to_string())?;
    for s in &report.per_seed {
        if (s.corruption_fraction - spec.corruption_rate).abs() > 0.05 {
            return Err(format!("seed {} corrupted {:.3} of training labels", s.seed, s.corruption_fraction));
        }
    }
    let median = |mut xs: Vec<f64>| {
        xs.sort_by(f64::total_cmp);
        let n = xs.len();
        (xs[(n - 1) / 2] + xs[n / 2]) / 2.0
    };
    let clean = median(report.per_seed.iter().map(|s| s.clean_accuracy).collect());
    let corrupted = median(report.per_seed.iter().map(|s| s.corrupted_accuracy).collect());
    let summary = format!(
        "{} seeds, clean {clean:.3} vs corrupted {corrupted:.3} (median), mean gap {:.3}, t {:.1}, one-sided p {:.2e}",
        seeds.len(),
        report.mean_difference,
        report.t_stat,
        report.p_value
    );
    if report.significant_95 && report.mean_difference > 0.0 && clean >= corrupted {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn end_to_end() -> Result<String, String> {
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let first_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let second_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = rt.block_on(pipeline::run_pipeline(first_dir.path()));
    pipeline::check_pipeline(&first);
    let second = rt.block_on(pipeline::run_pipeline(second_dir.path()));
    for ((name, a), (_, b)) in first.artifacts.iter().zip(&second.artifacts) {
        if a != b {
            return Err(format!("{name} differs between runs"));
        }
    }
    Ok(format!(
        "queue [10, 15, 12, 9, 4, 6, 7, 2], agreement 2/8 -> 7/8, {} artifacts byte-stable",
        first.artifacts.len()
    ))
}

fn main() -> ExitCode {
    let criteria: Vec<(&str, Duration, Check)> = vec![
        ("calculator golden values", Duration::from_secs(1), Box::new(calculator_goldens)),
        ("point-calculator oracle equivalence", Duration::from_secs(10), Box::new(oracle_grids)),
        ("consensus properties", Duration::from_secs(30), Box::new(consensus)),
        ("discrepancy suite", Duration::from_secs(30), Box::new(discrepancy)),
        ("blindness", Duration::from_secs(60), Box::new(blindness)),
        ("GRPO math", Duration::from_secs(60), Box::new(grpo_math)),
        ("label-swap experiment", Duration::from_secs(600), Box::new(label_swap)),
        ("end-to-end mock pipeline", Duration::from_secs(60), Box::new(end_to_end)),
    ];
    // Failed assertions are reported on the criterion line instead.
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let result = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(r) => r,
            Err(payload) => Err(payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())
                .replace('\n', " ")),
        };
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > budget => Err(format!("{detail}; over the {budget:?} budget")),
            other => other,
        };
        match result {
            Ok(detail) => println!("PASS  {name}: {detail} ({elapsed:.2?})"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} ({elapsed:.2?})");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
