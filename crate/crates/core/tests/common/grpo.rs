//! GRPO math checks shared by the GRPO tests and the acceptance run.

use labelsteward::grpo::{group_advantages, grpo_loss, reward, Group, Layout, PolicyParams, Trajectory};
use labelsteward::Label;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rust_decimal::Decimal;

pub fn reward_group() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop::sample::select(vec![0.0, 0.1, 1.0]), 2..32)
}

pub fn advantages_centered(rewards: Vec<f64>) -> Result<(), TestCaseError> {
    let adv = group_advantages(&rewards).unwrap();
    let total: f64 = adv.iter().sum();
    prop_assert!(total.abs() <= 1e-12, "sum {total}");
    let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
    for (a, r) in adv.iter().zip(&rewards) {
        prop_assert!((a - (r - mean)).abs() < 1e-15);
    }
    Ok(())
}

pub fn reward_table() {
    let gold = Label::Real(Decimal::from(100));
    let near = Label::Real(Decimal::from(96));
    let off = Label::Real(Decimal::from(80));
    assert_eq!(reward(Some(&near), &gold, 0.1, 0.05), 1.0);
    assert_eq!(reward(Some(&off), &gold, 0.1, 0.05), 0.1);
    assert_eq!(reward(Some(&Label::Na), &gold, 0.1, 0.05), 0.1);
    assert_eq!(reward(None, &gold, 0.1, 0.05), 0.0);
}

fn random_state(rng: &mut ChaCha8Rng, families: usize) -> (usize, bool) {
    (rng.random_range(0..families), rng.random())
}

pub fn random_groups(rng: &mut ChaCha8Rng, families: usize) -> Vec<Group> {
    (0..rng.random_range(1..4))
        .map(|g| {
            let n = rng.random_range(2..6);
            let trajectories: Vec<Trajectory> = (0..n)
                .map(|_| {
                    let (family, answerable) = random_state(rng, families);
                    let mut actions = vec![rng.random_range(0..2)];
                    if rng.random::<f64>() < 0.8 {
                        actions.push(rng.random_range(0..5));
                    }
                    Trajectory {
                        task_id: 0,
                        family,
                        answerable,
                        actions,
                        answer: None,
                        reward: 0.0,
                        group: g,
                    }
                })
                .collect();
            let advantages = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            Group { trajectories, advantages }
        })
        .collect()
}

pub fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let h = 1e-5;
    for case in 0..100 {
        let families = rng.random_range(1..4);
        let layout = Layout { families };
        let n = layout.n_params();
        let theta: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
        let reference: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
        let temperature = rng.random_range(0.5..2.0);
        let beta = rng.random_range(0.0..1.0);
        let groups = random_groups(&mut rng, families);
        let loss_at = |th: Vec<f64>| {
            let p = PolicyParams::with_reference(layout, th, reference.clone(), temperature);
            grpo_loss(&groups, &p, beta).unwrap().loss
        };
        let policy = PolicyParams::with_reference(layout, theta.clone(), reference.clone(), temperature);
        let analytic = grpo_loss(&groups, &policy, beta).unwrap().grad;
        let numeric: Vec<f64> = (0..n)
            .map(|i| {
                let mut up = theta.clone();
                let mut down = theta.clone();
                up[i] += h;
                down[i] -= h;
                (loss_at(up) - loss_at(down)) / (2.0 * h)
            })
            .collect();
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm_a: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        let norm_n: f64 = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        let scale = norm_a.max(norm_n);
        if scale < 1e-12 {
            continue;
        }
        assert!(diff / scale <= 1e-4, "case {case}: relative error {}", diff / scale);
    }
}
