use rust_decimal::prelude::FromPrimitive;
use rust_decimal::Decimal;

use super::GrpoError;
use crate::discrepancy::rel_err;
use crate::model::Label;

/// Whether a parsed answer matches the gold label within relative
/// tolerance `epsilon` (symmetric `rel_err`). NA gold accepts only NA.
pub fn answer_correct(answer: &Label, gold: &Label, epsilon: f64) -> bool {
    match (answer, gold) {
        (Label::Real(a), Label::Real(g)) => {
            let eps = Decimal::from_f64(epsilon).unwrap_or(Decimal::ZERO);
            rel_err(*a, *g) <= eps
        }
        (Label::Na, Label::Na) => true,
        (Label::Datetime(a), Label::Datetime(g)) => a == g,
        _ => false,
    }
}

/// Trajectory reward: `λ_f·1{parsable} + (1-λ_f)·1{correct}`. `answer` is
/// `None` when the trajectory could not be parsed, which also forfeits the
/// answer term.
pub fn reward(answer: Option<&Label>, gold: &Label, format_weight: f64, epsilon: f64) -> f64 {
    match answer {
        None => 0.0,
        Some(a) => {
            let correct = if answer_correct(a, gold, epsilon) { 1.0 } else { 0.0 };
            format_weight + (1.0 - format_weight) * correct
        }
    }
}

/// Group-relative advantages `A_i = R_i - mean(R)`, without any
/// standardization.
pub fn group_advantages(rewards: &[f64]) -> Result<Vec<f64>, GrpoError> {
    if rewards.len() < 2 {
        return Err(GrpoError::GroupTooSmall(rewards.len()));
    }
    let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
    Ok(rewards.iter().map(|r| r - mean).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reward_table() {
        let gold = Label::Real(Decimal::from(40));
        let close = Label::Real("41.9".parse().unwrap());
        let far = Label::Real(Decimal::from(50));
        assert_eq!(reward(Some(&close), &gold, 0.1, 0.05), 1.0);
        assert_eq!(reward(Some(&far), &gold, 0.1, 0.05), 0.1);
        assert_eq!(reward(None, &gold, 0.1, 0.05), 0.0);
        assert_eq!(reward(Some(&Label::Na), &Label::Na, 0.1, 0.05), 1.0);
        assert_eq!(reward(Some(&close), &Label::Na, 0.1, 0.05), 0.1);
    }

    #[test]
    fn advantages() {
        assert_eq!(group_advantages(&[1.0; 8]).unwrap(), vec![0.0; 8]);
        let mut r = vec![0.0; 8];
        r[0] = 1.0;
        let a = group_advantages(&r).unwrap();
        assert_eq!(a[0], 0.875);
        assert!(a[1..].iter().all(|&x| x == -0.125));
        assert!(matches!(group_advantages(&[1.0]), Err(GrpoError::GroupTooSmall(1))));
    }
}
