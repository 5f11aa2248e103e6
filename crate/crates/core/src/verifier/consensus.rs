use std::collections::BTreeMap;

use rust_decimal::{Decimal, RoundingStrategy};
use serde::{Deserialize, Serialize};

use super::Phase;
use crate::model::{parse_label, Label, LabelDateTime, OutputKind};

/// Parsed final answer of one verifier run.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "label", rename_all = "snake_case")]
pub enum ParsedOutcome {
    Yes,
    No,
    Label(Label),
    Unparsable,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "label", rename_all = "snake_case")]
pub enum ConsensusOutcome {
    Pass,
    LikelyError,
    NoConsensus,
    Labeled(Label),
    Deferred,
}

/// Content of the last `<answer>...</answer>` pair, trimmed.
pub fn extract_answer(transcript: &str) -> Option<&str> {
    let lower = transcript.to_ascii_lowercase();
    let open = lower.rfind("<answer>")?;
    let start = open + "<answer>".len();
    let end = start + lower[start..].find("</answer>")?;
    Some(transcript[start..end].trim())
}

pub fn parse_outcome(transcript: &str, phase: Phase, kind: OutputKind) -> ParsedOutcome {
    let Some(answer) = extract_answer(transcript) else {
        return ParsedOutcome::Unparsable;
    };
    match phase {
        Phase::Audit => {
            let word = answer.trim_end_matches('.').trim().to_ascii_lowercase();
            match word.as_str() {
                "yes" => ParsedOutcome::Yes,
                "no" => ParsedOutcome::No,
                _ => ParsedOutcome::Unparsable,
            }
        }
        Phase::Relabel => match parse_label(answer, kind) {
            Ok(label) => ParsedOutcome::Label(label),
            Err(_) => ParsedOutcome::Unparsable,
        },
    }
}

/// Audit reduction: `likely_error` on at least `k` No votes, `pass` on at
/// least `k` Yes votes. Unparsable runs vote for neither.
pub fn reduce_audit(outcomes: &[ParsedOutcome], k: usize) -> ConsensusOutcome {
    let yes = outcomes.iter().filter(|o| **o == ParsedOutcome::Yes).count();
    let no = outcomes.iter().filter(|o| **o == ParsedOutcome::No).count();
    match (no >= k, yes >= k) {
        (true, false) => ConsensusOutcome::LikelyError,
        (false, true) => ConsensusOutcome::Pass,
        _ => ConsensusOutcome::NoConsensus,
    }
}

/// Equivalence class of a relabel answer: reals rounded to two decimals,
/// datetimes and NA exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum GroupKey {
    Na,
    Real(Decimal),
    Datetime(LabelDateTime),
}

fn group_key(label: &Label) -> GroupKey {
    match label {
        Label::Na => GroupKey::Na,
        Label::Real(v) => GroupKey::Real(v.round_dp_with_strategy(2, RoundingStrategy::MidpointAwayFromZero).normalize()),
        Label::Datetime(d) => GroupKey::Datetime(*d),
    }
}

/// Relabel reduction: the largest equivalence group wins when it holds at
/// least `k` runs (ties go to the smallest key). Its representative is the
/// group's most frequent unrounded value, ties to the smallest.
pub fn reduce_relabel(outcomes: &[ParsedOutcome], k: usize) -> ConsensusOutcome {
    let mut groups: BTreeMap<GroupKey, Vec<&Label>> = BTreeMap::new();
    for o in outcomes {
        if let ParsedOutcome::Label(l) = o {
            groups.entry(group_key(l)).or_default().push(l);
        }
    }
    let mut best: Option<(&GroupKey, &Vec<&Label>)> = None;
    for (key, members) in &groups {
        if best.is_none_or(|(_, b)| members.len() > b.len()) {
            best = Some((key, members));
        }
    }
    match best {
        Some((_, members)) if members.len() >= k && k > 0 => ConsensusOutcome::Labeled(representative(members)),
        _ => ConsensusOutcome::Deferred,
    }
}

fn representative(members: &[&Label]) -> Label {
    let mut counts: BTreeMap<RawKey, usize> = BTreeMap::new();
    for l in members {
        *counts.entry(raw_key(l)).or_default() += 1;
    }
    let mut best: Option<(&RawKey, usize)> = None;
    for (key, &n) in &counts {
        if best.is_none_or(|(_, b)| n > b) {
            best = Some((key, n));
        }
    }
    match best.map(|(k, _)| *k) {
        Some(RawKey::Real(v)) => Label::Real(v),
        Some(RawKey::Datetime(d)) => Label::Datetime(d),
        _ => Label::Na,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum RawKey {
    Na,
    Real(Decimal),
    Datetime(LabelDateTime),
}

fn raw_key(label: &Label) -> RawKey {
    match label {
        Label::Na => RawKey::Na,
        Label::Real(v) => RawKey::Real(v.normalize()),
        Label::Datetime(d) => RawKey::Datetime(*d),
    }
}

pub fn reduce(phase: Phase, outcomes: &[ParsedOutcome], k: usize) -> ConsensusOutcome {
    match phase {
        Phase::Audit => reduce_audit(outcomes, k),
        Phase::Relabel => reduce_relabel(outcomes, k),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ParsedOutcome::{No, Yes};

    fn real(s: &str) -> ParsedOutcome {
        ParsedOutcome::Label(Label::Real(s.parse().unwrap()))
    }

    #[test]
    fn audit_examples() {
        assert_eq!(reduce_audit(&[No, No, No, No, No], 4), ConsensusOutcome::LikelyError);
        assert_eq!(reduce_audit(&[No, No, No, No, Yes], 4), ConsensusOutcome::LikelyError);
        assert_eq!(reduce_audit(&[No, No, No, Yes, Yes], 4), ConsensusOutcome::NoConsensus);
        assert_eq!(reduce_audit(&[Yes, Yes, Yes, Yes, ParsedOutcome::Unparsable], 4), ConsensusOutcome::Pass);
    }

    #[test]
    fn relabel_examples() {
        let runs = [real("12.50"), real("12.504"), real("12.5"), real("12.499"), real("13.1")];
        assert_eq!(reduce_relabel(&runs, 4), ConsensusOutcome::Labeled(Label::Real("12.5".parse().unwrap())));
        let na = ParsedOutcome::Label(Label::Na);
        assert_eq!(reduce_relabel(&vec![na.clone(); 5], 4), ConsensusOutcome::Labeled(Label::Na));
        let mixed = [na.clone(), na.clone(), na, real("12"), real("12")];
        assert_eq!(reduce_relabel(&mixed, 4), ConsensusOutcome::Deferred);
    }

    #[test]
    fn representative_ties_go_to_smallest() {
        let runs = [real("3.001"), real("3.004"), real("3.001"), real("3.004")];
        assert_eq!(reduce_relabel(&runs, 4), ConsensusOutcome::Labeled(Label::Real("3.001".parse().unwrap())));
    }

    #[test]
    fn answer_extraction() {
        assert_eq!(extract_answer("a <answer>1</answer> b <ANSWER> 2 </ANSWER>"), Some("2"));
        assert_eq!(extract_answer("no tags"), None);
        assert_eq!(extract_answer("<answer>open"), None);
        assert_eq!(parse_outcome("<answer>No.</answer>", Phase::Audit, OutputKind::Real), No);
        assert_eq!(parse_outcome("<answer>maybe</answer>", Phase::Audit, OutputKind::Real), ParsedOutcome::Unparsable);
        assert_eq!(
            parse_outcome("<answer>unknown</answer>", Phase::Relabel, OutputKind::Real),
            ParsedOutcome::Label(Label::Na)
        );
        assert_eq!(
            parse_outcome("<answer>12 mg</answer>", Phase::Relabel, OutputKind::Real),
            ParsedOutcome::Unparsable
        );
    }
}
