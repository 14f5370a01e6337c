//! Majority voting over extracted answers, for self-consistency.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteOutcome {
    /// The winning answer; absent when no sample produced an answer at all.
    pub answer: Option<String>,
    /// Tally per distinct answer, in order of first appearance.
    pub votes: Vec<(String, usize)>,
    /// True when another answer tied the winner's count.
    pub tie: bool,
}

/// Tallies canonical extracted answers and picks the majority. Samples with no
/// extractable answer carry no vote. Ties resolve to the answer whose first
/// vote came earliest in sampling order.
pub fn majority_vote<'a, I>(extracted: I) -> VoteOutcome
where
    I: IntoIterator<Item = Option<&'a str>>,
{
    let mut votes: Vec<(String, usize)> = Vec::new();
    for answer in extracted.into_iter().flatten() {
        match votes.iter_mut().find(|(a, _)| a == answer) {
            Some((_, count)) => *count += 1,
            None => votes.push((answer.to_string(), 1)),
        }
    }
    let Some(top) = votes.iter().map(|(_, c)| *c).max() else {
        return VoteOutcome { answer: None, votes, tie: false };
    };
    let winner = votes.iter().find(|(_, c)| *c == top).map(|(a, _)| a.clone());
    let tie = votes.iter().filter(|(_, c)| *c == top).count() > 1;
    VoteOutcome { answer: winner, votes, tie }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn vote(samples: &[Option<&str>]) -> VoteOutcome {
        majority_vote(samples.iter().copied())
    }

    #[test]
    fn clear_majority_wins() {
        let out = vote(&[Some("7"), Some("7"), Some("3"), Some("7"), Some("2")]);
        assert_eq!(out.answer.as_deref(), Some("7"));
        assert_eq!(out.votes, vec![("7".to_string(), 3), ("3".to_string(), 1), ("2".to_string(), 1)]);
        assert!(!out.tie);
    }

    #[test]
    fn tie_resolves_to_earliest_first_vote() {
        let out = vote(&[Some("1"), Some("2")]);
        assert_eq!(out.answer.as_deref(), Some("1"));
        assert!(out.tie);
        let out = vote(&[Some("2"), Some("1"), Some("1"), Some("2")]);
        assert_eq!(out.answer.as_deref(), Some("2"));
        assert!(out.tie);
    }

    #[test]
    fn missing_answers_carry_no_vote() {
        let out = vote(&[None, Some("4"), None, Some("4"), Some("9")]);
        assert_eq!(out.answer.as_deref(), Some("4"));
        assert_eq!(out.votes.len(), 2);
    }

    #[test]
    fn all_missing_yields_no_answer() {
        let out = vote(&[None, None, None]);
        assert_eq!(out.answer, None);
        assert!(out.votes.is_empty());
        assert!(!out.tie);
    }
}
