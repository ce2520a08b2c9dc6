//! The five atomic reasoning actions and their legality over a partial
//! trajectory.
//!
//! A trajectory is an ordered sequence of (action, generated step) pairs.
//! Legality is purely positional: `SA` opens a trajectory, `SRR` needs at
//! least one prior step, and a `CoT` step always closes the sequence. `DC`
//! and `CoT` are the two answer-capable actions — a step generated under
//! either one terminates the trajectory as soon as it actually contains the
//! final-answer marker.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::answer;

/// One of the five atomic reasoning actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AtomicAction {
    /// Lay out the problem's givens and constraints before solving.
    #[serde(rename = "SA")]
    SystemAnalysis,
    /// Produce exactly the next reasoning step.
    #[serde(rename = "OST")]
    OneStepThought,
    /// Reason through to the final answer in one chain.
    #[serde(rename = "CoT")]
    ChainOfThought,
    /// Split into subproblems and work through them in order.
    #[serde(rename = "DC")]
    DivideAndConquer,
    /// Review prior steps for mistakes and refine them.
    #[serde(rename = "SRR")]
    SelfReflection,
}

impl AtomicAction {
    /// All five actions, in canonical order.
    pub const ALL: [AtomicAction; 5] = [
        AtomicAction::SystemAnalysis,
        AtomicAction::OneStepThought,
        AtomicAction::ChainOfThought,
        AtomicAction::DivideAndConquer,
        AtomicAction::SelfReflection,
    ];

    /// Short code used in files, prompts, and traces.
    pub fn code(self) -> &'static str {
        match self {
            AtomicAction::SystemAnalysis => "SA",
            AtomicAction::OneStepThought => "OST",
            AtomicAction::ChainOfThought => "CoT",
            AtomicAction::DivideAndConquer => "DC",
            AtomicAction::SelfReflection => "SRR",
        }
    }

    /// Inverse of [`AtomicAction::code`].
    pub fn parse(code: &str) -> Option<AtomicAction> {
        Self::ALL.iter().copied().find(|a| a.code() == code)
    }

    /// Whether a step generated under this action can carry the final
    /// answer. Only `CoT` and `DC` steps are expected to state an answer.
    pub fn can_terminate(self) -> bool {
        matches!(
            self,
            AtomicAction::ChainOfThought | AtomicAction::DivideAndConquer
        )
    }

    /// Whether this action unconditionally closes the action sequence.
    ///
    /// A `CoT` step must state the answer, so nothing may follow it. A `DC`
    /// step closes the trajectory only when its generated text actually
    /// contains the answer marker (see [`is_terminal`]), so at the action
    /// level it stays open — chains like `DC -> CoT` are legal.
    pub fn ends_prefix(self) -> bool {
        matches!(self, AtomicAction::ChainOfThought)
    }
}

impl core::fmt::Display for AtomicAction {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.code())
    }
}

/// The actions that may legally extend `prefix`, in canonical order.
///
/// Returns the empty set exactly when the prefix already ended with a
/// sequence-closing action.
pub fn allowed_actions(prefix: &[AtomicAction]) -> Vec<AtomicAction> {
    if prefix.last().is_some_and(|a| a.ends_prefix()) {
        return Vec::new();
    }
    let first = prefix.is_empty();
    AtomicAction::ALL
        .iter()
        .copied()
        .filter(|a| match a {
            AtomicAction::SystemAnalysis => first,
            AtomicAction::SelfReflection => !first,
            _ => true,
        })
        .collect()
}

/// Whether `step_text` generated under `action` terminates the trajectory:
/// the action must be answer-capable and the text must contain the
/// final-answer marker.
pub fn is_terminal(action: AtomicAction, step_text: &str) -> bool {
    action.can_terminate() && answer::contains_marker(step_text)
}

/// Render an action sequence as `SA->OST->CoT`.
pub fn format_template(template: &[AtomicAction]) -> alloc::string::String {
    use alloc::string::ToString;
    template
        .iter()
        .map(|a| a.code())
        .collect::<Vec<_>>()
        .join("->")
        .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use AtomicAction::*;

    #[test]
    fn code_round_trips() {
        for a in AtomicAction::ALL {
            assert_eq!(AtomicAction::parse(a.code()), Some(a));
        }
        assert_eq!(AtomicAction::parse("XYZ"), None);
    }

    #[test]
    fn empty_prefix_allows_everything_but_srr() {
        assert_eq!(
            allowed_actions(&[]),
            [SystemAnalysis, OneStepThought, ChainOfThought, DivideAndConquer]
        );
    }

    #[test]
    fn nonempty_prefix_excludes_sa_and_allows_srr() {
        assert_eq!(
            allowed_actions(&[SystemAnalysis]),
            [OneStepThought, ChainOfThought, DivideAndConquer, SelfReflection]
        );
    }

    #[test]
    fn cot_closes_the_sequence() {
        assert!(allowed_actions(&[SystemAnalysis, ChainOfThought]).is_empty());
        assert!(allowed_actions(&[ChainOfThought]).is_empty());
    }

    #[test]
    fn dc_stays_open() {
        // DC -> CoT chains must be expressible.
        assert_eq!(
            allowed_actions(&[DivideAndConquer]),
            [OneStepThought, ChainOfThought, DivideAndConquer, SelfReflection]
        );
    }

    #[test]
    fn terminality_needs_marker_and_capable_action() {
        assert!(is_terminal(ChainOfThought, "so in total: The answer is 7"));
        assert!(!is_terminal(OneStepThought, "compute the remainder"));
        assert!(!is_terminal(DivideAndConquer, "subproblem list: a, b, c"));
        assert!(is_terminal(DivideAndConquer, "combining: the ANSWER IS 3."));
    }

    /// Brute-force enumeration of legal action sequences up to a depth,
    /// where a sequence stops extending once it ends with a closing action.
    fn enumerate(depth: usize) -> Vec<Vec<AtomicAction>> {
        let mut out = Vec::new();
        let mut frontier = alloc::vec![Vec::new()];
        for _ in 0..depth {
            let mut next = Vec::new();
            for prefix in frontier {
                for a in allowed_actions(&prefix) {
                    let mut seq = prefix.clone();
                    seq.push(a);
                    out.push(seq.clone());
                    next.push(seq);
                }
            }
            frontier = next;
        }
        out
    }

    #[test]
    fn depth_two_enumeration_matches_hand_listing() {
        // Depth 1: SA, OST, CoT, DC. Depth 2: the three open depth-1
        // prefixes (SA, OST, DC) each extend with OST, CoT, DC, SRR.
        let seqs = enumerate(2);
        let depth1: Vec<_> = seqs.iter().filter(|s| s.len() == 1).collect();
        let depth2: Vec<_> = seqs.iter().filter(|s| s.len() == 2).collect();
        assert_eq!(depth1.len(), 4);
        assert_eq!(depth2.len(), 3 * 4);
        assert!(depth2
            .iter()
            .all(|s| s[0] != ChainOfThought && s[1] != SystemAnalysis));
        assert!(seqs.contains(&alloc::vec![DivideAndConquer, ChainOfThought]));
    }

    #[test]
    fn depth_three_enumeration_is_finite_and_legal() {
        let seqs = enumerate(3);
        // 4 + 12 + (9 open depth-2 prefixes * 4 continuations) = 52.
        assert_eq!(seqs.len(), 52);
        for seq in &seqs {
            for (i, a) in seq.iter().enumerate() {
                assert!(allowed_actions(&seq[..i]).contains(a), "illegal {seq:?}");
            }
        }
    }

    #[test]
    fn open_prefixes_always_have_continuations() {
        for seq in enumerate(4) {
            if !seq.last().is_some_and(|a| a.ends_prefix()) {
                assert!(!allowed_actions(&seq).is_empty());
            }
        }
    }

    #[test]
    fn serde_uses_action_codes() {
        let json = serde_json::to_string(&AtomicAction::ALL.to_vec()).unwrap();
        assert_eq!(json, r#"["SA","OST","CoT","DC","SRR"]"#);
    }
}
