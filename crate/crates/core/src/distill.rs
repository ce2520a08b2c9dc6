//! Trajectory extraction, value-of-computation path selection, complexity
//! measurement, and thought-card distillation.
//!
//! After a search, every answer-bearing terminal leaf yields one
//! [`Trajectory`]. Each trajectory is scored by benefit minus cost —
//! `k * reward - (1 - k) * steps` — and the best path per question is
//! paired with the question's complexity profile. Pairs sharing an action
//! template collapse into one [`ThoughtCard`] carrying the members'
//! aggregate statistics.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::AtomicAction;
use crate::gateway::{GatewayError, PolicyBackend};
use crate::math::normalize;
use crate::mcts::SearchTree;
use crate::prompt::{PromptError, TemplateSet};

/// A root-to-terminal reasoning path with its extracted answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub question: String,
    pub steps: Vec<(AtomicAction, String)>,
    /// Normalized final answer.
    pub answer: String,
    /// The originating leaf's Q-value. Guided-inference trajectories carry
    /// no search reward and use 0.0.
    pub final_reward: f64,
}

impl Trajectory {
    /// The action sequence of this path.
    pub fn template(&self) -> Vec<AtomicAction> {
        self.steps.iter().map(|(a, _)| *a).collect()
    }

    pub fn step_texts(&self) -> Vec<String> {
        self.steps.iter().map(|(_, t)| t.clone()).collect()
    }
}

/// Per-question complexity measurements used for card matching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityProfile {
    /// Subquestion count.
    pub sc: u32,
    /// Problem condition count.
    pub pcc: u32,
    /// Unit-norm semantic embedding.
    pub ps: Vec<f64>,
}

/// An abstract reasoning template plus aggregate statistics of the
/// questions it solved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThoughtCard {
    pub template: Vec<AtomicAction>,
    pub avg_sc: f64,
    pub avg_pcc: f64,
    /// Renormalized mean of the members' embeddings.
    pub ps_centroid: Vec<f64>,
    pub support_count: usize,
    pub member_questions: Vec<String>,
}

/// The distilled card set for one seed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardRepository {
    pub cards: Vec<ThoughtCard>,
    /// Identity of the embedder that produced every `ps` vector; matching
    /// across embedders is refused at load time.
    pub embedder_id: String,
    pub build_config_digest: String,
    pub seed_count: usize,
}

/// One seed question's contribution to distillation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub question_id: String,
    pub profile: ComplexityProfile,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistillError {
    #[error("no candidate trajectories")]
    EmptyCandidates,
    #[error("complexity extraction failed after {attempts} attempts")]
    ExtractionFailed { attempts: usize },
    #[error("embedding dimensions disagree: {a} vs {b}")]
    DimensionMismatch { a: usize, b: usize },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// One trajectory per answer-bearing terminal leaf, in ascending leaf
/// node-id order. May be empty.
pub fn enumerate_valid_paths(tree: &SearchTree) -> Vec<Trajectory> {
    tree.nodes()
        .filter(|n| n.terminal && n.answer.is_some())
        .map(|leaf| {
            let actions = tree.prefix_actions(leaf.id);
            let texts = tree.step_texts(leaf.id);
            Trajectory {
                question: tree.question.clone(),
                steps: actions.into_iter().zip(texts).collect(),
                answer: leaf.answer.clone().expect("filtered on answer"),
                final_reward: leaf.q_value,
            }
        })
        .collect()
}

/// Benefit-minus-cost score of a path: `k * reward - (1 - k) * steps`.
pub fn voc_score(traj: &Trajectory, k: f64) -> f64 {
    k * traj.final_reward - (1.0 - k) * traj.steps.len() as f64
}

/// The highest-scoring trajectory. Ties prefer the shorter path, then the
/// earlier entry (enumeration order is ascending leaf id).
pub fn select_best_path(trajs: &[Trajectory], k: f64) -> Result<&Trajectory, DistillError> {
    let mut best: Option<&Trajectory> = None;
    for traj in trajs {
        let better = match best {
            None => true,
            Some(b) => {
                let (s, sb) = (voc_score(traj, k), voc_score(b, k));
                s > sb || (s == sb && traj.steps.len() < b.steps.len())
            }
        };
        if better {
            best = Some(traj);
        }
    }
    best.ok_or(DistillError::EmptyCandidates)
}

/// Parse `SC=<int>; PCC=<int>` (whitespace-tolerant, order-insensitive).
pub fn parse_complexity(text: &str) -> Option<(u32, u32)> {
    fn field(text: &str, key: &str) -> Option<u32> {
        let start = text.find(key)? + key.len();
        let digits: String = text[start..]
            .trim_start()
            .chars()
            .take_while(|c| c.is_ascii_digit())
            .collect();
        digits.parse().ok()
    }
    Some((field(text, "SC=")?, field(text, "PCC=")?))
}

/// Measure a question's complexity profile: SC and PCC come from a rigid
/// extraction prompt against the policy model (one retry with a re-check
/// nudge appended), PS from the embedder. Extraction failure signals the
/// question should be skipped during builds or matched by PS alone at
/// inference.
pub fn measure_complexity(
    policy: &dyn PolicyBackend,
    embedder: &dyn PolicyBackend,
    templates: &TemplateSet,
    question: &str,
) -> Result<ComplexityProfile, DistillError> {
    const ATTEMPTS: usize = 2;
    let base_prompt = templates.render_complexity_prompt(question)?;
    let mut counts = None;
    for attempt in 0..ATTEMPTS {
        let prompt = if attempt == 0 {
            base_prompt.clone()
        } else {
            alloc::format!("{base_prompt}\n(Re-check the counts.)")
        };
        let completions = policy.generate_step(&prompt, 1)?;
        if let Some(parsed) = completions.first().and_then(|t| parse_complexity(t)) {
            counts = Some(parsed);
            break;
        }
    }
    let (sc, pcc) = counts.ok_or(DistillError::ExtractionFailed { attempts: ATTEMPTS })?;
    let ps = embedder.embed_text(question)?;
    Ok(ComplexityProfile { sc, pcc, ps })
}

/// Group seed outcomes by exact action template into thought cards.
///
/// Card order is the templates' lexicographic order, so a repository's
/// bytes depend only on its contents.
pub fn distill_cards(
    outcomes: &[SeedOutcome],
    embedder_id: &str,
    build_config_digest: &str,
) -> Result<CardRepository, DistillError> {
    if outcomes.is_empty() {
        return Err(DistillError::EmptyCandidates);
    }
    let mut groups: BTreeMap<Vec<AtomicAction>, Vec<&SeedOutcome>> = BTreeMap::new();
    for outcome in outcomes {
        groups
            .entry(outcome.trajectory.template())
            .or_default()
            .push(outcome);
    }
    let mut cards = Vec::with_capacity(groups.len());
    for (template, members) in groups {
        let n = members.len() as f64;
        let dim = members[0].profile.ps.len();
        let mut centroid = alloc::vec![0.0; dim];
        for m in &members {
            if m.profile.ps.len() != dim {
                return Err(DistillError::DimensionMismatch {
                    a: dim,
                    b: m.profile.ps.len(),
                });
            }
            for (acc, x) in centroid.iter_mut().zip(&m.profile.ps) {
                *acc += x / n;
            }
        }
        normalize(&mut centroid);
        cards.push(ThoughtCard {
            template,
            avg_sc: members.iter().map(|m| f64::from(m.profile.sc)).sum::<f64>() / n,
            avg_pcc: members.iter().map(|m| f64::from(m.profile.pcc)).sum::<f64>() / n,
            ps_centroid: centroid,
            support_count: members.len(),
            member_questions: members.iter().map(|m| m.question_id.clone()).collect(),
        });
    }
    Ok(CardRepository {
        cards,
        embedder_id: embedder_id.to_string(),
        build_config_digest: build_config_digest.to_string(),
        seed_count: outcomes.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mock::{MockBackend, MockConfig};
    use alloc::vec;
    use AtomicAction::*;

    fn traj(len: usize, reward: f64, answer: &str) -> Trajectory {
        let mut steps = Vec::new();
        for i in 0..len.saturating_sub(1) {
            steps.push((OneStepThought, alloc::format!("s{i}")));
        }
        steps.push((ChainOfThought, alloc::format!("The answer is {answer}.")));
        Trajectory {
            question: "q".to_string(),
            steps,
            answer: answer.to_string(),
            final_reward: reward,
        }
    }

    #[test]
    fn voc_matches_direct_evaluation() {
        assert!((voc_score(&traj(3, 0.9, "1"), 0.95) - 0.705).abs() < 1e-12);
        assert!((voc_score(&traj(1, 1.0, "1"), 0.95) - 0.90).abs() < 1e-12);
        // k = 1 collapses to the reward.
        assert!((voc_score(&traj(4, 0.37, "1"), 1.0) - 0.37).abs() < 1e-12);
    }

    #[test]
    fn voc_is_monotone_in_reward_and_antitone_in_length() {
        let k = 0.95;
        assert!(voc_score(&traj(3, 0.9, "1"), k) > voc_score(&traj(3, 0.5, "1"), k));
        assert!(voc_score(&traj(2, 0.9, "1"), k) > voc_score(&traj(4, 0.9, "1"), k));
    }

    #[test]
    fn best_path_prefers_score_then_length() {
        let a = traj(3, 0.9, "a");
        let b = traj(1, 1.0, "b");
        let best = select_best_path(&[a, b], 0.95).unwrap();
        assert_eq!(best.answer, "b"); // 0.90 beats 0.705

        // Equal score, different lengths: shorter wins.
        let long = traj(4, 0.6, "long");
        let mut short = traj(2, 0.6, "short");
        // Align scores exactly: k*r - (1-k)*len equal => r differs by len gap.
        short.final_reward = (0.95 * 0.6 - 0.05 * 4.0 + 0.05 * 2.0) / 0.95;
        let best = select_best_path(&[long, short], 0.95).unwrap();
        assert_eq!(best.answer, "short");

        let single = [traj(2, 0.5, "only")];
        assert_eq!(select_best_path(&single, 0.95).unwrap().answer, "only");
        assert_eq!(
            select_best_path(&[], 0.95).unwrap_err(),
            DistillError::EmptyCandidates
        );
    }

    #[test]
    fn complexity_parser_handles_the_rigid_format() {
        assert_eq!(parse_complexity("SC=4; PCC=7"), Some((4, 7)));
        assert_eq!(parse_complexity("PCC= 3 ; SC= 2"), Some((2, 3)));
        assert_eq!(parse_complexity("nothing to see"), None);
        assert_eq!(parse_complexity("SC=; PCC=1"), None);
    }

    #[test]
    fn measure_complexity_returns_planted_values_on_mock() {
        let mock = MockBackend::new(MockConfig::default());
        let templates = TemplateSet::default();
        let q = mock.question_text(0, 6);
        let id = mock.question_id(0, 6);
        let profile = measure_complexity(&mock, &mock, &templates, &q).unwrap();
        let (sc, pcc) = mock.planted_profile(&id).unwrap();
        assert_eq!((profile.sc, profile.pcc), (sc, pcc));
        let norm: f64 = profile.ps.iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-6);
    }

    #[test]
    fn extraction_failure_surfaces_after_bounded_retries() {
        // Noise 1.0 corrupts every extraction completion.
        let mock = MockBackend::new(MockConfig {
            noise: 1.0,
            ..MockConfig::default()
        });
        let templates = TemplateSet::default();
        let q = mock.question_text(0, 0);
        let err = measure_complexity(&mock, &mock, &templates, &q).unwrap_err();
        assert_eq!(err, DistillError::ExtractionFailed { attempts: 2 });
        assert_eq!(mock.counts().generate, 2);
    }

    fn outcome(id: &str, template: &[AtomicAction], sc: u32, pcc: u32, ps: Vec<f64>) -> SeedOutcome {
        let steps = template
            .iter()
            .map(|a| (*a, alloc::format!("[{id}|{}|0] t. The answer is 1.", a.code())))
            .collect();
        SeedOutcome {
            question_id: id.to_string(),
            profile: ComplexityProfile { sc, pcc, ps },
            trajectory: Trajectory {
                question: id.to_string(),
                steps,
                answer: "1".to_string(),
                final_reward: 1.0,
            },
        }
    }

    #[test]
    fn distillation_groups_by_template_and_averages() {
        let t1 = vec![SystemAnalysis, OneStepThought, ChainOfThought];
        let t2 = vec![DivideAndConquer, ChainOfThought];
        let outcomes = vec![
            outcome("q1", &t1, 2, 2, vec![1.0, 0.0]),
            outcome("q2", &t1, 2, 3, vec![0.0, 1.0]),
            outcome("q3", &t1, 2, 4, vec![1.0, 0.0]),
            outcome("q4", &t2, 4, 8, vec![0.0, 1.0]),
        ];
        let repo = distill_cards(&outcomes, "mock-hash-64", "digest").unwrap();
        assert_eq!(repo.cards.len(), 2);
        assert_eq!(repo.seed_count, 4);

        let card1 = repo.cards.iter().find(|c| c.template == t1).unwrap();
        assert_eq!(card1.support_count, 3);
        assert!((card1.avg_pcc - 3.0).abs() < 1e-12);
        assert!((card1.avg_sc - 2.0).abs() < 1e-12);
        assert_eq!(card1.member_questions, vec!["q1", "q2", "q3"]);
        let norm: f64 = card1.ps_centroid.iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-9);

        let support_total: usize = repo.cards.iter().map(|c| c.support_count).sum();
        assert_eq!(support_total, outcomes.len());
    }

    #[test]
    fn distilling_nothing_is_an_error() {
        assert_eq!(
            distill_cards(&[], "e", "d").unwrap_err(),
            DistillError::EmptyCandidates
        );
    }

    #[test]
    fn valid_paths_come_from_answer_bearing_leaves_in_id_order() {
        use crate::mcts::SearchTree;
        let mut tree = SearchTree::new("[[a-0000]] q");
        let c1 = tree.add_child(tree.root(), ChainOfThought, "[a-0000|CoT|0] The answer is 5.".into(), 5);
        let mid = tree.add_child(tree.root(), SystemAnalysis, "[a-0000|SA|0] s".into(), 5);
        let c2 = tree.add_child(mid, ChainOfThought, "[a-0000|CoT|1] The answer is 6.".into(), 5);
        let _open = tree.add_child(mid, OneStepThought, "[a-0000|OST|1] s".into(), 5);
        let _ = (c1, c2);

        let paths = enumerate_valid_paths(&tree);
        assert_eq!(paths.len(), 2);
        assert_eq!(paths[0].answer, "5");
        assert_eq!(paths[1].answer, "6");
        assert_eq!(paths[1].template(), vec![SystemAnalysis, ChainOfThought]);

        let empty = SearchTree::new("[[a-0000]] q");
        assert!(enumerate_valid_paths(&empty).is_empty());
    }
}
