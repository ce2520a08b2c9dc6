//! Card-guided inference: execute each selected thought card's action
//! template on a test question, one candidate solution per card.
//!
//! Execution follows the template exactly, stopping at the first step that
//! states an answer. A template that runs out of actions without answering
//! gets one forced chain-of-thought step so every candidate is extractable.
//! The policy budget per question is bounded by
//! `cards * (template length + 1)` generations plus the two complexity-
//! extraction calls — independent of any search iteration count.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{allowed_actions, is_terminal, AtomicAction};
use crate::answer::normalize_answer;
use crate::distill::{
    measure_complexity, CardRepository, ComplexityProfile, DistillError, ThoughtCard, Trajectory,
};
use crate::gateway::{GatewayError, PolicyBackend};
use crate::matcher::{select_cards, MatchError, MatchMetric};
use crate::prompt::{PromptError, TemplateSet};

/// One guided-inference result, ready for verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSolution {
    /// The card template that guided this candidate.
    pub source_template: Vec<AtomicAction>,
    pub trajectory: Trajectory,
    /// Normalized answer (duplicated from the trajectory for convenience).
    pub answer: String,
    /// Filled by the verifier when the candidate gets scored.
    pub prm_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("card template is illegal at position {position}")]
    IllegalTemplate { position: usize },
    #[error("no answer marker even after a forced chain-of-thought step")]
    AnswerExtractionFailed,
    #[error("all {attempted} card executions failed")]
    AllCardsFailed { attempted: usize },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Distill(#[from] DistillError),
}

/// Everything `solve` produced for one question, for tracing and
/// verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub profile: ComplexityProfile,
    /// The metric actually used (falls back to PS when extraction fails).
    pub metric_used: MatchMetric,
    pub selected_templates: Vec<Vec<AtomicAction>>,
    pub candidates: Vec<CandidateSolution>,
    /// Card executions that errored and were skipped.
    pub skipped: usize,
}

fn check_template(template: &[AtomicAction]) -> Result<(), SolveError> {
    for (position, action) in template.iter().enumerate() {
        if !allowed_actions(&template[..position]).contains(action) {
            return Err(SolveError::IllegalTemplate { position });
        }
    }
    Ok(())
}

/// Execute one card's template on a question.
///
/// Each action is prompted with the accumulated steps; execution stops at
/// the first answer-bearing step. If the template exhausts without one, a
/// forced CoT step is appended; if even that step lacks the marker the
/// execution fails with [`SolveError::AnswerExtractionFailed`].
pub fn execute_card(
    backend: &dyn PolicyBackend,
    templates: &TemplateSet,
    question: &str,
    card: &ThoughtCard,
) -> Result<CandidateSolution, SolveError> {
    check_template(&card.template)?;
    let mut steps: Vec<(AtomicAction, String)> = Vec::with_capacity(card.template.len());
    let mut texts: Vec<String> = Vec::with_capacity(card.template.len());
    let mut answered = false;
    for &action in &card.template {
        let prompt = templates.render_prompt(question, &texts, action)?;
        let text = generate_one(backend, &prompt)?;
        let terminal = is_terminal(action, &text);
        texts.push(text.clone());
        steps.push((action, text));
        if terminal {
            answered = true;
            break;
        }
    }
    if !answered {
        let prompt = templates.render_prompt(question, &texts, AtomicAction::ChainOfThought)?;
        let text = generate_one(backend, &prompt)?;
        texts.push(text.clone());
        steps.push((AtomicAction::ChainOfThought, text));
    }
    let last = &steps.last().expect("at least one step").1;
    let answer = normalize_answer(last).map_err(|_| SolveError::AnswerExtractionFailed)?;
    Ok(CandidateSolution {
        source_template: card.template.clone(),
        trajectory: Trajectory {
            question: question.to_string(),
            steps,
            answer: answer.clone(),
            final_reward: 0.0,
        },
        answer,
        prm_score: None,
    })
}

fn generate_one(backend: &dyn PolicyBackend, prompt: &str) -> Result<String, SolveError> {
    backend
        .generate_step(prompt, 1)?
        .pop()
        .ok_or_else(|| {
            GatewayError::MalformedResponse {
                detail: "backend returned no completion".to_string(),
            }
            .into()
        })
}

/// Guided inference for one question: measure complexity, select up to
/// `card_count` cards, execute each, and return the surviving candidates
/// in card-selection order. Individual card failures are skipped; the call
/// fails only when every execution fails.
pub fn solve(
    policy: &dyn PolicyBackend,
    embedder: &dyn PolicyBackend,
    templates: &TemplateSet,
    question: &str,
    repo: &CardRepository,
    metric: MatchMetric,
    card_count: usize,
) -> Result<SolveOutcome, SolveError> {
    let (profile, metric_used) =
        match measure_complexity(policy, embedder, templates, question) {
            Ok(profile) => (profile, metric),
            // Unextractable counts: match by semantics alone.
            Err(DistillError::ExtractionFailed { .. }) => {
                let ps = embedder.embed_text(question)?;
                (ComplexityProfile { sc: 0, pcc: 0, ps }, MatchMetric::Ps)
            }
            Err(other) => return Err(other.into()),
        };
    let cards = select_cards(&profile, repo, metric_used, card_count)?;
    let mut candidates = Vec::with_capacity(cards.len());
    let mut skipped = 0;
    for card in &cards {
        match execute_card(policy, templates, question, card) {
            Ok(candidate) => candidates.push(candidate),
            Err(_) => skipped += 1,
        }
    }
    if candidates.is_empty() {
        return Err(SolveError::AllCardsFailed {
            attempted: cards.len(),
        });
    }
    Ok(SolveOutcome {
        profile,
        metric_used,
        selected_templates: cards.iter().map(|c| c.template.clone()).collect(),
        candidates,
        skipped,
    })
}
