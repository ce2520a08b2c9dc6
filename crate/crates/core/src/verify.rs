//! Two-stage solution selection: process-reward scoring followed by
//! self-consistency voting over the top-scored candidates.
//!
//! The default mode scores every candidate with the process scorer (a
//! path's score is its weakest step), keeps the top three, and majority-
//! votes their answers with PRM tie-breaking. Ablation modes select by
//! vote only, by score only, or uniformly at random.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::answer::{canonicalize_answer, normalize_answer, NoAnswerMarker, ANSWER_MARKER};
use crate::gateway::{GatewayError, PolicyBackend};
use crate::reasoner::CandidateSolution;

/// Candidates kept for the self-consistency stage.
pub const DEFAULT_TOP_K: usize = 3;

/// How the final answer was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictMethod {
    PrmSc,
    ScOnly,
    PrmOnly,
    Random,
}

/// Verification mode to run. `PrmSc` is the default pipeline; the others
/// exist for ablation comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerificationMode {
    PrmSc,
    ScOnly,
    PrmOnly,
    Random { seed: u64 },
}

/// The verification outcome for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub chosen_answer: String,
    /// Fraction of the voting pool backing the answer (1.0 for the
    /// single-candidate and score/random modes).
    pub confidence: f64,
    pub method: VerdictMethod,
    /// Candidate input indexes, best first.
    pub ranked_candidates: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("no candidates to verify")]
    EmptyCandidates,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Modal answer and its frequency fraction. Ties resolve to the answer
/// whose earliest occurrence comes first.
pub fn majority_vote(answers: &[String]) -> (String, f64) {
    vote(answers, None)
}

/// Modal answer with PRM tie-breaking: among tied answers, the one whose
/// earliest occurrence carries the highest score wins.
pub fn majority_vote_with_scores(answers: &[String], scores: &[f64]) -> (String, f64) {
    debug_assert_eq!(answers.len(), scores.len());
    vote(answers, Some(scores))
}

fn vote(answers: &[String], scores: Option<&[f64]>) -> (String, f64) {
    assert!(!answers.is_empty(), "majority_vote needs at least one answer");
    struct Tally {
        count: usize,
        first_idx: usize,
    }
    let mut tallies: Vec<(&String, Tally)> = Vec::new();
    for (idx, answer) in answers.iter().enumerate() {
        match tallies.iter_mut().find(|(a, _)| *a == answer) {
            Some((_, t)) => t.count += 1,
            None => tallies.push((
                answer,
                Tally {
                    count: 1,
                    first_idx: idx,
                },
            )),
        }
    }
    let score_of = |t: &Tally| scores.map_or(0.0, |s| s[t.first_idx]);
    let mut best = &tallies[0];
    for entry in &tallies[1..] {
        let (_, t) = entry;
        let (_, b) = best;
        let better = t.count > b.count
            || (t.count == b.count && score_of(t) > score_of(b))
            || (t.count == b.count && score_of(t) == score_of(b) && t.first_idx < b.first_idx);
        if better {
            best = entry;
        }
    }
    (
        best.0.clone(),
        best.1.count as f64 / answers.len() as f64,
    )
}

/// Process-reward score of a whole path: the minimum of its per-step
/// scores (a chain is as strong as its weakest step).
pub fn prm_score_path(
    scorer: &dyn PolicyBackend,
    candidate: &CandidateSolution,
) -> Result<f64, VerifyError> {
    let steps = candidate.trajectory.step_texts();
    let scores = scorer.score_steps(&candidate.trajectory.question, &steps)?;
    Ok(scores
        .iter()
        .map(|s| s.value())
        .fold(f64::INFINITY, f64::min))
}

/// Choose the final answer among candidates.
///
/// In `PrmSc` mode every candidate is scored, candidates rank by score
/// (ties to the shorter trajectory, then input order), the top
/// `min(top_k, n)` vote by answer with PRM tie-breaking. If the scorer is
/// unreachable the verdict degrades to `ScOnly` over all candidates. A
/// single candidate wins outright with confidence 1.0.
pub fn verify(
    scorer: &dyn PolicyBackend,
    candidates: &[CandidateSolution],
    mode: VerificationMode,
    top_k: usize,
) -> Result<Verdict, VerifyError> {
    if candidates.is_empty() {
        return Err(VerifyError::EmptyCandidates);
    }
    match mode {
        VerificationMode::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pick = rng.random_range(0..candidates.len());
            let mut ranked: Vec<usize> = (0..candidates.len()).collect();
            ranked.swap(0, pick);
            Ok(Verdict {
                chosen_answer: candidates[pick].answer.clone(),
                confidence: 1.0 / candidates.len() as f64,
                method: VerdictMethod::Random,
                ranked_candidates: ranked,
            })
        }
        VerificationMode::ScOnly => Ok(sc_only_verdict(candidates)),
        VerificationMode::PrmOnly => {
            let ranking = match rank_by_prm(scorer, candidates)? {
                Some(r) => r,
                None => return Ok(sc_only_verdict(candidates)),
            };
            let best = ranking[0].0;
            Ok(Verdict {
                chosen_answer: candidates[best].answer.clone(),
                confidence: 1.0,
                method: VerdictMethod::PrmOnly,
                ranked_candidates: ranking.into_iter().map(|(i, _)| i).collect(),
            })
        }
        VerificationMode::PrmSc => {
            if candidates.len() == 1 {
                return Ok(Verdict {
                    chosen_answer: candidates[0].answer.clone(),
                    confidence: 1.0,
                    method: VerdictMethod::PrmSc,
                    ranked_candidates: alloc::vec![0],
                });
            }
            let ranking = match rank_by_prm(scorer, candidates)? {
                Some(r) => r,
                None => return Ok(sc_only_verdict(candidates)),
            };
            let kept = &ranking[..top_k.max(1).min(ranking.len())];
            let answers: Vec<String> = kept
                .iter()
                .map(|&(i, _)| candidates[i].answer.clone())
                .collect();
            let scores: Vec<f64> = kept.iter().map(|&(_, s)| s).collect();
            let (chosen, confidence) = majority_vote_with_scores(&answers, &scores);
            Ok(Verdict {
                chosen_answer: chosen,
                confidence,
                method: VerdictMethod::PrmSc,
                ranked_candidates: ranking.into_iter().map(|(i, _)| i).collect(),
            })
        }
    }
}

/// Rank candidates by PRM score, descending; ties prefer the shorter
/// trajectory, then the earlier input. A candidate's pinned `prm_score` is
/// trusted when present; otherwise the scorer is consulted. Returns `None`
/// when the scorer is unreachable (degraded mode).
fn rank_by_prm(
    scorer: &dyn PolicyBackend,
    candidates: &[CandidateSolution],
) -> Result<Option<Vec<(usize, f64)>>, VerifyError> {
    let mut scored: Vec<(usize, f64)> = Vec::with_capacity(candidates.len());
    for (idx, candidate) in candidates.iter().enumerate() {
        match candidate.prm_score {
            Some(score) => scored.push((idx, score)),
            None => match prm_score_path(scorer, candidate) {
                Ok(score) => scored.push((idx, score)),
                Err(VerifyError::Gateway(_)) => return Ok(None),
                Err(other) => return Err(other),
            },
        }
    }
    scored.sort_by(|(ia, sa), (ib, sb)| {
        sb.total_cmp(sa)
            .then_with(|| {
                candidates[*ia]
                    .trajectory
                    .steps
                    .len()
                    .cmp(&candidates[*ib].trajectory.steps.len())
            })
            .then_with(|| ia.cmp(ib))
    });
    Ok(Some(scored))
}

fn sc_only_verdict(candidates: &[CandidateSolution]) -> Verdict {
    let answers: Vec<String> = candidates.iter().map(|c| c.answer.clone()).collect();
    let (chosen, confidence) = majority_vote(&answers);
    Verdict {
        chosen_answer: chosen,
        confidence,
        method: VerdictMethod::ScOnly,
        ranked_candidates: (0..candidates.len()).collect(),
    }
}
