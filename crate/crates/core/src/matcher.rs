//! Nearest-neighbor selection of thought cards for a test question.
//!
//! Each metric compares one attribute of the question's complexity profile
//! against the card's aggregate: absolute difference for the count metrics
//! (PCC is the default), cosine distance for the semantic embedding.
//! Selecting the k nearest cards minimizes the summed distance of any
//! k-subset, since per-card distances are independent.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distill::{CardRepository, ComplexityProfile, ThoughtCard};
use crate::math;

/// Cards selected per question.
pub const DEFAULT_CARD_COUNT: usize = 5;

/// Which profile attribute drives the distance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMetric {
    #[default]
    Pcc,
    Sc,
    Ps,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatchError {
    #[error("repository holds no cards")]
    EmptyRepository,
    #[error("embedding dimension mismatch: {a} vs {b}")]
    DimensionMismatch { a: usize, b: usize },
}

/// Distance between a question profile and a card under one metric.
/// Smaller is closer; the semantic metric is `1 - cosine`.
pub fn card_distance(
    profile: &ComplexityProfile,
    card: &ThoughtCard,
    metric: MatchMetric,
) -> Result<f64, MatchError> {
    match metric {
        MatchMetric::Pcc => Ok(math::abs(f64::from(profile.pcc) - card.avg_pcc)),
        MatchMetric::Sc => Ok(math::abs(f64::from(profile.sc) - card.avg_sc)),
        MatchMetric::Ps => {
            if profile.ps.len() != card.ps_centroid.len() {
                return Err(MatchError::DimensionMismatch {
                    a: profile.ps.len(),
                    b: card.ps_centroid.len(),
                });
            }
            Ok(1.0 - math::cosine(&profile.ps, &card.ps_centroid))
        }
    }
}

/// The `min(k, |repo|)` closest cards, ascending by distance. Ties prefer
/// the larger support count, then the lexicographically smaller template.
pub fn select_cards<'r>(
    profile: &ComplexityProfile,
    repo: &'r CardRepository,
    metric: MatchMetric,
    k: usize,
) -> Result<Vec<&'r ThoughtCard>, MatchError> {
    if repo.cards.is_empty() {
        return Err(MatchError::EmptyRepository);
    }
    let mut scored: Vec<(f64, &ThoughtCard)> = repo
        .cards
        .iter()
        .map(|card| card_distance(profile, card, metric).map(|d| (d, card)))
        .collect::<Result<_, _>>()?;
    scored.sort_by(|(da, a), (db, b)| {
        da.total_cmp(db)
            .then_with(|| b.support_count.cmp(&a.support_count))
            .then_with(|| a.template.cmp(&b.template))
    });
    Ok(scored.into_iter().take(k).map(|(_, c)| c).collect())
}
