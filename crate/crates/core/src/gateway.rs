//! Pluggable access to the policy model, the process-reward scorer, and the
//! text embedder.
//!
//! Everything that talks to a model goes through [`PolicyBackend`]. The
//! deterministic synthetic backend lives in [`crate::mock`]; the remote
//! JSON-over-HTTP backend lives in the companion crate. Backends are
//! shareable across threads; implementations must not rely on call order
//! for their outputs.

use alloc::string::String;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::Fnv1a;

/// Sampling parameters sent with every generation request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationParams {
    pub temperature: f64,
    pub top_p: f64,
    pub top_k: u32,
    pub repetition_penalty: f64,
    pub max_tokens: u32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            temperature: 0.8,
            top_p: 0.9,
            top_k: 40,
            repetition_penalty: 1.0,
            max_tokens: 1024,
        }
    }
}

impl GenerationParams {
    /// Check the documented ranges: temperature in [0, 2], top_p in (0, 1],
    /// top_k and max_tokens positive, repetition_penalty > 0.
    pub fn validate(&self) -> Result<(), GatewayError> {
        let ok = (0.0..=2.0).contains(&self.temperature)
            && self.temperature.is_finite()
            && self.top_p > 0.0
            && self.top_p <= 1.0
            && self.top_k > 0
            && self.repetition_penalty > 0.0
            && self.repetition_penalty.is_finite()
            && self.max_tokens > 0;
        if ok {
            Ok(())
        } else {
            Err(GatewayError::InvalidRequest {
                detail: alloc::format!("generation params out of range: {self:?}"),
            })
        }
    }
}

/// A per-step process-reward score in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StepScore(f64);

impl StepScore {
    pub fn new(value: f64) -> Result<StepScore, GatewayError> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            Ok(StepScore(value))
        } else {
            Err(GatewayError::ScoreOutOfRange { value })
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    /// Transport failure or HTTP 5xx, after retries.
    #[error("backend unavailable: {detail}")]
    BackendUnavailable { detail: String },
    /// The backend answered but the payload is missing required fields.
    #[error("malformed backend response: {detail}")]
    MalformedResponse { detail: String },
    /// The caller violated a request precondition (empty input, n = 0, ...).
    #[error("invalid request: {detail}")]
    InvalidRequest { detail: String },
    /// A scorer produced a value outside [0, 1] or a non-finite number.
    #[error("step score out of range: {value}")]
    ScoreOutOfRange { value: f64 },
}

/// Access to the policy model, scorer, and embedder behind one interface.
///
/// The harness wires up to three backends (policy, scorer, embedder); each
/// is only asked for the methods matching its role. The mock backend
/// implements all four methods so one instance can serve every role in
/// tests.
pub trait PolicyBackend: Send + Sync {
    /// Sample `n` completions for `prompt`. Returns exactly `n` texts.
    fn generate_step(&self, prompt: &str, n: usize) -> Result<Vec<String>, GatewayError>;

    /// Sample `m` final answers for `question` conditioned on the partial
    /// trajectory, already normalized (see [`crate::normalize_answer`]).
    fn sample_answers(
        &self,
        question: &str,
        prefix_steps: &[String],
        m: usize,
    ) -> Result<Vec<String>, GatewayError>;

    /// Process-reward score for each step of a trajectory, one per step.
    fn score_steps(
        &self,
        question: &str,
        steps: &[String],
    ) -> Result<Vec<StepScore>, GatewayError>;

    /// Fixed-dimension unit-norm embedding of `text`.
    fn embed_text(&self, text: &str) -> Result<Vec<f64>, GatewayError>;

    /// Stable identity string (recorded in card repositories so cards are
    /// never matched across embedders).
    fn id(&self) -> &str;
}

impl<T: PolicyBackend + ?Sized> PolicyBackend for &T {
    fn generate_step(&self, prompt: &str, n: usize) -> Result<Vec<String>, GatewayError> {
        (**self).generate_step(prompt, n)
    }
    fn sample_answers(
        &self,
        question: &str,
        prefix_steps: &[String],
        m: usize,
    ) -> Result<Vec<String>, GatewayError> {
        (**self).sample_answers(question, prefix_steps, m)
    }
    fn score_steps(&self, question: &str, steps: &[String]) -> Result<Vec<StepScore>, GatewayError> {
        (**self).score_steps(question, steps)
    }
    fn embed_text(&self, text: &str) -> Result<Vec<f64>, GatewayError> {
        (**self).embed_text(text)
    }
    fn id(&self) -> &str {
        (**self).id()
    }
}

/// Counting wrapper attributing backend traffic to one unit of work (one
/// question, one search). Generation and answer sampling count as policy
/// calls; scoring and embedding are tracked separately.
pub struct CallMeter<'a> {
    inner: &'a dyn PolicyBackend,
    policy_calls: AtomicU64,
    scorer_calls: AtomicU64,
    embed_calls: AtomicU64,
}

impl<'a> CallMeter<'a> {
    pub fn new(inner: &'a dyn PolicyBackend) -> Self {
        CallMeter {
            inner,
            policy_calls: AtomicU64::new(0),
            scorer_calls: AtomicU64::new(0),
            embed_calls: AtomicU64::new(0),
        }
    }

    /// Policy-model invocations so far (generation + answer sampling).
    pub fn policy_calls(&self) -> u64 {
        self.policy_calls.load(Ordering::Relaxed)
    }

    pub fn scorer_calls(&self) -> u64 {
        self.scorer_calls.load(Ordering::Relaxed)
    }

    pub fn embed_calls(&self) -> u64 {
        self.embed_calls.load(Ordering::Relaxed)
    }
}

impl PolicyBackend for CallMeter<'_> {
    fn generate_step(&self, prompt: &str, n: usize) -> Result<Vec<String>, GatewayError> {
        self.policy_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.generate_step(prompt, n)
    }

    fn sample_answers(
        &self,
        question: &str,
        prefix_steps: &[String],
        m: usize,
    ) -> Result<Vec<String>, GatewayError> {
        self.policy_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.sample_answers(question, prefix_steps, m)
    }

    fn score_steps(&self, question: &str, steps: &[String]) -> Result<Vec<StepScore>, GatewayError> {
        self.scorer_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.score_steps(question, steps)
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f64>, GatewayError> {
        self.embed_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.embed_text(text)
    }

    fn id(&self) -> &str {
        self.inner.id()
    }
}

/// Derive a child RNG seed from a base seed and a textual tag, e.g. a
/// per-question seed from the run seed and the question id. Stable across
/// platforms and runs.
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    Fnv1a::new().write_u64(base).write(tag.as_bytes()).finish()
}
