//! Core algorithms for search-distilled reasoning templates ("thought cards").
//!
//! The crate is split along the offline/online boundary of the pipeline:
//!
//! 1. **Offline card construction.** [`mcts`] runs a UCT-guided tree search
//!    over trajectories built from the five atomic reasoning actions in
//!    [`action`], scoring terminal states by self-consistency voting.
//!    [`distill`] extracts the value-of-computation-optimal path per seed
//!    question, measures question complexity, and aggregates question/path
//!    pairs into [`distill::ThoughtCard`]s.
//! 2. **Online guided inference.** [`matcher`] picks the most relevant cards
//!    for a test question by nearest-neighbor matching over complexity
//!    profiles, [`reasoner`] executes each card's action template to produce
//!    candidate solutions, and [`verify`] selects the final answer with
//!    process-reward scoring followed by self-consistency voting.
//!
//! All model access goes through the [`gateway::PolicyBackend`] trait.
//! [`mock`] ships a fully deterministic synthetic backend so the entire
//! pipeline is testable offline; an HTTP backend lives in the companion
//! crate, which also carries file formats and the CLI.
//!
//! The crate is `no_std`-compatible (requires `alloc`); the default `std`
//! feature only adds conveniences such as the mock backend's call log.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(feature = "std")]
extern crate std;

pub mod action;
pub mod answer;
pub mod distill;
pub mod gateway;
pub mod matcher;
pub mod mcts;
pub mod mock;
pub mod prompt;
pub mod reasoner;
pub mod verify;

mod math;

pub use action::{allowed_actions, is_terminal, AtomicAction};
pub use answer::{canonicalize_answer, normalize_answer, NoAnswerMarker, ANSWER_MARKER};
pub use distill::{
    distill_cards, enumerate_valid_paths, measure_complexity, select_best_path, voc_score,
    CardRepository, ComplexityProfile, SeedOutcome, ThoughtCard, Trajectory,
};
pub use gateway::{derive_seed, CallMeter, GatewayError, GenerationParams, PolicyBackend, StepScore};
pub use matcher::{card_distance, select_cards, MatchMetric, DEFAULT_CARD_COUNT};
pub use mcts::{
    backpropagate, run_search, select, uct_value, EngineError, NodeId, NodeRecord, SearchConfig,
    SearchTree,
};
pub use mock::{MockBackend, MockConfig};
pub use prompt::{PromptError, TemplateSet};
pub use reasoner::{execute_card, solve, CandidateSolution, SolveError, SolveOutcome};
pub use verify::{
    majority_vote, majority_vote_with_scores, prm_score_path, verify, VerdictMethod,
    VerificationMode, Verdict, VerifyError, DEFAULT_TOP_K,
};
