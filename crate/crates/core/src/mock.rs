//! Deterministic synthetic backend for offline testing.
//!
//! The mock plants a small universe of question families. Each family has a
//! planted action template, and each question has a planted answer and a
//! planted complexity profile. Generated step texts are self-describing
//! (`[qid|ACTION|pos] ...`), which lets the mock act as its own process
//! scorer: a step is on the planted path exactly when its action matches
//! the family template at that position and the step is uncorrupted.
//!
//! Answer votes are unanimous on the planted answer for trajectories that
//! follow the family template (optionally including strict prefixes, which
//! steers tree search toward the planted path) and scatter into distinct
//! wrong answers otherwise. A configurable noise rate corrupts individual
//! generations and votes.
//!
//! All randomness derives from `(seed, request)` hashes, so outputs are
//! byte-identical across runs and immune to call reordering under
//! concurrency.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::action::AtomicAction;
use crate::gateway::{GatewayError, PolicyBackend, StepScore};
use crate::math::{normalize, Fnv1a};
use crate::prompt::{ACTION_HEADER, COMPLEXITY_HEADER};

/// One planted question family.
#[derive(Debug, Clone)]
pub struct FamilySpec {
    /// Short lowercase token used in question ids ("a" -> "a-0017").
    pub name: String,
    /// The planted action template; trajectories matching it exactly vote
    /// unanimously for the planted answer.
    pub template: Vec<AtomicAction>,
    /// Planted subquestion count, jittered per question by +0/+1.
    pub base_sc: u32,
    /// Planted condition count, jittered per question by -1/0/+1.
    pub base_pcc: u32,
    /// Difficulty tier, used by distribution-shape tests.
    pub tier: u32,
}

#[derive(Debug, Clone)]
pub struct MockConfig {
    pub seed: u64,
    /// Probability that one generation or one vote is corrupted.
    pub noise: f64,
    /// Probability that a corrupted answer-capable step still carries a
    /// (wrong) answer marker rather than trailing off without one.
    pub wrong_marker_prob: f64,
    pub embed_dim: usize,
    /// Vote unanimously on strict prefixes of the planted template, not
    /// just on exact matches. Steers search toward the planted path.
    pub guide_prefixes: bool,
    pub families: Vec<FamilySpec>,
}

impl Default for MockConfig {
    /// Two families: `a` with template SA->OST->CoT and `b` with DC->CoT,
    /// separated in PCC so nearest-neighbor matching is decidable.
    fn default() -> Self {
        use AtomicAction::*;
        MockConfig {
            seed: 0,
            noise: 0.0,
            wrong_marker_prob: 0.5,
            embed_dim: 64,
            guide_prefixes: true,
            families: alloc::vec![
                FamilySpec {
                    name: "a".to_string(),
                    template: alloc::vec![SystemAnalysis, OneStepThought, ChainOfThought],
                    base_sc: 2,
                    base_pcc: 3,
                    tier: 1,
                },
                FamilySpec {
                    name: "b".to_string(),
                    template: alloc::vec![DivideAndConquer, ChainOfThought],
                    base_sc: 4,
                    base_pcc: 8,
                    tier: 0,
                },
            ],
        }
    }
}

impl MockConfig {
    /// A one-family environment with a randomly drawn legal template of
    /// length 1..=3 ending in CoT. Used by search-oracle tests.
    pub fn single_family(seed: u64) -> MockConfig {
        use AtomicAction::*;
        let mut rng = ChaCha8Rng::seed_from_u64(
            Fnv1a::new().write(b"env").write_u64(seed).finish(),
        );
        let len = rng.random_range(1..=3usize);
        let mut template = Vec::with_capacity(len);
        if len >= 2 {
            let opener = [SystemAnalysis, OneStepThought, DivideAndConquer];
            template.push(opener[rng.random_range(0..opener.len())]);
        }
        while template.len() + 1 < len {
            let middle = [OneStepThought, DivideAndConquer, SelfReflection];
            template.push(middle[rng.random_range(0..middle.len())]);
        }
        template.push(ChainOfThought);
        MockConfig {
            seed,
            families: alloc::vec![FamilySpec {
                name: "s".to_string(),
                template,
                base_sc: 1 + rng.random_range(0..4),
                base_pcc: 2 + rng.random_range(0..8),
                tier: 0,
            }],
            ..MockConfig::default()
        }
    }

    /// Families spanning difficulty tiers with growing template lengths,
    /// for card-distribution shape tests.
    pub fn tiered(seed: u64) -> MockConfig {
        use AtomicAction::*;
        MockConfig {
            seed,
            families: alloc::vec![
                FamilySpec {
                    name: "easy".to_string(),
                    template: alloc::vec![ChainOfThought],
                    base_sc: 1,
                    base_pcc: 2,
                    tier: 0,
                },
                FamilySpec {
                    name: "mid".to_string(),
                    template: alloc::vec![DivideAndConquer, ChainOfThought],
                    base_sc: 2,
                    base_pcc: 5,
                    tier: 1,
                },
                FamilySpec {
                    name: "hard".to_string(),
                    template: alloc::vec![SystemAnalysis, OneStepThought, ChainOfThought],
                    base_sc: 3,
                    base_pcc: 8,
                    tier: 2,
                },
                FamilySpec {
                    name: "xhard".to_string(),
                    template: alloc::vec![
                        SystemAnalysis,
                        OneStepThought,
                        SelfReflection,
                        ChainOfThought
                    ],
                    base_sc: 4,
                    base_pcc: 11,
                    tier: 3,
                },
            ],
            ..MockConfig::default()
        }
    }
}

/// One synthetic question with its gold answer.
#[derive(Debug, Clone)]
pub struct MockItem {
    pub id: String,
    pub question: String,
    pub answer: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CallKind {
    Generate,
    SampleAnswers,
    ScoreSteps,
    Embed,
}

/// One logged backend call (std only).
#[cfg(feature = "std")]
#[derive(Debug, Clone)]
pub struct CallRecord {
    pub kind: CallKind,
    pub question_id: String,
}

/// Snapshot of per-method invocation counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CallCounts {
    pub generate: u64,
    pub sample_answers: u64,
    pub score_steps: u64,
    pub embed: u64,
}

impl CallCounts {
    /// Policy-model invocations: generation plus answer sampling.
    pub fn policy(&self) -> u64 {
        self.generate + self.sample_answers
    }
}

pub struct MockBackend {
    cfg: MockConfig,
    generate_calls: AtomicU64,
    sample_calls: AtomicU64,
    score_calls: AtomicU64,
    embed_calls: AtomicU64,
    #[cfg(feature = "std")]
    log: std::sync::Mutex<Vec<CallRecord>>,
}

struct ParsedStep<'a> {
    question_id: &'a str,
    action: AtomicAction,
    position: usize,
    corrupted: bool,
}

impl MockBackend {
    pub fn new(cfg: MockConfig) -> Self {
        MockBackend {
            cfg,
            generate_calls: AtomicU64::new(0),
            sample_calls: AtomicU64::new(0),
            score_calls: AtomicU64::new(0),
            embed_calls: AtomicU64::new(0),
            #[cfg(feature = "std")]
            log: std::sync::Mutex::new(Vec::new()),
        }
    }

    pub fn config(&self) -> &MockConfig {
        &self.cfg
    }

    pub fn counts(&self) -> CallCounts {
        CallCounts {
            generate: self.generate_calls.load(Ordering::Relaxed),
            sample_answers: self.sample_calls.load(Ordering::Relaxed),
            score_steps: self.score_calls.load(Ordering::Relaxed),
            embed: self.embed_calls.load(Ordering::Relaxed),
        }
    }

    #[cfg(feature = "std")]
    pub fn log_snapshot(&self) -> Vec<CallRecord> {
        self.log.lock().expect("mock log poisoned").clone()
    }

    #[cfg(feature = "std")]
    pub fn clear_log(&self) {
        self.log.lock().expect("mock log poisoned").clear();
    }

    #[cfg(feature = "std")]
    fn record(&self, kind: CallKind, question_id: &str) {
        self.log
            .lock()
            .expect("mock log poisoned")
            .push(CallRecord {
                kind,
                question_id: question_id.to_string(),
            });
    }

    #[cfg(not(feature = "std"))]
    fn record(&self, _kind: CallKind, _question_id: &str) {}

    /// The id of question `index` in family `family_idx`.
    pub fn question_id(&self, family_idx: usize, index: usize) -> String {
        format!("{}-{index:04}", self.cfg.families[family_idx].name)
    }

    /// The synthetic question text. The leading `[[id]]` token is how the
    /// mock recognizes its own questions inside rendered prompts.
    pub fn question_text(&self, family_idx: usize, index: usize) -> String {
        let id = self.question_id(family_idx, index);
        let flavor = match index % 3 {
            0 => "combine the listed quantities and report the total",
            1 => "work out the remaining amount after the listed changes",
            _ => "determine the final count implied by the listed conditions",
        };
        format!("[[{id}]] Scenario {index} in series {}: {flavor}.", self.cfg.families[family_idx].name)
    }

    /// The planted gold answer for a question id.
    pub fn planted_answer(&self, question_id: &str) -> String {
        let h = Fnv1a::new()
            .write(b"answer")
            .write_u64(self.cfg.seed)
            .write(question_id.as_bytes())
            .finish();
        format!("{}", 100 + h % 900)
    }

    /// The planted (SC, PCC) complexity counts for a question id.
    pub fn planted_profile(&self, question_id: &str) -> Option<(u32, u32)> {
        let family = self.family_of(question_id)?;
        let index = question_index(question_id)?;
        let sc = family.base_sc + (index % 2) as u32;
        let jitter = (index % 3) as i64 - 1;
        let pcc = (family.base_pcc as i64 + jitter).max(0) as u32;
        Some((sc, pcc))
    }

    pub fn family_of(&self, question_id: &str) -> Option<&FamilySpec> {
        let name = question_id.rsplit_once('-').map(|(n, _)| n)?;
        self.cfg.families.iter().find(|f| f.name == name)
    }

    /// `count` questions per family, with indices starting at `start`.
    /// Family-major order.
    pub fn dataset(&self, start: usize, count: usize) -> Vec<MockItem> {
        let mut items = Vec::with_capacity(self.cfg.families.len() * count);
        for family_idx in 0..self.cfg.families.len() {
            for index in start..start + count {
                let id = self.question_id(family_idx, index);
                items.push(MockItem {
                    question: self.question_text(family_idx, index),
                    answer: self.planted_answer(&id),
                    id,
                });
            }
        }
        items
    }

    fn rng(&self, parts: &[&str], extra: u64) -> ChaCha8Rng {
        let mut h = Fnv1a::new().write_u64(self.cfg.seed);
        for p in parts {
            h = h.write(p.as_bytes()).write(b"|");
        }
        ChaCha8Rng::seed_from_u64(h.write_u64(extra).finish())
    }

    fn canonical_step(&self, question_id: &str, action: AtomicAction, position: usize) -> String {
        let body = match action {
            AtomicAction::SystemAnalysis => {
                "List the given conditions and the target quantity before solving.".to_string()
            }
            AtomicAction::OneStepThought => {
                "Carry the intermediate result one step further.".to_string()
            }
            AtomicAction::SelfReflection => {
                "Re-check the steps so far; the work holds up.".to_string()
            }
            AtomicAction::ChainOfThought => format!(
                "Work through the remaining steps in order. The answer is {}.",
                self.planted_answer(question_id)
            ),
            AtomicAction::DivideAndConquer => {
                let final_on_template = self.family_of(question_id).is_some_and(|f| {
                    f.template.len() == position + 1
                        && f.template.last() == Some(&AtomicAction::DivideAndConquer)
                });
                if final_on_template {
                    format!(
                        "Combine the subproblem results. The answer is {}.",
                        self.planted_answer(question_id)
                    )
                } else {
                    "Split the problem into subproblems and solve them in order.".to_string()
                }
            }
        };
        format!("[{question_id}|{}|{position}] {body}", action.code())
    }

    fn corrupted_step(
        &self,
        question_id: &str,
        action: AtomicAction,
        position: usize,
        rng: &mut ChaCha8Rng,
    ) -> String {
        let tag: u64 = rng.random_range(0..10_000);
        let with_marker =
            action.can_terminate() && rng.random_range(0.0..1.0) < self.cfg.wrong_marker_prob;
        let mut body = format!(
            "[{question_id}|{}|{position}|x{tag:04}] An unproductive digression that does not advance the solution.",
            action.code()
        );
        if with_marker {
            let planted: u64 = self.planted_answer(question_id).parse().unwrap_or(0);
            let wrong = planted + 1 + tag % 37;
            body.push_str(&format!(" The answer is {wrong}."));
        }
        body
    }

    fn parse_step<'a>(&self, text: &'a str) -> Option<ParsedStep<'a>> {
        let rest = text.strip_prefix('[')?;
        if rest.starts_with('[') {
            return None; // question token, not a step
        }
        let inner = &rest[..rest.find(']')?];
        let mut parts = inner.split('|');
        let question_id = parts.next()?;
        let action = AtomicAction::parse(parts.next()?)?;
        let position: usize = parts.next()?.parse().ok()?;
        let corrupted = match parts.next() {
            None => false,
            Some(tag) => tag.starts_with('x'),
        };
        if parts.next().is_some() {
            return None;
        }
        Some(ParsedStep {
            question_id,
            action,
            position,
            corrupted,
        })
    }

    /// Length of the leading run of steps that sit exactly on the family
    /// template for this question.
    fn on_template_len(&self, question_id: &str, steps: &[String]) -> usize {
        let Some(family) = self.family_of(question_id) else {
            return 0;
        };
        let mut k = 0;
        for (i, step) in steps.iter().enumerate() {
            let on_path = self.parse_step(step).is_some_and(|p| {
                !p.corrupted
                    && p.question_id == question_id
                    && p.position == i
                    && family.template.get(i) == Some(&p.action)
            });
            if !on_path {
                break;
            }
            k += 1;
        }
        k
    }

    fn question_id_in(&self, text: &str) -> Result<String, GatewayError> {
        parse_question_token(text).ok_or_else(|| GatewayError::InvalidRequest {
            detail: "mock backend requires questions carrying a [[family-index]] token".to_string(),
        })
    }

    fn steps_fingerprint(steps: &[String]) -> u64 {
        let mut h = Fnv1a::new();
        for s in steps {
            h = h.write(s.as_bytes()).write(b"\n");
        }
        h.finish()
    }
}

fn question_index(question_id: &str) -> Option<usize> {
    question_id.rsplit_once('-')?.1.parse().ok()
}

/// Extract the `[[id]]` token from a question or a rendered prompt.
fn parse_question_token(text: &str) -> Option<String> {
    let start = text.find("[[")? + 2;
    let end = text[start..].find("]]")? + start;
    Some(text[start..end].to_string())
}

impl PolicyBackend for MockBackend {
    fn generate_step(&self, prompt: &str, n: usize) -> Result<Vec<String>, GatewayError> {
        if n == 0 {
            return Err(GatewayError::InvalidRequest {
                detail: "n must be at least 1".to_string(),
            });
        }
        self.generate_calls.fetch_add(1, Ordering::Relaxed);
        let question_id = self.question_id_in(prompt)?;
        self.record(CallKind::Generate, &question_id);

        if prompt.contains(COMPLEXITY_HEADER) {
            let (sc, pcc) =
                self.planted_profile(&question_id)
                    .ok_or_else(|| GatewayError::InvalidRequest {
                        detail: format!("unknown mock family for question {question_id}"),
                    })?;
            let fp = Fnv1a::new().write(prompt.as_bytes()).finish();
            let out = (0..n)
                .map(|i| {
                    let mut rng = self.rng(&["extract", &question_id], fp ^ i as u64);
                    if rng.random_range(0.0..1.0) < self.cfg.noise {
                        "the measurement is unavailable for this input".to_string()
                    } else {
                        format!("SC={sc}; PCC={pcc}")
                    }
                })
                .collect();
            return Ok(out);
        }

        let action = prompt
            .lines()
            .find_map(|l| l.strip_prefix(ACTION_HEADER))
            .and_then(|code| AtomicAction::parse(code.trim()))
            .ok_or_else(|| GatewayError::InvalidRequest {
                detail: "prompt carries no action header the mock understands".to_string(),
            })?;
        let prior: Vec<String> = prompt
            .lines()
            .filter(|l| self.parse_step(l).is_some())
            .map(|l| l.to_string())
            .collect();
        let position = prior.len();
        let fp = Self::steps_fingerprint(&prior);

        let completions = (0..n)
            .map(|i| {
                let mut rng = self.rng(
                    &["gen", &question_id, action.code(), &format!("{position}")],
                    fp ^ (i as u64).wrapping_mul(0x9e37_79b9),
                );
                if rng.random_range(0.0..1.0) < self.cfg.noise {
                    self.corrupted_step(&question_id, action, position, &mut rng)
                } else {
                    self.canonical_step(&question_id, action, position)
                }
            })
            .collect();
        Ok(completions)
    }

    fn sample_answers(
        &self,
        question: &str,
        prefix_steps: &[String],
        m: usize,
    ) -> Result<Vec<String>, GatewayError> {
        if m == 0 {
            return Err(GatewayError::InvalidRequest {
                detail: "m must be at least 1".to_string(),
            });
        }
        self.sample_calls.fetch_add(1, Ordering::Relaxed);
        let question_id = self.question_id_in(question)?;
        self.record(CallKind::SampleAnswers, &question_id);
        let family = self
            .family_of(&question_id)
            .ok_or_else(|| GatewayError::InvalidRequest {
                detail: format!("unknown mock family for question {question_id}"),
            })?;

        let planted = self.planted_answer(&question_id);
        let planted_num: u64 = planted.parse().unwrap_or(0);
        let k = self.on_template_len(&question_id, prefix_steps);
        let len = prefix_steps.len();
        let on_template = k == len && len <= family.template.len();
        let complete = on_template && len == family.template.len();
        let unanimous = complete || (self.cfg.guide_prefixes && on_template);
        // Off-template trajectories receive a planted-vote share that grows
        // with how much of the template they kept, capped at half the votes
        // so they can never clear the early-termination threshold.
        let planted_share = if unanimous {
            m
        } else if len == 0 {
            0
        } else {
            (m * k) / (2 * len)
        };
        let fp = Self::steps_fingerprint(prefix_steps);

        let votes = (0..m)
            .map(|j| {
                let mut rng = self.rng(&["vote", &question_id], fp ^ j as u64);
                if rng.random_range(0.0..1.0) < self.cfg.noise {
                    let off: u64 = rng.random_range(0..97);
                    return format!("{}", planted_num + 500 + 31 * j as u64 + off);
                }
                if j < planted_share {
                    planted.clone()
                } else {
                    format!("{}", planted_num + 100 + 13 * j as u64)
                }
            })
            .collect();
        Ok(votes)
    }

    fn score_steps(&self, question: &str, steps: &[String]) -> Result<Vec<StepScore>, GatewayError> {
        if steps.is_empty() {
            return Err(GatewayError::InvalidRequest {
                detail: "steps must be nonempty".to_string(),
            });
        }
        self.score_calls.fetch_add(1, Ordering::Relaxed);
        let question_id = self.question_id_in(question)?;
        self.record(CallKind::ScoreSteps, &question_id);
        let family = self
            .family_of(&question_id)
            .ok_or_else(|| GatewayError::InvalidRequest {
                detail: format!("unknown mock family for question {question_id}"),
            })?;
        let scores = steps
            .iter()
            .enumerate()
            .map(|(i, step)| {
                let on_path = self.parse_step(step).is_some_and(|p| {
                    !p.corrupted
                        && p.question_id == question_id
                        && p.position == i
                        && family.template.get(i) == Some(&p.action)
                });
                StepScore::new(if on_path { 1.0 } else { 0.0 }).expect("0/1 in range")
            })
            .collect();
        Ok(scores)
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f64>, GatewayError> {
        if text.is_empty() {
            return Err(GatewayError::InvalidRequest {
                detail: "cannot embed empty text".to_string(),
            });
        }
        self.embed_calls.fetch_add(1, Ordering::Relaxed);
        self.record(CallKind::Embed, "");
        // Keyed by the text alone: the embedder's identity is the hash
        // function, independent of the mock seed.
        let seed = Fnv1a::new().write(b"embed-v1").write(text.as_bytes()).finish();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<f64> = (0..self.cfg.embed_dim)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        normalize(&mut v);
        Ok(v)
    }

    fn id(&self) -> &str {
        "mock-hash-64"
    }
}
