//! Four-phase Monte Carlo tree search over reasoning trajectories.
//!
//! One search explores a single question. Nodes hold an action, the text
//! the policy model generated for it, a reward estimate `Q` in [0, 1], and
//! a visit count `N`. Selection walks the tree by UCT; expansion samples
//! actions and generates their step texts; simulation rolls out to a
//! terminal state (with self-consistency early termination); terminal
//! rewards are the modal-vote confidence of sampled answers; and
//! backpropagation folds the reward into every ancestor as a convex
//! combination.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{allowed_actions, is_terminal, AtomicAction};
use crate::answer::normalize_answer;
use crate::gateway::{GatewayError, PolicyBackend};
use crate::math;
use crate::prompt::{PromptError, TemplateSet};
use crate::verify::majority_vote;

/// Index of a node in its [`SearchTree`] arena.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

/// A node of the search tree. The root carries no action and empty text.
#[derive(Debug, Clone)]
pub struct TreeNode {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub action: Option<AtomicAction>,
    pub step_text: String,
    pub q_value: f64,
    pub visit_count: u64,
    pub children: Vec<NodeId>,
    pub depth: usize,
    /// Set when the step text states an answer or the node sits at `d_max`.
    pub terminal: bool,
    /// Normalized answer extracted from the step text, when present.
    pub answer: Option<String>,
}

/// Search hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Maximum tree depth.
    pub d_max: usize,
    /// UCT exploration weight.
    pub w: f64,
    /// Early-termination threshold on the self-consistency score.
    pub c: f64,
    /// Backpropagation weight on the child value.
    pub alpha: f64,
    /// Children added per expansion.
    pub n_expand: usize,
    /// Full select/expand/simulate/backpropagate cycles to run.
    pub iterations: usize,
    /// Votes per self-consistency estimate.
    pub sc_samples: usize,
    pub rng_seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            d_max: 5,
            w: 2.0,
            c: 0.90,
            alpha: 0.5,
            n_expand: 4,
            iterations: 16,
            sc_samples: 4,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("question must be nonempty")]
    EmptyQuestion,
    #[error("no terminal trajectory found after {iterations} iterations")]
    NoTerminalFound { iterations: usize },
    #[error("node cannot be expanded: {reason}")]
    NotExpandable { reason: String },
}

/// The search tree for one question.
#[derive(Debug, Clone)]
pub struct SearchTree {
    pub question: String,
    nodes: Vec<TreeNode>,
}

impl SearchTree {
    pub fn new(question: impl Into<String>) -> Self {
        let root = TreeNode {
            id: NodeId(0),
            parent: None,
            action: None,
            step_text: String::new(),
            q_value: 0.0,
            visit_count: 0,
            children: Vec::new(),
            depth: 0,
            terminal: false,
            answer: None,
        };
        SearchTree {
            question: question.into(),
            nodes: alloc::vec![root],
        }
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id.0]
    }

    fn node_mut(&mut self, id: NodeId) -> &mut TreeNode {
        &mut self.nodes[id.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter()
    }

    /// Append a child under `parent`. `terminal`/`answer` are derived from
    /// the action, the step text, and the depth cap.
    pub fn add_child(
        &mut self,
        parent: NodeId,
        action: AtomicAction,
        step_text: String,
        d_max: usize,
    ) -> NodeId {
        let id = NodeId(self.nodes.len());
        let depth = self.node(parent).depth + 1;
        let answered = is_terminal(action, &step_text);
        let node = TreeNode {
            id,
            parent: Some(parent),
            action: Some(action),
            answer: answered.then(|| normalize_answer(&step_text).expect("marker present")),
            terminal: answered || depth >= d_max,
            q_value: 0.0,
            visit_count: 0,
            children: Vec::new(),
            depth,
            step_text,
        };
        self.nodes.push(node);
        self.node_mut(parent).children.push(id);
        id
    }

    /// Root-to-node action sequence (the root contributes nothing).
    pub fn prefix_actions(&self, id: NodeId) -> Vec<AtomicAction> {
        let mut actions = Vec::new();
        let mut cur = Some(id);
        while let Some(node_id) = cur {
            let node = self.node(node_id);
            if let Some(a) = node.action {
                actions.push(a);
            }
            cur = node.parent;
        }
        actions.reverse();
        actions
    }

    /// Root-to-node step texts, in trajectory order.
    pub fn step_texts(&self, id: NodeId) -> Vec<String> {
        let mut texts = Vec::new();
        let mut cur = Some(id);
        while let Some(node_id) = cur {
            let node = self.node(node_id);
            if node.action.is_some() {
                texts.push(node.step_text.clone());
            }
            cur = node.parent;
        }
        texts.reverse();
        texts
    }

    /// Find an existing child matching an (action, step text) pair.
    pub fn find_child(&self, parent: NodeId, action: AtomicAction, step_text: &str) -> Option<NodeId> {
        self.node(parent)
            .children
            .iter()
            .copied()
            .find(|&c| {
                let n = self.node(c);
                n.action == Some(action) && n.step_text == step_text
            })
    }

    /// Flat node records for trace export and oracle comparison.
    pub fn records(&self) -> Vec<NodeRecord> {
        self.nodes
            .iter()
            .map(|n| NodeRecord {
                node_id: n.id.0,
                parent: n.parent.map(|p| p.0),
                action: n.action,
                q: n.q_value,
                n: n.visit_count,
                terminal: n.terminal,
                answer: n.answer.clone(),
            })
            .collect()
    }
}

/// One line of the per-question search trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub node_id: usize,
    pub parent: Option<usize>,
    pub action: Option<AtomicAction>,
    pub q: f64,
    pub n: u64,
    pub terminal: bool,
    pub answer: Option<String>,
}

/// The UCT value `q + w * sqrt(ln(n_parent) / n_self)`. Unvisited nodes
/// rank infinitely high so they are tried before any revisit.
pub fn uct_value(q: f64, n_self: u64, n_parent: u64, w: f64) -> f64 {
    if n_self == 0 {
        return f64::INFINITY;
    }
    debug_assert!(n_parent >= 1);
    let n_parent = n_parent.max(1);
    q + w * math::sqrt(math::ln(n_parent as f64) / n_self as f64)
}

/// Walk from the root, at each level taking the child with the highest UCT
/// value (ties resolve to the lowest node id), until reaching a childless
/// node.
pub fn select(tree: &SearchTree, w: f64) -> NodeId {
    let mut cur = tree.root();
    loop {
        let node = tree.node(cur);
        if node.children.is_empty() {
            return cur;
        }
        let parent_visits = node.visit_count;
        let mut best = node.children[0];
        let mut best_value = f64::NEG_INFINITY;
        for &child in &node.children {
            let c = tree.node(child);
            let value = uct_value(c.q_value, c.visit_count, parent_visits, w);
            // Strictly-greater keeps the earliest (lowest-id) child on ties;
            // children are stored in creation order.
            if value > best_value {
                best_value = value;
                best = child;
            }
        }
        cur = best;
    }
}

/// Expand `node` by sampling up to `n_expand` actions from the legal set
/// and generating one step text per draw. Draws cover the legal actions
/// before repeating any (repeats only matter for backends that sample
/// fresh text per call); duplicate (action, text) children are dropped.
pub fn expand(
    tree: &mut SearchTree,
    node: NodeId,
    backend: &dyn PolicyBackend,
    templates: &TemplateSet,
    cfg: &SearchConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<NodeId>, EngineError> {
    let n = tree.node(node);
    if n.terminal {
        return Err(EngineError::NotExpandable {
            reason: "node is terminal".to_string(),
        });
    }
    if n.depth >= cfg.d_max {
        return Err(EngineError::NotExpandable {
            reason: format!("node is at maximum depth {}", cfg.d_max),
        });
    }
    let prefix = tree.prefix_actions(node);
    let steps = tree.step_texts(node);
    let allowed = allowed_actions(&prefix);
    debug_assert!(!allowed.is_empty(), "non-terminal prefixes stay open");

    let mut draws = Vec::with_capacity(cfg.n_expand);
    let mut order = allowed.clone();
    use rand::seq::SliceRandom;
    order.shuffle(rng);
    for i in 0..cfg.n_expand {
        if i < order.len() {
            draws.push(order[i]);
        } else {
            draws.push(allowed[rng.random_range(0..allowed.len())]);
        }
    }

    let mut added = Vec::new();
    for action in draws {
        let prompt = templates.render_prompt(&tree.question, &steps, action)?;
        let mut texts = backend.generate_step(&prompt, 1)?;
        let text = texts.pop().ok_or_else(|| GatewayError::MalformedResponse {
            detail: "backend returned no completion".to_string(),
        })?;
        if tree.find_child(node, action, &text).is_none() {
            added.push(tree.add_child(node, action, text, cfg.d_max));
        }
    }
    Ok(added)
}

/// Self-consistency reward of a terminal trajectory: the modal fraction of
/// `m` sampled answers.
pub fn terminal_reward(
    backend: &dyn PolicyBackend,
    question: &str,
    steps: &[String],
    m: usize,
) -> Result<f64, GatewayError> {
    let votes = backend.sample_answers(question, steps, m)?;
    let (_, confidence) = majority_vote(&votes);
    Ok(confidence)
}

/// Roll out from `node`, sampling one action and step per level, until a
/// terminal state or the depth cap. After each non-terminal step the
/// self-consistency score of the partial trajectory is checked; once it
/// exceeds `cfg.c` the rollout stops early with that confidence as the
/// reward and issues no deeper generation call.
pub fn simulate(
    tree: &mut SearchTree,
    node: NodeId,
    backend: &dyn PolicyBackend,
    templates: &TemplateSet,
    cfg: &SearchConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(NodeId, f64), EngineError> {
    let mut cur = node;
    if tree.node(cur).terminal {
        let steps = tree.step_texts(cur);
        let reward = terminal_reward(backend, &tree.question, &steps, cfg.sc_samples)?;
        return Ok((cur, reward));
    }
    loop {
        let prefix = tree.prefix_actions(cur);
        let steps = tree.step_texts(cur);
        let allowed = allowed_actions(&prefix);
        let action = allowed[rng.random_range(0..allowed.len())];
        let prompt = templates.render_prompt(&tree.question, &steps, action)?;
        let mut texts = backend.generate_step(&prompt, 1)?;
        let text = texts.pop().ok_or_else(|| GatewayError::MalformedResponse {
            detail: "backend returned no completion".to_string(),
        })?;
        cur = match tree.find_child(cur, action, &text) {
            Some(existing) => existing,
            None => tree.add_child(cur, action, text, cfg.d_max),
        };
        let steps = tree.step_texts(cur);
        if tree.node(cur).terminal {
            let reward = terminal_reward(backend, &tree.question, &steps, cfg.sc_samples)?;
            return Ok((cur, reward));
        }
        let votes = backend.sample_answers(&tree.question, &steps, cfg.sc_samples)?;
        let (_, confidence) = majority_vote(&votes);
        if confidence > cfg.c {
            return Ok((cur, confidence));
        }
    }
}

/// Fold `reward` into the path from `leaf` to the root: every node's visit
/// count is incremented; the leaf takes the reward directly on its first
/// visit and a convex combination afterwards; each ancestor `p` with
/// on-path child `s` takes `(1 - alpha) * Q(p) + alpha * Q(s)`.
pub fn backpropagate(tree: &mut SearchTree, leaf: NodeId, reward: f64, alpha: f64) {
    debug_assert!((0.0..=1.0).contains(&reward));
    {
        let node = tree.node_mut(leaf);
        node.visit_count += 1;
        node.q_value = if node.visit_count == 1 {
            reward
        } else {
            (1.0 - alpha) * node.q_value + alpha * reward
        };
    }
    let mut child = leaf;
    while let Some(parent) = tree.node(child).parent {
        let child_q = tree.node(child).q_value;
        let p = tree.node_mut(parent);
        p.visit_count += 1;
        p.q_value = (1.0 - alpha) * p.q_value + alpha * child_q;
        child = parent;
    }
}

/// Run `cfg.iterations` full search cycles for one question.
///
/// Fails with [`EngineError::NoTerminalFound`] when no answer-bearing
/// terminal node exists afterwards.
pub fn run_search(
    question: &str,
    backend: &dyn PolicyBackend,
    templates: &TemplateSet,
    cfg: &SearchConfig,
) -> Result<SearchTree, EngineError> {
    if question.is_empty() {
        return Err(EngineError::EmptyQuestion);
    }
    let mut tree = SearchTree::new(question);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    for _ in 0..cfg.iterations {
        let leaf = select(&tree, cfg.w);
        let node = tree.node(leaf);
        if !node.terminal && node.depth < cfg.d_max && node.children.is_empty() {
            expand(&mut tree, leaf, backend, templates, cfg, &mut rng)?;
        }
        let (end, reward) = simulate(&mut tree, leaf, backend, templates, cfg, &mut rng)?;
        backpropagate(&mut tree, end, reward, cfg.alpha);
    }
    if !tree.nodes().any(|n| n.terminal && n.answer.is_some()) {
        return Err(EngineError::NoTerminalFound {
            iterations: cfg.iterations,
        });
    }
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mock::{MockBackend, MockConfig};
    use alloc::vec;

    fn fixture() -> (MockBackend, TemplateSet, SearchConfig) {
        let backend = MockBackend::new(MockConfig {
            seed: 3,
            ..MockConfig::default()
        });
        (backend, TemplateSet::default(), SearchConfig::default())
    }

    #[test]
    fn uct_matches_direct_evaluation() {
        assert!((uct_value(0.5, 2, 8, 2.0) - 2.5393).abs() < 1e-4);
        assert!((uct_value(0.9, 5, 10, 2.0) - 2.2572).abs() < 1e-4);
        assert_eq!(uct_value(0.3, 0, 4, 2.0), f64::INFINITY);
        assert_eq!(uct_value(0.7, 3, 3, 0.0), 0.7);
    }

    #[test]
    fn select_prefers_higher_uct_and_unvisited_children() {
        let mut tree = SearchTree::new("[[a-0000]] q");
        let c1 = tree.add_child(tree.root(), AtomicAction::SystemAnalysis, "[a-0000|SA|0] s".into(), 5);
        let c2 = tree.add_child(tree.root(), AtomicAction::OneStepThought, "[a-0000|OST|0] s".into(), 5);
        tree.node_mut(tree.root()).visit_count = 2;
        tree.node_mut(c1).visit_count = 1;
        tree.node_mut(c1).q_value = 0.2;
        tree.node_mut(c2).visit_count = 1;
        tree.node_mut(c2).q_value = 0.9;
        assert_eq!(select(&tree, 2.0), c2);

        // An unvisited sibling outranks any visited one.
        tree.node_mut(c2).visit_count = 0;
        tree.node_mut(c1).q_value = 10.0; // even absurdly high finite Q loses
        assert_eq!(select(&tree, 2.0), c2);
    }

    #[test]
    fn select_returns_root_when_childless() {
        let tree = SearchTree::new("[[a-0000]] q");
        assert_eq!(select(&tree, 2.0), tree.root());
    }

    #[test]
    fn select_breaks_ties_toward_lowest_node_id() {
        let mut tree = SearchTree::new("[[a-0000]] q");
        let c1 = tree.add_child(tree.root(), AtomicAction::SystemAnalysis, "[a-0000|SA|0] s".into(), 5);
        let _c2 = tree.add_child(tree.root(), AtomicAction::OneStepThought, "[a-0000|OST|0] s".into(), 5);
        tree.node_mut(tree.root()).visit_count = 2;
        // Both unvisited: both +inf.
        assert_eq!(select(&tree, 2.0), c1);
    }

    #[test]
    fn expansion_is_deterministic_and_deduplicated() {
        let (backend, templates, cfg) = fixture();
        let q = backend.question_text(0, 0);

        let mut tree1 = SearchTree::new(q.clone());
        let mut rng1 = ChaCha8Rng::seed_from_u64(9);
        let kids1 = expand(&mut tree1, tree1.root(), &backend, &templates, &cfg, &mut rng1).unwrap();

        let mut tree2 = SearchTree::new(q);
        let mut rng2 = ChaCha8Rng::seed_from_u64(9);
        let kids2 = expand(&mut tree2, tree2.root(), &backend, &templates, &cfg, &mut rng2).unwrap();

        assert_eq!(kids1.len(), kids2.len());
        let sig = |t: &SearchTree, ids: &[NodeId]| -> Vec<(AtomicAction, String)> {
            ids.iter()
                .map(|&id| (t.node(id).action.unwrap(), t.node(id).step_text.clone()))
                .collect()
        };
        assert_eq!(sig(&tree1, &kids1), sig(&tree2, &kids2));

        // With n_expand = 4 and four legal root actions, all are covered.
        let mut actions: Vec<_> = kids1.iter().map(|&id| tree1.node(id).action.unwrap()).collect();
        actions.sort();
        actions.dedup();
        assert_eq!(actions.len(), 4);
    }

    #[test]
    fn expanding_a_terminal_node_is_a_precondition_violation() {
        let (backend, templates, cfg) = fixture();
        let q = backend.question_text(0, 0);
        let mut tree = SearchTree::new(q);
        let cot = tree.add_child(
            tree.root(),
            AtomicAction::ChainOfThought,
            "[a-0000|CoT|0] done. The answer is 3.".into(),
            cfg.d_max,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = expand(&mut tree, cot, &backend, &templates, &cfg, &mut rng).unwrap_err();
        assert!(matches!(err, EngineError::NotExpandable { .. }));
    }

    #[test]
    fn children_at_depth_cap_are_terminal() {
        let (backend, templates, _) = fixture();
        let cfg = SearchConfig {
            d_max: 1,
            ..SearchConfig::default()
        };
        let q = backend.question_text(0, 0);
        let mut tree = SearchTree::new(q);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let kids = expand(&mut tree, tree.root(), &backend, &templates, &cfg, &mut rng).unwrap();
        assert!(kids.iter().all(|&id| tree.node(id).terminal));
    }

    #[test]
    fn backpropagation_matches_direct_evaluation() {
        let mut tree = SearchTree::new("[[a-0000]] q");
        let child = tree.add_child(tree.root(), AtomicAction::ChainOfThought, "[a-0000|CoT|0] The answer is 1.".into(), 5);
        // Pin parent Q at 0.2 with one prior visit, child Q at 1.0.
        tree.node_mut(tree.root()).q_value = 0.2;
        tree.node_mut(tree.root()).visit_count = 1;
        backpropagate(&mut tree, child, 1.0, 0.5);
        assert!((tree.node(child).q_value - 1.0).abs() < 1e-12);
        assert!((tree.node(tree.root()).q_value - 0.6).abs() < 1e-12);

        let mut tree = SearchTree::new("[[a-0000]] q");
        let child = tree.add_child(tree.root(), AtomicAction::ChainOfThought, "[a-0000|CoT|0] The answer is 1.".into(), 5);
        backpropagate(&mut tree, child, 0.75, 0.5);
        assert!((tree.node(tree.root()).q_value - 0.375).abs() < 1e-12);
    }

    #[test]
    fn repeated_backpropagation_converges_to_the_reward() {
        let mut tree = SearchTree::new("[[a-0000]] q");
        let mid = tree.add_child(tree.root(), AtomicAction::SystemAnalysis, "[a-0000|SA|0] s".into(), 5);
        let leaf = tree.add_child(mid, AtomicAction::ChainOfThought, "[a-0000|CoT|1] The answer is 1.".into(), 5);
        for _ in 0..50 {
            backpropagate(&mut tree, leaf, 0.8, 0.5);
        }
        assert!((tree.node(tree.root()).q_value - 0.8).abs() < 1e-6);
        assert!((tree.node(mid).q_value - 0.8).abs() < 1e-6);
    }

    #[test]
    fn run_search_is_deterministic_and_counts_root_visits() {
        let (backend, templates, cfg) = fixture();
        let q = backend.question_text(0, 1);
        let t1 = run_search(&q, &backend, &templates, &cfg).unwrap();
        let t2 = run_search(&q, &backend, &templates, &cfg).unwrap();
        assert_eq!(t1.records(), t2.records());
        assert_eq!(t1.node(t1.root()).visit_count, cfg.iterations as u64);
    }

    #[test]
    fn q_values_stay_in_unit_interval() {
        let (backend, templates, cfg) = fixture();
        let q = backend.question_text(1, 4);
        let tree = run_search(&q, &backend, &templates, &cfg).unwrap();
        for node in tree.nodes() {
            assert!((0.0..=1.0).contains(&node.q_value), "{node:?}");
            assert!(node.depth <= cfg.d_max);
            if node.terminal {
                assert!(node.answer.is_some() || node.depth == cfg.d_max);
            }
        }
    }

    #[test]
    fn single_iteration_tree_stays_small() {
        let (backend, templates, _) = fixture();
        let cfg = SearchConfig {
            iterations: 1,
            ..SearchConfig::default()
        };
        let q = backend.question_text(0, 2);
        let tree = run_search(&q, &backend, &templates, &cfg).unwrap();
        assert!(tree.len() <= 1 + cfg.n_expand + cfg.d_max);
    }

    #[test]
    fn visit_counts_dominate_children_sums() {
        let (backend, templates, cfg) = fixture();
        let q = backend.question_text(0, 6);
        let tree = run_search(&q, &backend, &templates, &cfg).unwrap();
        for node in tree.nodes() {
            let child_sum: u64 = node.children.iter().map(|&c| tree.node(c).visit_count).sum();
            assert!(node.visit_count >= child_sum, "node {:?}", node.id);
        }
    }

    #[test]
    fn greedy_select_with_zero_weight_is_argmax_q() {
        let mut tree = SearchTree::new("[[a-0000]] q");
        let ids: Vec<NodeId> = (0..3)
            .map(|i| {
                tree.add_child(
                    tree.root(),
                    AtomicAction::OneStepThought,
                    format!("[a-0000|OST|0] v{i}"),
                    5,
                )
            })
            .collect();
        tree.node_mut(tree.root()).visit_count = 3;
        for (i, &id) in ids.iter().enumerate() {
            tree.node_mut(id).visit_count = 1;
            tree.node_mut(id).q_value = [0.4, 0.9, 0.6][i];
        }
        assert_eq!(select(&tree, 0.0), ids[1]);
    }

    #[test]
    fn simulate_on_terminal_node_only_votes() {
        let (backend, templates, cfg) = fixture();
        let q = backend.question_text(0, 0);
        let id = backend.question_id(0, 0);
        let mut tree = SearchTree::new(q);
        let planted = backend.planted_answer(&id);
        let leaf = tree.add_child(
            tree.root(),
            AtomicAction::ChainOfThought,
            format!("[{id}|CoT|0] direct. The answer is {planted}."),
            cfg.d_max,
        );
        backend.clear_log();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (end, reward) = simulate(&mut tree, leaf, &backend, &templates, &cfg, &mut rng).unwrap();
        assert_eq!(end, leaf);
        assert!((0.0..=1.0).contains(&reward));
        let log = backend.log_snapshot();
        assert!(log
            .iter()
            .all(|r| r.kind == crate::mock::CallKind::SampleAnswers));
    }

    #[test]
    fn early_termination_stops_generation_on_that_rollout() {
        // With prefix guidance, a rollout stepping onto the planted template
        // prefix votes unanimously and must stop before generating deeper.
        let (backend, templates, cfg) = fixture();
        let q = backend.question_text(0, 0);
        // Find a seed whose first rollout action is SA (family a opens with SA).
        for seed in 0..64 {
            let mut tree = SearchTree::new(q.clone());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            backend.clear_log();
            let (end, reward) =
                simulate(&mut tree, tree.root(), &backend, &templates, &cfg, &mut rng).unwrap();
            let node = tree.node(end);
            if node.action == Some(AtomicAction::SystemAnalysis) && !node.terminal {
                assert!((reward - 1.0).abs() < 1e-12);
                // After the vote that triggered the stop, no further
                // generation may happen.
                let log = backend.log_snapshot();
                let last_gen = log
                    .iter()
                    .rposition(|r| r.kind == crate::mock::CallKind::Generate)
                    .unwrap();
                let last_vote = log
                    .iter()
                    .rposition(|r| r.kind == crate::mock::CallKind::SampleAnswers)
                    .unwrap();
                assert!(last_vote > last_gen);
                assert_eq!(tree.node(end).depth, 1);
                return;
            }
        }
        panic!("no seed produced an SA-first rollout");
    }

    #[test]
    fn search_tree_records_are_exportable() {
        let (backend, templates, cfg) = fixture();
        let q = backend.question_text(0, 0);
        let tree = run_search(&q, &backend, &templates, &cfg).unwrap();
        let records = tree.records();
        assert_eq!(records.len(), tree.len());
        assert_eq!(records[0].parent, None);
        let json = serde_json::to_string(&records[0]).unwrap();
        assert!(json.contains("\"node_id\":0"));
    }

    #[test]
    fn empty_question_is_rejected() {
        let (backend, templates, cfg) = fixture();
        assert_eq!(
            run_search("", &backend, &templates, &cfg).unwrap_err(),
            EngineError::EmptyQuestion
        );
    }

    #[test]
    fn no_terminal_found_when_depth_cap_blocks_answers() {
        // d_max = 1 with a seed whose only expansion draw and rollout both
        // avoid answer-capable actions leaves no answer in the tree.
        let (backend, templates, _) = fixture();
        let q = backend.question_text(0, 0);
        for seed in 0..256 {
            let cfg = SearchConfig {
                d_max: 1,
                n_expand: 1,
                iterations: 1,
                rng_seed: seed,
                ..SearchConfig::default()
            };
            match run_search(&q, &backend, &templates, &cfg) {
                Err(EngineError::NoTerminalFound { iterations }) => {
                    assert_eq!(iterations, 1);
                    return;
                }
                Ok(_) => continue,
                Err(other) => panic!("unexpected error {other:?}"),
            }
        }
        panic!("no seed avoided answer-capable actions at d_max = 1");
    }
}
