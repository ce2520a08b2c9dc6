//! Per-action prompt templates with named placeholders.
//!
//! Templates are plain text with `{question}` and `{prior_steps}`
//! placeholders. Rendering is purely textual and deterministic: the same
//! inputs always produce the same prompt. The companion crate loads
//! user-supplied templates from a directory (one UTF-8 file per action
//! kind); this module carries the built-in defaults.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::action::AtomicAction;

/// Name of the `{question}` placeholder.
pub const PLACEHOLDER_QUESTION: &str = "question";
/// Name of the `{prior_steps}` placeholder.
pub const PLACEHOLDER_PRIOR_STEPS: &str = "prior_steps";

/// Header line prefix identifying the action a prompt elicits.
pub const ACTION_HEADER: &str = "### Action: ";
/// Header line identifying the complexity-extraction prompt.
pub const COMPLEXITY_HEADER: &str = "### Task: complexity-profile";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    /// The template references a placeholder nothing can fill.
    #[error("unknown placeholder {{{name}}} in template")]
    UnknownPlaceholder { name: String },
}

/// The full set of prompt templates: one per atomic action, plus the
/// complexity-extraction prompt used for SC/PCC measurement.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    action_templates: [String; 5],
    complexity_template: String,
}

impl Default for TemplateSet {
    fn default() -> Self {
        let mut action_templates: [String; 5] = Default::default();
        for (i, action) in AtomicAction::ALL.iter().enumerate() {
            action_templates[i] = default_action_template(*action).to_string();
        }
        TemplateSet {
            action_templates,
            complexity_template: DEFAULT_COMPLEXITY_TEMPLATE.to_string(),
        }
    }
}

impl TemplateSet {
    /// Template text for one action.
    pub fn action_template(&self, action: AtomicAction) -> &str {
        &self.action_templates[action_index(action)]
    }

    /// Replace the template for one action (e.g. with text loaded from a
    /// template directory).
    pub fn set_action_template(&mut self, action: AtomicAction, text: String) {
        self.action_templates[action_index(action)] = text;
    }

    /// Template used to extract SC/PCC complexity counts.
    pub fn complexity_template(&self) -> &str {
        &self.complexity_template
    }

    pub fn set_complexity_template(&mut self, text: String) {
        self.complexity_template = text;
    }

    /// Render the prompt eliciting `action` for `question` given the prior
    /// step texts, in order.
    pub fn render_prompt(
        &self,
        question: &str,
        prior_steps: &[String],
        action: AtomicAction,
    ) -> Result<String, PromptError> {
        render(self.action_template(action), question, prior_steps)
    }

    /// Render the complexity-extraction prompt.
    pub fn render_complexity_prompt(&self, question: &str) -> Result<String, PromptError> {
        render(&self.complexity_template, question, &[])
    }
}

fn action_index(action: AtomicAction) -> usize {
    AtomicAction::ALL
        .iter()
        .position(|a| *a == action)
        .expect("action is one of ALL")
}

/// Substitute placeholders. `{question}` expands to the question verbatim;
/// `{prior_steps}` expands to the step texts, one per line, or `(none)`
/// when there are none. Any other `{identifier}` is an error; braces not
/// forming an identifier span are copied through.
fn render(template: &str, question: &str, prior_steps: &[String]) -> Result<String, PromptError> {
    let steps_block = if prior_steps.is_empty() {
        "(none)".to_string()
    } else {
        prior_steps.join("\n")
    };
    let mut out = String::with_capacity(template.len() + question.len() + steps_block.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                let name = &after[..close];
                if name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_')
                    && !name.is_empty()
                {
                    match name {
                        PLACEHOLDER_QUESTION => out.push_str(question),
                        PLACEHOLDER_PRIOR_STEPS => out.push_str(&steps_block),
                        other => {
                            return Err(PromptError::UnknownPlaceholder {
                                name: other.to_string(),
                            })
                        }
                    }
                    rest = &after[close + 1..];
                } else {
                    out.push('{');
                    rest = after;
                }
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

fn default_action_template(action: AtomicAction) -> &'static str {
    match action {
        AtomicAction::SystemAnalysis => DEFAULT_SA_TEMPLATE,
        AtomicAction::OneStepThought => DEFAULT_OST_TEMPLATE,
        AtomicAction::ChainOfThought => DEFAULT_COT_TEMPLATE,
        AtomicAction::DivideAndConquer => DEFAULT_DC_TEMPLATE,
        AtomicAction::SelfReflection => DEFAULT_SRR_TEMPLATE,
    }
}

const DEFAULT_SA_TEMPLATE: &str = "### Action: SA
Examine the problem before solving it: list the given conditions and
constraints, and state exactly what must be found. Do not solve anything yet.

Question:
{question}

Steps so far:
{prior_steps}

Write the analysis as a single step.
";

const DEFAULT_OST_TEMPLATE: &str = "### Action: OST
Produce exactly the next reasoning step that follows from the work so far.
One step only; do not jump to the final answer.

Question:
{question}

Steps so far:
{prior_steps}
";

const DEFAULT_COT_TEMPLATE: &str = "### Action: CoT
Reason through the problem step by step, building on the work so far, and
finish with a line of the form \"The answer is <answer>.\"

Question:
{question}

Steps so far:
{prior_steps}
";

const DEFAULT_DC_TEMPLATE: &str = "### Action: DC
Break the problem into smaller subproblems and work through them in order.
If this completes the solution, finish with a line of the form
\"The answer is <answer>.\"

Question:
{question}

Steps so far:
{prior_steps}
";

const DEFAULT_SRR_TEMPLATE: &str = "### Action: SRR
Review the steps so far for mistakes or gaps. If something is wrong, state
the corrected step; otherwise confirm the work and sharpen it.

Question:
{question}

Steps so far:
{prior_steps}
";

const DEFAULT_COMPLEXITY_TEMPLATE: &str = "### Task: complexity-profile
Count how many subquestions the problem decomposes into (SC) and how many
stated conditions it provides (PCC).

Question:
{question}

Reply with one line of the form: SC=<int>; PCC=<int>
";
