//! High-level task plans: ordered (region, termination-condition) stages.
//!
//! A plan is produced by a backend — either a canned per-task reply or a
//! remote chat-completion endpoint — then parsed out of free-form text and
//! filtered against the scene vocabulary so that every surviving step names a
//! real object label and a known termination condition.

mod fixtures;
mod remote;

pub use remote::RemoteConfig;

use crate::error::PlanError;

/// The fixed termination-condition vocabulary, shared by every task.
pub const CONDITION_VOCABULARY: [&str; 6] = ["grasp", "place", "push", "open", "close", "turn"];

/// Default formatting clause inserted into prompts.
pub const DEFAULT_FORMATTING_CLAUSE: &str =
    "a list in which each element looks like: (<object/region>, <stage termination condition>)";

/// One stage of a plan: go to `region`, act until `condition` fires.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PlanStep {
    /// Natural-language label of an object or receptacle in the scene.
    pub region: String,
    /// Termination-condition name; one of [`CONDITION_VOCABULARY`] after filtering.
    pub condition: String,
}

/// Which backend produced a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanSource {
    Scripted,
    Remote,
}

/// An ordered list of stages plus the verbatim backend reply it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
    pub source: PlanSource,
    /// The unparsed backend output, preserved for audit.
    pub raw_text: String,
}

/// Everything needed to build a planning prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSpec {
    /// The task description sentence, e.g. "Put the can into bin 1.".
    pub task_description: String,
    /// Condition names listed in the prompt header; identical across tasks.
    pub condition_vocabulary: Vec<String>,
    /// The output-format clause, normally [`DEFAULT_FORMATTING_CLAUSE`].
    pub formatting_clause: String,
}

impl PromptSpec {
    /// A spec with the standard vocabulary and formatting clause.
    pub fn for_task(description: &str) -> Self {
        PromptSpec {
            task_description: description.to_string(),
            condition_vocabulary: CONDITION_VOCABULARY.iter().map(|c| c.to_string()).collect(),
            formatting_clause: DEFAULT_FORMATTING_CLAUSE.to_string(),
        }
    }
}

/// Plan-producing backends.
#[derive(Debug, Clone)]
pub enum Backend {
    /// Canned reply keyed by task name; the prompt is ignored (replies are
    /// pre-recorded per task, which keeps results reproducible offline).
    Scripted { task: String },
    /// JSON-over-HTTP chat-completion endpoint.
    Remote(RemoteConfig),
}

/// Build the planning prompt: condition list, task description, instruction,
/// formatting clause, and the closing "Don't output anything else." line.
pub fn build_prompt(spec: &PromptSpec) -> Result<String, PlanError> {
    if spec.task_description.trim().is_empty() {
        return Err(PlanError::Validation { msg: "task description is empty".into() });
    }
    if spec.condition_vocabulary.is_empty()
        || spec.condition_vocabulary.iter().any(|c| c.trim().is_empty())
    {
        return Err(PlanError::Validation { msg: "condition vocabulary is empty".into() });
    }
    if spec.formatting_clause.trim().is_empty() {
        return Err(PlanError::Validation { msg: "formatting clause is empty".into() });
    }
    Ok(format!(
        "Stage termination conditions: ({}).\n\
         Task description: {}\n\
         Give me a simple plan to solve the task using only the stage termination conditions. \
         Make sure the plan follows the formatting specified below and make sure to take into \
         account object geometry.\n\
         Formatting of output: {}.\n\
         Don't output anything else.",
        spec.condition_vocabulary.join(", "),
        spec.task_description,
        spec.formatting_clause,
    ))
}

/// Characters stripped from the ends of every parsed fragment. Covers straight,
/// typographic, and backtick quotes plus the angle brackets from the format
/// template, so replies with mixed or mismatched quoting still parse.
const QUOTE_CHARS: [char; 9] = ['"', '\'', '\u{201C}', '\u{201D}', '\u{2018}', '\u{2019}', '`', '<', '>'];

fn clean_fragment(s: &str) -> &str {
    s.trim().trim_matches(|c| QUOTE_CHARS.contains(&c)).trim()
}

fn parse_pair(inner: &str) -> Option<PlanStep> {
    let (region_raw, condition_raw) = inner.rsplit_once(',')?;
    let region = clean_fragment(region_raw);
    let condition = clean_fragment(condition_raw);
    (!region.is_empty() && !condition.is_empty()).then(|| PlanStep {
        region: region.to_string(),
        condition: condition.to_string(),
    })
}

/// Extract an ordered step list from a free-form backend reply.
///
/// Tolerant grammar: any parenthesized `(region, condition)` pairs inside the
/// first `[` … last `]` span (or anywhere in the text when there is no
/// bracketed list), with prose before/after ignored and quote variants
/// stripped. Errors only when no pair can be recovered at all.
pub fn parse_plan(raw: &str, source: PlanSource) -> Result<Plan, PlanError> {
    let span = match (raw.find('['), raw.rfind(']')) {
        (Some(a), Some(b)) if a < b => &raw[a + 1..b],
        _ => raw,
    };
    let mut steps = Vec::new();
    let mut rest = span;
    while let Some(open) = rest.find('(') {
        let after = &rest[open + 1..];
        let Some(close) = after.find(')') else { break };
        if let Some(step) = parse_pair(&after[..close]) {
            steps.push(step);
        }
        rest = &after[close + 1..];
    }
    if steps.is_empty() {
        return Err(PlanError::ParseError { msg: raw.to_string() });
    }
    Ok(Plan { steps, source, raw_text: raw.to_string() })
}

/// Canonical formatter: the inverse of [`parse_plan`] for well-formed plans.
pub fn render_plan(steps: &[PlanStep]) -> String {
    let items: Vec<String> = steps
        .iter()
        .map(|s| format!("(\"{}\", \"{}\")", s.region, s.condition))
        .collect();
    format!("[{}]", items.join(", "))
}

/// Lowercased alphanumeric tokens of a label or region string.
fn tokens(s: &str) -> Vec<String> {
    s.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// True when `needle` appears within `hay` in order (not necessarily adjacent).
fn is_subsequence(needle: &[String], hay: &[String]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}

/// Find the scene label a region string refers to: exact token equality first,
/// then the label whose tokens appear as a subsequence of the region's tokens
/// (most specific label wins; earlier vocabulary entry breaks ties).
fn match_region(region: &str, scene_vocabulary: &[String]) -> Option<usize> {
    let region_tokens = tokens(region);
    if region_tokens.is_empty() {
        return None;
    }
    let mut best: Option<(usize, usize)> = None; // (label token count, index)
    for (i, label) in scene_vocabulary.iter().enumerate() {
        let label_tokens = tokens(label);
        if label_tokens == region_tokens {
            return Some(i);
        }
        if !label_tokens.is_empty() && is_subsequence(&label_tokens, &region_tokens) {
            match best {
                Some((n, _)) if n >= label_tokens.len() => {}
                _ => best = Some((label_tokens.len(), i)),
            }
        }
    }
    best.map(|(_, i)| i)
}

/// Remove hallucinated steps: any step whose condition is outside
/// `condition_vocabulary` or whose region matches no scene label. Survivors
/// keep their order and are canonicalized to the matched scene label and
/// vocabulary condition name, so downstream lookups never re-match text.
pub fn filter_plan(
    plan: &Plan,
    scene_vocabulary: &[String],
    condition_vocabulary: &[&str],
) -> Result<Plan, PlanError> {
    let mut steps = Vec::new();
    for step in &plan.steps {
        let cond_tokens = tokens(&step.condition);
        let Some(cond) = condition_vocabulary.iter().find(|c| tokens(c) == cond_tokens) else {
            continue;
        };
        let Some(label_idx) = match_region(&step.region, scene_vocabulary) else {
            continue;
        };
        steps.push(PlanStep {
            region: scene_vocabulary[label_idx].clone(),
            condition: cond.to_string(),
        });
    }
    if steps.is_empty() {
        return Err(PlanError::EmptyPlanError);
    }
    Ok(Plan { steps, source: plan.source, raw_text: plan.raw_text.clone() })
}

/// Obtain the raw reply text for a prompt from the given backend.
///
/// The scripted backend's output depends only on the task name. The remote
/// backend issues a single chat-completion request (temperature 0) with up to
/// three attempts under exponential backoff.
pub fn query_backend(backend: &Backend, prompt: &str) -> Result<String, PlanError> {
    match backend {
        Backend::Scripted { task } => fixtures::scripted_reply(task)
            .map(str::to_string)
            .ok_or_else(|| PlanError::NoFixture { task: task.clone() }),
        Backend::Remote(cfg) => remote::complete(cfg, prompt),
    }
}

/// Full pipeline: build the prompt, query the backend, parse, and filter.
pub fn make_plan(
    backend: &Backend,
    spec: &PromptSpec,
    scene_vocabulary: &[String],
) -> Result<Plan, PlanError> {
    let prompt = build_prompt(spec)?;
    let raw = query_backend(backend, &prompt)?;
    let source = match backend {
        Backend::Scripted { .. } => PlanSource::Scripted,
        Backend::Remote(_) => PlanSource::Remote,
    };
    let plan = parse_plan(&raw, source)?;
    filter_plan(&plan, scene_vocabulary, &CONDITION_VOCABULARY)
}

/// Scripted plan for a task registered in the simulator, filtered against
/// that task's own scene vocabulary.
pub fn scripted_plan_for_task(task: &str) -> Result<Plan, PlanError> {
    let spec = crate::sim::task_spec(task)
        .map_err(|_| PlanError::NoFixture { task: task.to_string() })?;
    make_plan(
        &Backend::Scripted { task: task.to_string() },
        &PromptSpec::for_task(&spec.description),
        &spec.vocabulary,
    )
}
