//! Mutant generation by prompting a chat-completion model.
//!
//! A prompt has four sections in fixed order: Context, Input Data, Output
//! Requirements and Instruction. Under the global strategy the whole chart is
//! shown; under the local strategy only one element is. The model answers
//! with element-replacement edits which [`apply_proposal`] materializes.

mod client;
mod proposal;
mod synthetic;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::baseline::{generate_baseline, operator};
use crate::chart::{serialize_chart, Chart, ElementKind};

pub use client::{
    estimate_tokens, prompt_hash, HttpChatClient, LlmClient, LlmEndpointConfig, LlmError, LlmRequest, LlmResponse,
    Provider, RecordingClient, ReplayClient, Usage,
};
pub use proposal::{apply_proposal, parse_proposals, Applied, Edit, MutantProposal, ParseOutcome};
pub use synthetic::SyntheticClient;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Global,
    Local,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Global,
    /// Only the named state or transition may change.
    Local(String),
}

impl Strategy {
    pub fn kind(&self) -> StrategyKind {
        match self {
            Strategy::Global => StrategyKind::Global,
            Strategy::Local(_) => StrategyKind::Local,
        }
    }

    pub fn selected(&self) -> Option<&str> {
        match self {
            Strategy::Global => None,
            Strategy::Local(id) => Some(id),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Template {
    P1,
    P2,
    P3,
    P4,
}

impl Template {
    pub const ALL: [Template; 4] = [Template::P1, Template::P2, Template::P3, Template::P4];

    /// P1/P2 are zero-shot, P3/P4 few-shot; odd templates are global.
    pub fn for_cell(kind: StrategyKind, few_shot: usize) -> Template {
        match (kind, few_shot > 0) {
            (StrategyKind::Global, false) => Template::P1,
            (StrategyKind::Local, false) => Template::P2,
            (StrategyKind::Global, true) => Template::P3,
            (StrategyKind::Local, true) => Template::P4,
        }
    }

    pub fn strategy_kind(self) -> StrategyKind {
        match self {
            Template::P1 | Template::P3 => StrategyKind::Global,
            Template::P2 | Template::P4 => StrategyKind::Local,
        }
    }

    pub fn is_few_shot(self) -> bool {
        matches!(self, Template::P3 | Template::P4)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Template::P1 => "P1",
            Template::P2 => "P2",
            Template::P3 => "P3",
            Template::P4 => "P4",
        }
    }
}

pub const FEW_SHOT_COUNTS: [usize; 3] = [3, 6, 9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub template: Template,
    pub few_shot_count: usize,
    pub strategy: Strategy,
    pub n_mutants: usize,
    pub model_name: String,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PromptError {
    #[error("expected {expected} few-shot examples, got {actual}")]
    ExampleCountMismatch { expected: usize, actual: usize },
    #[error("invalid prompt spec: {0}")]
    InvalidSpec(String),
}

impl PromptSpec {
    pub fn check(&self, chart: &Chart) -> Result<(), PromptError> {
        let bad = |m: String| Err(PromptError::InvalidSpec(m));
        if self.template.strategy_kind() != self.strategy.kind() {
            return bad(format!(
                "{} requires the {:?} strategy",
                self.template.as_str(),
                self.template.strategy_kind()
            ));
        }
        match (self.template.is_few_shot(), self.few_shot_count) {
            (false, 0) => {}
            (true, n) if FEW_SHOT_COUNTS.contains(&n) => {}
            (_, n) => return bad(format!("{} cannot use {n} examples", self.template.as_str())),
        }
        if self.n_mutants == 0 {
            return bad("n_mutants must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.temperature) {
            return bad(format!("temperature {} outside [0, 1]", self.temperature));
        }
        if let Some(id) = self.strategy.selected() {
            if chart.element_kind(id).is_none() {
                return bad(format!("local element `{id}` is not a state or transition of the chart"));
            }
        }
        Ok(())
    }
}

/// A before/after element pair taken from a first-order baseline mutant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub operator_id: String,
    pub kind: ElementKind,
    pub element_id: String,
    pub before: serde_json::Value,
    pub after: serde_json::Value,
}

/// `count` distinct single-element examples from baseline seeds `seed, seed+1, ...`.
pub fn few_shot_examples(chart: &Chart, count: usize, seed: u64) -> Vec<FewShotExample> {
    let mut out: Vec<FewShotExample> = Vec::new();
    for s in (0..10_000u64).map(|i| seed.wrapping_add(i)) {
        if out.len() == count {
            break;
        }
        let Ok((mutant, records)) = generate_baseline(chart, s, true) else { break };
        let rec = &records[0];
        // priority swaps touch two elements and make poor single-element examples
        if rec.operator_id == "T9" {
            continue;
        }
        let after = mutant.element_json(rec.kind, &rec.element_id).expect("mutated element exists");
        if out.iter().any(|e| e.element_id == rec.element_id && e.after == after) {
            continue;
        }
        out.push(FewShotExample {
            operator_id: rec.operator_id.clone(),
            kind: rec.kind,
            element_id: rec.element_id.clone(),
            before: chart.element_json(rec.kind, &rec.element_id).expect("element exists"),
            after,
        });
    }
    out
}

const SCHEMA: &str = r#"[ { "edits": [ { "kind": "state" | "transition",
               "id": "<id of an existing element>",
               "replacement": { <the complete mutated element object> } } ] } ]"#;

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json value serializes")
}

/// Renders the prompt. A pure function of its arguments.
pub fn build_prompt(chart: &Chart, spec: &PromptSpec, examples: &[FewShotExample]) -> Result<String, PromptError> {
    spec.check(chart)?;
    if examples.len() != spec.few_shot_count {
        return Err(PromptError::ExampleCountMismatch { expected: spec.few_shot_count, actual: examples.len() });
    }
    let n = spec.n_mutants;
    let mut p = String::new();

    p.push_str("## Context\n");
    p.push_str(
        "You are assisting with mutation testing of a Stateflow-style statechart. A mutant is a copy of the \
         chart with a small deliberate fault. States carry entry, during and exit actions; transitions carry \
         a priority, an optional event, an optional condition, condition actions and transition actions. \
         Conditions and actions use C-style expressions over the declared variables; actions are assignments \
         `name = expression`.\n",
    );
    if spec.strategy == Strategy::Global {
        p.push_str("\nThe chart under test, in JSON:\n```json\n");
        p.push_str(&serialize_chart(chart));
        p.push_str("\n```\n");
    }
    if !examples.is_empty() {
        p.push_str("\nExamples of valid mutations:\n");
        for (i, ex) in examples.iter().enumerate() {
            let desc = operator(&ex.operator_id).map(|o| o.description).unwrap_or("mutation");
            let _ = write!(
                p,
                "\nExample {} ({} `{}`: {desc}).\nBefore:\n```json\n{}\n```\nAfter:\n```json\n{}\n```\n",
                i + 1,
                ex.kind,
                ex.element_id,
                pretty(&ex.before),
                pretty(&ex.after)
            );
        }
    }

    p.push_str("\n## Input Data\n");
    let _ = writeln!(p, "Number of mutants requested: {n}");
    if let Strategy::Local(id) = &spec.strategy {
        let kind = chart.element_kind(id).expect("checked above");
        let _ = writeln!(p, "Element to mutate ({kind} `{id}`):");
        p.push_str("```json\n");
        p.push_str(&pretty(&chart.element_json(kind, id).expect("checked above")));
        p.push_str("\n```\n");
        if kind == ElementKind::Transition {
            let nodes: Vec<&str> = chart
                .states
                .iter()
                .map(|s| s.id.as_str())
                .chain(chart.junctions.iter().map(|j| j.id.as_str()))
                .collect();
            let _ = writeln!(
                p,
                "IDs of the states or junctions that may act as source or destination: {}",
                nodes.join(", ")
            );
        }
        p.push_str("Declared variables:\n");
        for v in &chart.variables {
            let kind = serde_json::to_value(v.kind).expect("kind serializes");
            let ty = serde_json::to_value(v.value_type).expect("type serializes");
            let _ = writeln!(p, "- {} ({}, {})", v.name, kind.as_str().unwrap_or(""), ty.as_str().unwrap_or(""));
        }
    }

    p.push_str("\n## Output Requirements\n");
    p.push_str("Answer with one JSON array. Each entry is one mutant with this shape:\n```\n");
    p.push_str(SCHEMA);
    p.push_str("\n```\nRules:\n");
    p.push_str("- Each replacement is the full element object with every field present.\n");
    p.push_str("- Never change the `id` or `name` attribute of any element.\n");
    p.push_str("- Only use declared variables; inputs may not be assigned.\n");
    p.push_str("- Sources and destinations must be existing state or junction ids.\n");
    if let Strategy::Local(id) = &spec.strategy {
        let _ = writeln!(p, "- Only edit element `{id}`; every edit must use that id.");
    }

    p.push_str("\n## Instruction\n");
    let _ = writeln!(
        p,
        "Generate exactly {n} distinct mutants following the requirements above. Reply with the JSON array only."
    );
    Ok(p)
}
