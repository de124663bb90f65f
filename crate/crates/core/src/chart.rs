//! Statechart data model and its canonical JSON form.
//!
//! A chart is flat: states, connective junctions, and prioritized transitions
//! between them. Exactly one transition has no source (the default
//! transition) and designates the initial state. Labels are kept as source
//! text in the expression language so that a chart whose labels do not parse
//! can still be loaded, reported on and stored.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::expr::{Value, ValueType};
use crate::validate::{self, ValidationError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Input,
    Output,
    Local,
}

impl VarKind {
    pub fn is_writable(self) -> bool {
        self != VarKind::Input
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    #[serde(rename = "type")]
    pub value_type: ValueType,
    pub initial: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct State {
    pub id: String,
    pub name: String,
    pub entry: Vec<String>,
    pub during: Vec<String>,
    pub exit: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Junction {
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transition {
    pub id: String,
    /// `None` marks the default transition.
    pub source: Option<String>,
    /// `None` only in broken mutants; valid charts always have a destination.
    pub dest: Option<String>,
    pub priority: u32,
    pub event: Option<String>,
    pub condition: Option<String>,
    pub condition_action: Vec<String>,
    pub transition_action: Vec<String>,
}

impl Transition {
    pub fn is_default(&self) -> bool {
        self.source.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Chart {
    pub name: String,
    pub variables: Vec<Variable>,
    pub states: Vec<State>,
    pub junctions: Vec<Junction>,
    pub transitions: Vec<Transition>,
}

/// What a node id refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    State,
    Junction,
}

/// Mutable chart elements, as addressed by mutation proposals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    State,
    Transition,
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ElementKind::State => "state",
            ElementKind::Transition => "transition",
        })
    }
}

impl Chart {
    /// Sorts every array into canonical order: variables by name, elements by id.
    pub fn canonicalize(&mut self) {
        self.variables.sort_by(|a, b| a.name.cmp(&b.name));
        self.states.sort_by(|a, b| a.id.cmp(&b.id));
        self.junctions.sort_by(|a, b| a.id.cmp(&b.id));
        self.transitions.sort_by(|a, b| a.id.cmp(&b.id));
    }

    pub fn is_canonical(&self) -> bool {
        self.variables.windows(2).all(|w| w[0].name <= w[1].name)
            && self.states.windows(2).all(|w| w[0].id <= w[1].id)
            && self.junctions.windows(2).all(|w| w[0].id <= w[1].id)
            && self.transitions.windows(2).all(|w| w[0].id <= w[1].id)
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn state(&self, id: &str) -> Option<&State> {
        self.states.iter().find(|s| s.id == id)
    }

    pub fn state_mut(&mut self, id: &str) -> Option<&mut State> {
        self.states.iter_mut().find(|s| s.id == id)
    }

    pub fn transition(&self, id: &str) -> Option<&Transition> {
        self.transitions.iter().find(|t| t.id == id)
    }

    pub fn transition_mut(&mut self, id: &str) -> Option<&mut Transition> {
        self.transitions.iter_mut().find(|t| t.id == id)
    }

    pub fn node_kind(&self, id: &str) -> Option<NodeKind> {
        if self.states.iter().any(|s| s.id == id) {
            Some(NodeKind::State)
        } else if self.junctions.iter().any(|j| j.id == id) {
            Some(NodeKind::Junction)
        } else {
            None
        }
    }

    pub fn default_transition(&self) -> Option<&Transition> {
        self.transitions.iter().find(|t| t.is_default())
    }

    /// Transitions leaving `node`, in ascending priority.
    pub fn outgoing(&self, node: &str) -> Vec<&Transition> {
        let mut out: Vec<_> = self.transitions.iter().filter(|t| t.source.as_deref() == Some(node)).collect();
        out.sort_by_key(|t| t.priority);
        out
    }

    pub fn input_variables(&self) -> impl Iterator<Item = &Variable> {
        self.variables.iter().filter(|v| v.kind == VarKind::Input)
    }

    pub fn output_variables(&self) -> impl Iterator<Item = &Variable> {
        self.variables.iter().filter(|v| v.kind == VarKind::Output)
    }

    pub fn var_type(&self, name: &str) -> Option<ValueType> {
        self.variable(name).map(|v| v.value_type)
    }

    /// The JSON object for one element, as used in prompts and proposals.
    pub fn element_json(&self, kind: ElementKind, id: &str) -> Option<serde_json::Value> {
        match kind {
            ElementKind::State => self.state(id).map(|s| serde_json::to_value(s).expect("state serializes")),
            ElementKind::Transition => {
                self.transition(id).map(|t| serde_json::to_value(t).expect("transition serializes"))
            }
        }
    }

    pub fn element_kind(&self, id: &str) -> Option<ElementKind> {
        if self.state(id).is_some() {
            Some(ElementKind::State)
        } else if self.transition(id).is_some() {
            Some(ElementKind::Transition)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParseErrorKind {
    MalformedJson,
    SchemaViolation,
    InvariantViolation,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParseErrorKind::MalformedJson => "malformed-json",
            ParseErrorKind::SchemaViolation => "schema-violation",
            ParseErrorKind::InvariantViolation => "invariant-violation",
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{kind} at {path}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    /// Path to the offending field, e.g. `transitions[T3].dest`.
    pub path: String,
    pub message: String,
    /// Every invariant violation found (only for `InvariantViolation`).
    pub errors: Vec<ValidationError>,
}

/// Renders the canonical JSON text of `chart`: fixed key order, arrays sorted
/// by id, numbers in shortest round-trip form, two-space indentation.
pub fn serialize_chart(chart: &Chart) -> String {
    if chart.is_canonical() {
        serde_json::to_string_pretty(chart).expect("chart serializes")
    } else {
        let mut c = chart.clone();
        c.canonicalize();
        serde_json::to_string_pretty(&c).expect("chart serializes")
    }
}

/// Decodes the JSON schema only; labels and references are not checked.
pub fn parse_chart_unchecked(text: &str) -> Result<Chart, ParseError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ParseError {
        kind: ParseErrorKind::MalformedJson,
        path: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
        errors: Vec::new(),
    })?;
    let mut chart: Chart = serde_path_to_error::deserialize(value).map_err(|e| ParseError {
        kind: ParseErrorKind::SchemaViolation,
        path: e.path().to_string(),
        message: e.inner().to_string(),
        errors: Vec::new(),
    })?;
    chart.canonicalize();
    Ok(chart)
}

/// Parses chart text and checks every chart invariant.
pub fn parse_chart(text: &str) -> Result<Chart, ParseError> {
    let chart = parse_chart_unchecked(text)?;
    let mut errors = validate::validate_structure(&chart);
    if errors.is_empty() {
        errors = validate::validate_semantics(&chart);
    }
    match errors.first() {
        None => Ok(chart),
        Some(first) => Err(ParseError {
            kind: ParseErrorKind::InvariantViolation,
            path: first.location.clone(),
            message: first.message.clone(),
            errors,
        }),
    }
}
