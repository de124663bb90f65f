//! Two-stage chart validation with a fixed error taxonomy.
//!
//! The generation stage checks references and structure; a chart failing it
//! cannot be materialized. The compilation stage parses and type-checks every
//! label. Both stages collect all errors instead of stopping at the first.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::chart::{Chart, NodeKind, VarKind};
use crate::expr::{check_expr, check_stmt, is_identifier, parse_expr, parse_stmts, CheckError, ValueType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    InvalidReference,
    DanglingTransition,
    UndefinedVariable,
    SyntaxError,
    TypeError,
    StructuralViolation,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::InvalidReference,
        Category::DanglingTransition,
        Category::UndefinedVariable,
        Category::SyntaxError,
        Category::TypeError,
        Category::StructuralViolation,
    ];

    /// Errors of these categories make a mutant non-generable.
    pub fn blocks_generation(self) -> bool {
        matches!(self, Category::InvalidReference | Category::DanglingTransition | Category::StructuralViolation)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::InvalidReference => "invalid_reference",
            Category::DanglingTransition => "dangling_transition",
            Category::UndefinedVariable => "undefined_variable",
            Category::SyntaxError => "syntax_error",
            Category::TypeError => "type_error",
            Category::StructuralViolation => "structural_violation",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationError {
    pub category: Category,
    pub element_id: Option<String>,
    pub message: String,
    pub location: String,
}

impl ValidationError {
    pub fn new(
        category: Category,
        element_id: Option<&str>,
        location: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        ValidationError {
            category,
            element_id: element_id.map(str::to_string),
            message: message.into(),
            location: location.into(),
        }
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.category, self.location, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    #[serde(rename = "generation")]
    Generation,
    #[serde(rename = "compilation")]
    Compilation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValidationVerdict {
    #[serde(rename = "generable+compilable")]
    Compilable,
    #[serde(rename = "generable+non-compilable")]
    NonCompilable,
    #[serde(rename = "non-generable")]
    NonGenerable,
}

impl ValidationVerdict {
    pub fn is_generable(self) -> bool {
        self != ValidationVerdict::NonGenerable
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub stage: Stage,
    pub errors: Vec<ValidationError>,
    pub verdict: ValidationVerdict,
}

impl ValidationReport {
    /// Builds a report from generation-stage errors alone.
    pub fn non_generable(errors: Vec<ValidationError>) -> Self {
        debug_assert!(errors.iter().any(|e| e.category.blocks_generation()));
        ValidationReport { stage: Stage::Generation, errors, verdict: ValidationVerdict::NonGenerable }
    }

    pub fn categories(&self) -> BTreeSet<Category> {
        self.errors.iter().map(|e| e.category).collect()
    }
}

/// Runs the generation stage and, if it passes, the compilation stage.
pub fn validate(chart: &Chart) -> ValidationReport {
    let structural = validate_structure(chart);
    if !structural.is_empty() {
        return ValidationReport::non_generable(structural);
    }
    let semantic = validate_semantics(chart);
    let verdict = if semantic.is_empty() { ValidationVerdict::Compilable } else { ValidationVerdict::NonCompilable };
    ValidationReport { stage: Stage::Compilation, errors: semantic, verdict }
}

/// Referential and structural invariants. Empty iff the chart can be materialized.
pub fn validate_structure(chart: &Chart) -> Vec<ValidationError> {
    let mut errs = Vec::new();
    let structural =
        |id: Option<&str>, loc: String, msg: String| ValidationError::new(Category::StructuralViolation, id, loc, msg);

    if !is_identifier(&chart.name) {
        errs.push(structural(None, "name".into(), format!("chart name `{}` is not an identifier", chart.name)));
    }
    if chart.states.is_empty() {
        errs.push(structural(None, "states".into(), "chart has no states".into()));
    }

    let mut var_names = HashSet::new();
    for v in &chart.variables {
        let loc = format!("variables[{}]", v.name);
        if !is_identifier(&v.name) {
            errs.push(structural(None, format!("{loc}.name"), format!("`{}` is not an identifier", v.name)));
        }
        if !var_names.insert(v.name.as_str()) {
            errs.push(structural(None, format!("{loc}.name"), format!("duplicate variable `{}`", v.name)));
        }
    }

    let mut node_ids = HashSet::new();
    for s in &chart.states {
        let loc = format!("states[{}]", s.id);
        if s.id.is_empty() {
            errs.push(structural(None, format!("{loc}.id"), "empty state id".into()));
        } else if !node_ids.insert(s.id.as_str()) {
            errs.push(structural(Some(&s.id), format!("{loc}.id"), format!("duplicate element id `{}`", s.id)));
        }
        if !is_identifier(&s.name) {
            errs.push(structural(
                Some(&s.id),
                format!("{loc}.name"),
                format!("state name `{}` is not an identifier", s.name),
            ));
        }
    }
    for j in &chart.junctions {
        let loc = format!("junctions[{}]", j.id);
        if j.id.is_empty() {
            errs.push(structural(None, format!("{loc}.id"), "empty junction id".into()));
        } else if !node_ids.insert(j.id.as_str()) {
            errs.push(structural(Some(&j.id), format!("{loc}.id"), format!("duplicate element id `{}`", j.id)));
        }
    }

    let mut transition_ids = HashSet::new();
    let mut defaults = Vec::new();
    let mut priorities: BTreeMap<&str, BTreeMap<u32, &str>> = BTreeMap::new();
    for t in &chart.transitions {
        let loc = format!("transitions[{}]", t.id);
        let id = Some(t.id.as_str());
        if t.id.is_empty() {
            errs.push(structural(None, format!("{loc}.id"), "empty transition id".into()));
        } else if !transition_ids.insert(t.id.as_str()) {
            errs.push(structural(id, format!("{loc}.id"), format!("duplicate transition id `{}`", t.id)));
        }
        match t.dest.as_deref() {
            None | Some("") => errs.push(ValidationError::new(
                Category::DanglingTransition,
                id,
                format!("{loc}.dest"),
                format!("transition `{}` has no destination", t.id),
            )),
            Some(dest) if chart.node_kind(dest).is_none() => errs.push(ValidationError::new(
                Category::InvalidReference,
                id,
                format!("{loc}.dest"),
                format!("transition `{}` targets unknown element `{dest}`", t.id),
            )),
            Some(_) => {}
        }
        match t.source.as_deref() {
            None => defaults.push(t),
            Some("") => errs.push(ValidationError::new(
                Category::DanglingTransition,
                id,
                format!("{loc}.source"),
                format!("transition `{}` has no source", t.id),
            )),
            Some(src) if chart.node_kind(src).is_none() => errs.push(ValidationError::new(
                Category::InvalidReference,
                id,
                format!("{loc}.source"),
                format!("transition `{}` leaves unknown element `{src}`", t.id),
            )),
            Some(src) => {
                if let Some(other) = priorities.entry(src).or_default().insert(t.priority, &t.id) {
                    errs.push(structural(
                        id,
                        format!("{loc}.priority"),
                        format!("priority {} of `{}` repeats that of `{other}` from `{src}`", t.priority, t.id),
                    ));
                }
            }
        }
        if t.priority == 0 {
            errs.push(structural(id, format!("{loc}.priority"), "priority must be positive".into()));
        }
    }

    match defaults.as_slice() {
        [] => errs.push(structural(None, "transitions".into(), "chart has no default transition".into())),
        [only] => {
            if let Some(dest) = only.dest.as_deref() {
                if chart.node_kind(dest) == Some(NodeKind::Junction) {
                    errs.push(structural(
                        Some(&only.id),
                        format!("transitions[{}].dest", only.id),
                        "default transition must target a state".into(),
                    ));
                }
            }
        }
        [_, rest @ ..] => {
            for t in rest {
                errs.push(structural(
                    Some(&t.id),
                    format!("transitions[{}].source", t.id),
                    format!("`{}` is a second default transition", t.id),
                ));
            }
        }
    }

    if let Some(cycle) = junction_cycle(chart) {
        errs.push(structural(
            cycle.first().map(String::as_str),
            "junctions".into(),
            format!("junction cycle through {}", cycle.join(" -> ")),
        ));
    }
    errs
}

/// Junctions lying on a junction-to-junction cycle, if any.
pub fn junction_cycle(chart: &Chart) -> Option<Vec<String>> {
    let is_junction = |id: &str| chart.junctions.iter().any(|j| j.id == id);
    let mut indegree: BTreeMap<&str, usize> = chart.junctions.iter().map(|j| (j.id.as_str(), 0)).collect();
    let mut edges: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for t in &chart.transitions {
        if let (Some(s), Some(d)) = (t.source.as_deref(), t.dest.as_deref()) {
            if is_junction(s) && is_junction(d) {
                edges.entry(s).or_default().push(d);
                *indegree.entry(d).or_default() += 1;
            }
        }
    }
    let mut ready: Vec<&str> = indegree.iter().filter(|(_, &n)| n == 0).map(|(&j, _)| j).collect();
    while let Some(j) = ready.pop() {
        indegree.remove(j);
        for &d in edges.get(j).into_iter().flatten() {
            if let Some(n) = indegree.get_mut(d) {
                *n -= 1;
                if *n == 0 {
                    ready.push(d);
                }
            }
        }
    }
    if indegree.is_empty() {
        None
    } else {
        Some(indegree.keys().map(|s| s.to_string()).collect())
    }
}

/// Label parsing, name resolution and typing. Only meaningful once
/// [`validate_structure`] returned no errors.
pub fn validate_semantics(chart: &Chart) -> Vec<ValidationError> {
    let mut errs = Vec::new();
    let lookup = |name: &str| chart.var_type(name);
    let writable = |name: &str| chart.variable(name).is_some_and(|v| v.kind.is_writable());

    for v in &chart.variables {
        if v.initial.value_type() != v.value_type {
            errs.push(ValidationError::new(
                Category::TypeError,
                None,
                format!("variables[{}].initial", v.name),
                format!("initial value {} does not match type {}", v.initial, v.value_type),
            ));
        }
    }

    let check_actions = |errs: &mut Vec<ValidationError>, id: &str, loc: String, actions: &[String]| {
        for (i, src) in actions.iter().enumerate() {
            let loc = format!("{loc}[{i}]");
            match parse_stmts(src) {
                Err(e) => {
                    errs.push(ValidationError::new(Category::SyntaxError, Some(id), loc, format!("`{src}`: {e}")))
                }
                Ok(stmts) => {
                    for s in &stmts {
                        if let Err(e) = check_stmt(s, &lookup, &writable) {
                            errs.push(check_error(id, &loc, src, e));
                        }
                    }
                }
            }
        }
    };

    for s in &chart.states {
        check_actions(&mut errs, &s.id, format!("states[{}].entry", s.id), &s.entry);
        check_actions(&mut errs, &s.id, format!("states[{}].during", s.id), &s.during);
        check_actions(&mut errs, &s.id, format!("states[{}].exit", s.id), &s.exit);
    }

    for t in &chart.transitions {
        let loc = format!("transitions[{}]", t.id);
        if let Some(event) = &t.event {
            match chart.variable(event) {
                None => errs.push(ValidationError::new(
                    Category::UndefinedVariable,
                    Some(&t.id),
                    format!("{loc}.event"),
                    format!("event `{event}` is not a declared variable"),
                )),
                Some(v) if v.kind != VarKind::Input || v.value_type != ValueType::Boolean => {
                    errs.push(ValidationError::new(
                        Category::TypeError,
                        Some(&t.id),
                        format!("{loc}.event"),
                        format!("event `{event}` must be a boolean input"),
                    ))
                }
                Some(_) => {}
            }
        }
        if let Some(cond) = &t.condition {
            let cloc = format!("{loc}.condition");
            match parse_expr(cond) {
                Err(e) => {
                    errs.push(ValidationError::new(Category::SyntaxError, Some(&t.id), cloc, format!("`{cond}`: {e}")))
                }
                Ok(expr) => match check_expr(&expr, &lookup) {
                    Err(e) => errs.push(check_error(&t.id, &cloc, cond, e)),
                    Ok(ValueType::Number) => errs.push(ValidationError::new(
                        Category::TypeError,
                        Some(&t.id),
                        cloc,
                        format!("condition `{cond}` is a number, not a boolean"),
                    )),
                    Ok(ValueType::Boolean) => {}
                },
            }
        }
        check_actions(&mut errs, &t.id, format!("{loc}.condition_action"), &t.condition_action);
        check_actions(&mut errs, &t.id, format!("{loc}.transition_action"), &t.transition_action);
    }
    errs
}

fn check_error(id: &str, loc: &str, src: &str, e: CheckError) -> ValidationError {
    let category = match e {
        CheckError::Undefined(_) => Category::UndefinedVariable,
        CheckError::Type(_) => Category::TypeError,
    };
    ValidationError::new(category, Some(id), loc, format!("`{src}`: {e}"))
}
