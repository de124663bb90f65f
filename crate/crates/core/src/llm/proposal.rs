use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::Strategy;
use crate::chart::{Chart, ElementKind, State, Transition};
use crate::validate::{
    validate_semantics, validate_structure, Category, Stage, ValidationError, ValidationReport, ValidationVerdict,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edit {
    pub kind: ElementKind,
    pub id: String,
    pub replacement: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutantProposal {
    pub edits: Vec<Edit>,
    /// The JSON fragment the proposal was read from.
    pub raw_text: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParseOutcome {
    pub proposals: Vec<MutantProposal>,
    pub failures: usize,
}

#[derive(Deserialize)]
struct ProposalShape {
    edits: Vec<Edit>,
}

fn proposal_from(value: &Value) -> Option<MutantProposal> {
    let shape: ProposalShape = serde_json::from_value(value.clone()).ok()?;
    let ids: BTreeSet<_> = shape.edits.iter().map(|e| (&e.id, e.kind)).collect();
    if shape.edits.is_empty() || ids.len() != shape.edits.len() {
        return None;
    }
    Some(MutantProposal { edits: shape.edits, raw_text: value.to_string() })
}

/// Splits one top-level JSON value into proposal candidates.
fn candidates(value: Value) -> Vec<Value> {
    match value {
        Value::Array(items) => items,
        Value::Object(mut obj) if !obj.contains_key("edits") => {
            for key in ["mutants", "proposals"] {
                if let Some(Value::Array(items)) = obj.remove(key) {
                    return items;
                }
            }
            vec![Value::Object(obj)]
        }
        other => vec![other],
    }
}

/// Byte offset of the next `{` that opens a proposal (`{"edits"`), at or after `from`.
fn next_proposal_start(text: &str, from: usize) -> Option<usize> {
    let bytes = text.as_bytes();
    (from..bytes.len()).find(|&i| bytes[i] == b'{' && text[i + 1..].trim_start().starts_with("\"edits\""))
}

/// Extracts proposals from free-form model output. Prose and code fences are
/// skipped; a proposal object that does not parse or does not fit the schema
/// counts as one failure and scanning resumes at the next proposal.
pub fn parse_proposals(text: &str, _expected: usize) -> ParseOutcome {
    let mut out = ParseOutcome::default();
    let mut i = 0;
    while i < text.len() {
        let c = text.as_bytes()[i];
        if c != b'[' && c != b'{' {
            i += 1;
            continue;
        }
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(value)) => {
                i += stream.byte_offset();
                for cand in candidates(value) {
                    match proposal_from(&cand) {
                        Some(p) => out.proposals.push(p),
                        None => out.failures += 1,
                    }
                }
            }
            _ if c == b'{' && next_proposal_start(text, i) == Some(i) => {
                out.failures += 1;
                i = next_proposal_start(text, i + 1).unwrap_or(text.len());
            }
            _ => i += 1,
        }
    }
    out
}

/// A materialized mutant: generable, possibly non-compilable.
#[derive(Debug, Clone, PartialEq)]
pub struct Applied {
    pub chart: Chart,
    pub report: ValidationReport,
}

fn err(cat: Category, id: &str, loc: String, msg: String) -> ValidationError {
    ValidationError::new(cat, Some(id), loc, msg)
}

fn string_list(
    obj: &Map<String, Value>,
    key: &str,
    id: &str,
    loc: &str,
    errs: &mut Vec<ValidationError>,
) -> Vec<String> {
    match obj.get(key) {
        None | Some(Value::Null) => vec![],
        Some(Value::Array(items)) if items.iter().all(Value::is_string) => {
            items.iter().map(|v| v.as_str().expect("string").to_string()).collect()
        }
        Some(other) => {
            errs.push(err(
                Category::StructuralViolation,
                id,
                format!("{loc}.{key}"),
                format!("`{key}` must be a list of strings, found {other}"),
            ));
            vec![]
        }
    }
}

fn opt_string(
    obj: &Map<String, Value>,
    key: &str,
    id: &str,
    loc: &str,
    errs: &mut Vec<ValidationError>,
) -> Option<String> {
    match obj.get(key) {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(other) => {
            errs.push(err(
                Category::StructuralViolation,
                id,
                format!("{loc}.{key}"),
                format!("`{key}` must be a string or null, found {other}"),
            ));
            None
        }
    }
}

fn rebuild_state(orig: &State, obj: &Map<String, Value>, errs: &mut Vec<ValidationError>) -> State {
    let loc = format!("states[{}]", orig.id);
    State {
        id: orig.id.clone(),
        name: orig.name.clone(),
        entry: string_list(obj, "entry", &orig.id, &loc, errs),
        during: string_list(obj, "during", &orig.id, &loc, errs),
        exit: string_list(obj, "exit", &orig.id, &loc, errs),
    }
}

fn rebuild_transition(orig: &Transition, obj: &Map<String, Value>, errs: &mut Vec<ValidationError>) -> Transition {
    let id = orig.id.as_str();
    let loc = format!("transitions[{id}]");
    let source = match obj.get("source") {
        Some(Value::String(s)) if !s.is_empty() => Some(s.clone()),
        Some(Value::Null) if orig.source.is_none() => None,
        None if orig.source.is_none() => None,
        _ => {
            errs.push(err(
                Category::DanglingTransition,
                id,
                format!("{loc}.source"),
                "transition lost its source".into(),
            ));
            orig.source.clone()
        }
    };
    let dest = match obj.get("dest") {
        Some(Value::String(s)) if !s.is_empty() => Some(s.clone()),
        _ => {
            errs.push(err(
                Category::DanglingTransition,
                id,
                format!("{loc}.dest"),
                "transition lost its destination".into(),
            ));
            None
        }
    };
    let priority = match obj.get("priority").and_then(Value::as_u64) {
        Some(p) if p <= u32::MAX as u64 => p as u32,
        _ => {
            errs.push(err(
                Category::StructuralViolation,
                id,
                format!("{loc}.priority"),
                format!("priority must be a positive integer, found {}", obj.get("priority").unwrap_or(&Value::Null)),
            ));
            orig.priority
        }
    };
    Transition {
        id: orig.id.clone(),
        source,
        dest,
        priority,
        event: opt_string(obj, "event", id, &loc, errs),
        condition: opt_string(obj, "condition", id, &loc, errs),
        condition_action: string_list(obj, "condition_action", id, &loc, errs),
        transition_action: string_list(obj, "transition_action", id, &loc, errs),
    }
}

/// Replaces every edited element wholesale, restoring `id` and `name` from
/// the original, then validates. Non-generable proposals return the failing
/// report instead of a chart.
pub fn apply_proposal(
    chart: &Chart,
    proposal: &MutantProposal,
    strategy: &Strategy,
) -> Result<Applied, ValidationReport> {
    let mut errs = Vec::new();
    let mut mutant = chart.clone();
    for edit in &proposal.edits {
        let loc = format!("edits[{}]", edit.id);
        let exists = match edit.kind {
            ElementKind::State => chart.state(&edit.id).is_some(),
            ElementKind::Transition => chart.transition(&edit.id).is_some(),
        };
        if !exists {
            errs.push(err(
                Category::InvalidReference,
                &edit.id,
                loc,
                format!("no {} with id `{}` in the chart", edit.kind, edit.id),
            ));
            continue;
        }
        if let Some(sel) = strategy.selected() {
            if sel != edit.id {
                errs.push(err(
                    Category::StructuralViolation,
                    &edit.id,
                    loc,
                    format!("local strategy allows edits to `{sel}` only"),
                ));
                continue;
            }
        }
        match edit.kind {
            ElementKind::State => {
                let s = rebuild_state(chart.state(&edit.id).expect("exists"), &edit.replacement, &mut errs);
                *mutant.state_mut(&edit.id).expect("exists") = s;
            }
            ElementKind::Transition => {
                let t = rebuild_transition(chart.transition(&edit.id).expect("exists"), &edit.replacement, &mut errs);
                *mutant.transition_mut(&edit.id).expect("exists") = t;
            }
        }
    }
    if errs.is_empty() {
        errs = validate_structure(&mutant);
    }
    if !errs.is_empty() {
        return Err(ValidationReport::non_generable(errs));
    }
    let semantic = validate_semantics(&mutant);
    let verdict = if semantic.is_empty() { ValidationVerdict::Compilable } else { ValidationVerdict::NonCompilable };
    Ok(Applied { chart: mutant, report: ValidationReport { stage: Stage::Compilation, errors: semantic, verdict } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    fn edit_json(chart: &Chart, kind: ElementKind, id: &str, f: impl Fn(&mut Map<String, Value>)) -> Value {
        let mut obj = chart.element_json(kind, id).unwrap().as_object().unwrap().clone();
        f(&mut obj);
        serde_json::json!({"edits": [{"kind": kind, "id": id, "replacement": obj}]})
    }

    fn proposal(v: &Value) -> MutantProposal {
        proposal_from(v).unwrap()
    }

    #[test]
    fn fenced_array() {
        let chart = corpus::fridge().chart;
        let items: Vec<Value> = (0..25)
            .map(|i| {
                edit_json(&chart, ElementKind::Transition, "T1", |o| {
                    o.insert("condition".into(), format!("TEMP > {i}").into());
                })
            })
            .collect();
        let text = format!("Here you go:\n```json\n{}\n```\nDone.", serde_json::to_string_pretty(&items).unwrap());
        let out = parse_proposals(&text, 25);
        assert_eq!((out.proposals.len(), out.failures), (25, 0));
    }

    #[test]
    fn short_delivery_counts() {
        let chart = corpus::fridge().chart;
        let items: Vec<Value> = (0..23)
            .map(|i| {
                edit_json(&chart, ElementKind::State, "S_OPEN", |o| {
                    o.insert("entry".into(), serde_json::json!([format!("LIGHT = {i}")]));
                })
            })
            .collect();
        let text = format!("I could only think of these.\n{}", serde_json::to_string(&items).unwrap());
        let out = parse_proposals(&text, 25);
        assert_eq!(out.proposals.len(), 23);
        assert_eq!(out.failures, 0);
        assert!((out.proposals.len() as f64 / 25.0 - 0.92).abs() < 1e-12);
    }

    #[test]
    fn truncated_proposal_is_one_failure() {
        let chart = corpus::fridge().chart;
        let good: Vec<String> = (0..4)
            .map(|i| {
                edit_json(&chart, ElementKind::Transition, "T3", |o| {
                    o.insert("priority".into(), (i + 1).into());
                })
                .to_string()
            })
            .collect();
        let broken = &good[0][..good[0].len() / 2];
        let text = format!("[{}, {}, {broken}, {}, {}]", good[0], good[1], good[2], good[3]);
        let out = parse_proposals(&text, 5);
        assert_eq!((out.proposals.len(), out.failures), (4, 1));
    }

    #[test]
    fn schema_misfits_are_failures() {
        let text = r#"[{"edits": []}, {"edits": [{"kind": "node", "id": "x", "replacement": {}}]}, {"foo": 1}, 7]"#;
        let out = parse_proposals(text, 4);
        assert_eq!((out.proposals.len(), out.failures), (0, 4));
        let dup = r#"{"edits": [{"kind": "state", "id": "A", "replacement": {}}, {"kind": "state", "id": "A", "replacement": {}}]}"#;
        assert_eq!(parse_proposals(dup, 1).failures, 1);
        assert_eq!(parse_proposals("no json at all", 3), ParseOutcome::default());
        let wrapped = r#"{"mutants": [{"edits": [{"kind": "state", "id": "A", "replacement": {}}]}]}"#;
        assert_eq!(parse_proposals(wrapped, 1).proposals.len(), 1);
    }

    #[test]
    fn negated_condition_applies() {
        let chart = corpus::fridge().chart;
        let p = proposal(&edit_json(&chart, ElementKind::Transition, "T2", |o| {
            o.insert("condition".into(), "DOOR_SENSOR != 1".into());
        }));
        let a = apply_proposal(&chart, &p, &Strategy::Global).unwrap();
        assert_eq!(a.report.verdict, ValidationVerdict::Compilable);
        assert_eq!(a.chart.transition("T2").unwrap().condition.as_deref(), Some("DOOR_SENSOR != 1"));
    }

    #[test]
    fn unknown_id_is_invalid_reference() {
        let chart = corpus::fridge().chart;
        let mut v = edit_json(&chart, ElementKind::Transition, "T2", |_| {});
        v["edits"][0]["id"] = "T_99".into();
        let report = apply_proposal(&chart, &proposal(&v), &Strategy::Global).unwrap_err();
        assert_eq!(report.verdict, ValidationVerdict::NonGenerable);
        assert_eq!(report.errors[0].category, Category::InvalidReference);
    }

    #[test]
    fn invented_variable_is_non_compilable() {
        let chart = corpus::fridge().chart;
        let p = proposal(&edit_json(&chart, ElementKind::Transition, "T1", |o| {
            o.insert("condition".into(), "TEMP_X > 3".into());
        }));
        let a = apply_proposal(&chart, &p, &Strategy::Global).unwrap();
        assert_eq!(a.report.verdict, ValidationVerdict::NonCompilable);
        assert_eq!(a.report.errors[0].category, Category::UndefinedVariable);
    }

    #[test]
    fn names_are_restored_and_local_confined() {
        let chart = corpus::fridge().chart;
        let p = proposal(&edit_json(&chart, ElementKind::State, "S_OPEN", |o| {
            o.insert("name".into(), "RENAMED".into());
            o.insert("entry".into(), serde_json::json!(["LIGHT = 0"]));
        }));
        let a = apply_proposal(&chart, &p, &Strategy::Local("S_OPEN".into())).unwrap();
        assert_eq!(a.chart.state("S_OPEN").unwrap().name, "OPEN");
        let err = apply_proposal(&chart, &p, &Strategy::Local("S_CLOSE_NORM".into())).unwrap_err();
        assert_eq!(err.errors[0].category, Category::StructuralViolation);
    }

    #[test]
    fn lost_endpoints_are_dangling() {
        let chart = corpus::fridge().chart;
        for field in ["dest", "source"] {
            let p = proposal(&edit_json(&chart, ElementKind::Transition, "T4", |o| {
                o.remove(field);
            }));
            let report = apply_proposal(&chart, &p, &Strategy::Global).unwrap_err();
            assert_eq!(report.errors[0].category, Category::DanglingTransition, "{field}");
        }
        let p = proposal(&edit_json(&chart, ElementKind::Transition, "T4", |o| {
            o.remove("priority");
        }));
        assert_eq!(
            apply_proposal(&chart, &p, &Strategy::Global).unwrap_err().errors[0].category,
            Category::StructuralViolation
        );
    }
}
