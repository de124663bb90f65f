//! Rule-based mutant generation.
//!
//! Eight state operators and eleven transition operators, each of which keeps
//! the chart valid. [`generate_baseline`] applies one mutation, then keeps
//! going with probability `0.5^n` after the `n`th. All draws come from a
//! ChaCha8 generator seeded with `seed_from_u64`, so results replay across
//! platforms.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chart::{Chart, ElementKind, State, Transition};
use crate::expr::{check_expr, parse_expr, parse_stmts, BinOp, Expr, Stmt, UnaryOp, Value, ValueType};
use crate::validate::junction_cycle;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationRecord {
    pub operator_id: String,
    pub kind: ElementKind,
    pub element_id: String,
    pub field: String,
    pub before: String,
    pub after: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BaselineError {
    #[error("no mutation operator applies to any element of chart `{0}`")]
    NoApplicableMutation(String),
}

#[derive(Debug, Clone)]
enum Replacement {
    State(State),
    Transition(Transition),
}

/// One way an operator can rewrite an element (two for priority swaps).
#[derive(Debug, Clone)]
pub struct Candidate {
    replacements: Vec<Replacement>,
    pub records: Vec<MutationRecord>,
}

impl Candidate {
    fn apply(self, chart: &mut Chart) -> Vec<MutationRecord> {
        for r in self.replacements {
            match r {
                Replacement::State(s) => {
                    let id = s.id.clone();
                    *chart.state_mut(&id).expect("state exists") = s;
                }
                Replacement::Transition(t) => {
                    let id = t.id.clone();
                    *chart.transition_mut(&id).expect("transition exists") = t;
                }
            }
        }
        self.records
    }
}

pub struct Operator {
    pub id: &'static str,
    pub kind: ElementKind,
    pub description: &'static str,
    candidates: fn(&Chart, &str) -> Vec<Candidate>,
}

impl Operator {
    /// Every distinct mutation this operator can make to element `id`.
    pub fn candidates(&self, chart: &Chart, id: &str) -> Vec<Candidate> {
        (self.candidates)(chart, id)
    }

    pub fn applicable(&self, chart: &Chart, id: &str) -> bool {
        !self.candidates(chart, id).is_empty()
    }

    /// Applies one uniformly drawn candidate, or returns `None` if inapplicable.
    pub fn apply(&self, chart: &mut Chart, id: &str, rng: &mut impl Rng) -> Option<Vec<MutationRecord>> {
        let mut cands = self.candidates(chart, id);
        if cands.is_empty() {
            return None;
        }
        let i = rng.random_range(0..cands.len());
        Some(cands.swap_remove(i).apply(chart))
    }
}

macro_rules! op {
    ($id:literal, $kind:ident, $desc:literal, $f:ident) => {
        Operator { id: $id, kind: ElementKind::$kind, description: $desc, candidates: $f }
    };
}

pub static OPERATORS: [Operator; 19] = [
    op!("S1", State, "perturb an assignment constant", s1_perturb_constant),
    op!("S2", State, "negate a boolean assignment", s2_negate_boolean),
    op!("S3", State, "swap entry and during actions", s3_swap_entry_during),
    op!("S4", State, "swap during and exit actions", s4_swap_during_exit),
    op!("S5", State, "delete one action", s5_delete_action),
    op!("S6", State, "duplicate one action", s6_duplicate_action),
    op!("S7", State, "retarget an assignment to another variable", s7_retarget_variable),
    op!("S8", State, "replace an arithmetic operator in an action", s8_replace_arithmetic),
    op!("T1", Transition, "negate a relational operator", t1_negate_relational),
    op!("T2", Transition, "replace a relational operator", t2_replace_relational),
    op!("T3", Transition, "swap && and ||", t3_replace_logical),
    op!("T4", Transition, "perturb a condition constant", t4_perturb_constant),
    op!("T5", Transition, "remove the condition", t5_remove_condition),
    op!("T6", Transition, "negate the whole condition", t6_negate_condition),
    op!("T7", Transition, "retarget the destination", t7_retarget_dest),
    op!("T8", Transition, "retarget the source", t8_retarget_source),
    op!("T9", Transition, "swap priorities with a sibling", t9_swap_priorities),
    op!("T10", Transition, "delete a condition action", t10_delete_condition_action),
    op!("T11", Transition, "swap condition and transition actions", t11_swap_actions),
];

pub fn operator(id: &str) -> Option<&'static Operator> {
    OPERATORS.iter().find(|o| o.id == id)
}

pub fn operators_for(kind: ElementKind) -> impl Iterator<Item = &'static Operator> {
    OPERATORS.iter().filter(move |o| o.kind == kind)
}

// ---- expression and action helpers

/// Copies of `e` with exactly one node rewritten by `f`.
fn variants(e: &Expr, f: &dyn Fn(&Expr) -> Vec<Expr>) -> Vec<Expr> {
    let mut out = f(e);
    match e {
        Expr::Lit(_) | Expr::Var(_) => {}
        Expr::Unary(op, x) => out.extend(variants(x, f).into_iter().map(|v| Expr::unary(*op, v))),
        Expr::Binary(op, l, r) => {
            out.extend(variants(l, f).into_iter().map(|v| Expr::binary(*op, v, (**r).clone())));
            out.extend(variants(r, f).into_iter().map(|v| Expr::binary(*op, (**l).clone(), v)));
        }
    }
    out
}

fn perturb_literal(e: &Expr) -> Vec<Expr> {
    match e {
        Expr::Lit(Value::Num(c)) => vec![Expr::num(c + 1.0), Expr::num(c - 1.0)],
        Expr::Lit(Value::Bool(b)) => vec![Expr::boolean(!b)],
        _ => vec![],
    }
}

fn replace_arithmetic(e: &Expr) -> Vec<Expr> {
    match e {
        Expr::Binary(op, l, r) if op.is_arithmetic() => BinOp::ARITHMETIC
            .iter()
            .filter(|o| *o != op)
            .map(|o| Expr::binary(*o, (**l).clone(), (**r).clone()))
            .collect(),
        _ => vec![],
    }
}

fn negate(e: &Expr) -> Expr {
    match e {
        Expr::Unary(UnaryOp::Not, x) => (**x).clone(),
        _ => Expr::unary(UnaryOp::Not, e.clone()),
    }
}

fn render(stmts: &[Stmt]) -> String {
    stmts.iter().map(Stmt::to_string).collect::<Vec<_>>().join("; ")
}

/// Rewrites of single statements inside an action list: `(index, new text)`.
fn action_variants(list: &[String], f: &dyn Fn(&Stmt) -> Vec<Stmt>) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    for (i, src) in list.iter().enumerate() {
        let Ok(stmts) = parse_stmts(src) else { continue };
        for (j, s) in stmts.iter().enumerate() {
            for v in f(s) {
                let mut copy = stmts.clone();
                copy[j] = v;
                out.push((i, render(&copy)));
            }
        }
    }
    out
}

fn rhs_variants(s: &Stmt, f: &dyn Fn(&Expr) -> Vec<Expr>) -> Vec<Stmt> {
    variants(&s.value, f).into_iter().map(|value| Stmt { target: s.target.clone(), value }).collect()
}

const SLOTS: [&str; 3] = ["entry", "during", "exit"];

fn slot<'a>(s: &'a State, name: &str) -> &'a Vec<String> {
    match name {
        "entry" => &s.entry,
        "during" => &s.during,
        _ => &s.exit,
    }
}

fn slot_mut<'a>(s: &'a mut State, name: &str) -> &'a mut Vec<String> {
    match name {
        "entry" => &mut s.entry,
        "during" => &mut s.during,
        _ => &mut s.exit,
    }
}

fn list_text(list: &[String]) -> String {
    serde_json::to_string(list).expect("strings serialize")
}

fn record(
    op: &str,
    kind: ElementKind,
    id: &str,
    field: impl Into<String>,
    before: String,
    after: String,
) -> MutationRecord {
    MutationRecord { operator_id: op.into(), kind, element_id: id.into(), field: field.into(), before, after }
}

fn state_candidate(op: &str, s: State, field: String, before: String, after: String) -> Candidate {
    let rec = record(op, ElementKind::State, &s.id, field, before, after);
    Candidate { replacements: vec![Replacement::State(s)], records: vec![rec] }
}

fn transition_candidate(op: &str, t: Transition, field: &str, before: String, after: String) -> Candidate {
    let rec = record(op, ElementKind::Transition, &t.id, field, before, after);
    Candidate { replacements: vec![Replacement::Transition(t)], records: vec![rec] }
}

/// Candidates rewriting one statement in any action slot of a state.
fn state_stmt_op(op: &str, chart: &Chart, id: &str, f: &dyn Fn(&Stmt) -> Vec<Stmt>) -> Vec<Candidate> {
    let Some(state) = chart.state(id) else { return vec![] };
    let mut out = Vec::new();
    for name in SLOTS {
        let list = slot(state, name);
        for (i, text) in action_variants(list, f) {
            if text == list[i] {
                continue;
            }
            let mut s = state.clone();
            slot_mut(&mut s, name)[i] = text.clone();
            out.push(state_candidate(op, s, format!("{name}[{i}]"), list[i].clone(), text));
        }
    }
    out
}

// ---- state operators

fn s1_perturb_constant(chart: &Chart, id: &str) -> Vec<Candidate> {
    state_stmt_op("S1", chart, id, &|s| rhs_variants(s, &perturb_literal))
}

fn s2_negate_boolean(chart: &Chart, id: &str) -> Vec<Candidate> {
    state_stmt_op("S2", chart, id, &|s| {
        if chart.var_type(&s.target) == Some(ValueType::Boolean) {
            vec![Stmt { target: s.target.clone(), value: negate(&s.value) }]
        } else {
            vec![]
        }
    })
}

fn swap_slots(op: &str, chart: &Chart, id: &str, a: &str, b: &str) -> Vec<Candidate> {
    let Some(state) = chart.state(id) else { return vec![] };
    let (x, y) = (slot(state, a).clone(), slot(state, b).clone());
    if x == y {
        return vec![];
    }
    let mut s = state.clone();
    *slot_mut(&mut s, a) = y.clone();
    *slot_mut(&mut s, b) = x.clone();
    let before = format!("{a}={} {b}={}", list_text(&x), list_text(&y));
    let after = format!("{a}={} {b}={}", list_text(&y), list_text(&x));
    vec![state_candidate(op, s, format!("{a}<->{b}"), before, after)]
}

fn s3_swap_entry_during(chart: &Chart, id: &str) -> Vec<Candidate> {
    swap_slots("S3", chart, id, "entry", "during")
}

fn s4_swap_during_exit(chart: &Chart, id: &str) -> Vec<Candidate> {
    swap_slots("S4", chart, id, "during", "exit")
}

fn s5_delete_action(chart: &Chart, id: &str) -> Vec<Candidate> {
    let Some(state) = chart.state(id) else { return vec![] };
    let mut out = Vec::new();
    for name in SLOTS {
        let list = slot(state, name);
        for i in 0..list.len() {
            let mut s = state.clone();
            slot_mut(&mut s, name).remove(i);
            let after = list_text(slot(&s, name));
            out.push(state_candidate("S5", s, name.to_string(), list_text(list), after));
        }
    }
    out
}

fn s6_duplicate_action(chart: &Chart, id: &str) -> Vec<Candidate> {
    let Some(state) = chart.state(id) else { return vec![] };
    let mut out = Vec::new();
    for name in SLOTS {
        let list = slot(state, name);
        for i in 0..list.len() {
            let mut s = state.clone();
            slot_mut(&mut s, name).insert(i + 1, list[i].clone());
            let after = list_text(slot(&s, name));
            out.push(state_candidate("S6", s, name.to_string(), list_text(list), after));
        }
    }
    out
}

fn s7_retarget_variable(chart: &Chart, id: &str) -> Vec<Candidate> {
    state_stmt_op("S7", chart, id, &|s| {
        let Some(target) = chart.variable(&s.target) else { return vec![] };
        chart
            .variables
            .iter()
            .filter(|v| v.name != target.name && v.kind == target.kind && v.value_type == target.value_type)
            .map(|v| Stmt { target: v.name.clone(), value: s.value.clone() })
            .collect()
    })
}

fn s8_replace_arithmetic(chart: &Chart, id: &str) -> Vec<Candidate> {
    state_stmt_op("S8", chart, id, &|s| rhs_variants(s, &replace_arithmetic))
}

// ---- transition operators

fn condition_op(op: &str, chart: &Chart, id: &str, f: &dyn Fn(&Expr) -> Vec<Expr>) -> Vec<Candidate> {
    let Some(t) = chart.transition(id) else { return vec![] };
    let Some(src) = &t.condition else { return vec![] };
    let Ok(cond) = parse_expr(src) else { return vec![] };
    variants(&cond, f)
        .into_iter()
        .map(|v| v.to_string())
        .filter(|text| text != src)
        .map(|text| {
            let mut m = t.clone();
            m.condition = Some(text.clone());
            transition_candidate(op, m, "condition", src.clone(), text)
        })
        .collect()
}

fn t1_negate_relational(chart: &Chart, id: &str) -> Vec<Candidate> {
    condition_op("T1", chart, id, &|e| match e {
        Expr::Binary(op, l, r) if op.is_relational() => {
            vec![Expr::binary(op.negated().expect("relational"), (**l).clone(), (**r).clone())]
        }
        _ => vec![],
    })
}

fn t2_replace_relational(chart: &Chart, id: &str) -> Vec<Candidate> {
    let lookup = |n: &str| chart.var_type(n);
    condition_op("T2", chart, id, &|e| match e {
        Expr::Binary(op, l, r) if op.is_relational() && check_expr(l, &lookup) == Ok(ValueType::Number) => {
            BinOp::RELATIONAL
                .iter()
                .filter(|o| **o != *op && Some(**o) != op.negated())
                .map(|o| Expr::binary(*o, (**l).clone(), (**r).clone()))
                .collect()
        }
        _ => vec![],
    })
}

fn t3_replace_logical(chart: &Chart, id: &str) -> Vec<Candidate> {
    condition_op("T3", chart, id, &|e| match e {
        Expr::Binary(BinOp::And, l, r) => vec![Expr::binary(BinOp::Or, (**l).clone(), (**r).clone())],
        Expr::Binary(BinOp::Or, l, r) => vec![Expr::binary(BinOp::And, (**l).clone(), (**r).clone())],
        _ => vec![],
    })
}

fn t4_perturb_constant(chart: &Chart, id: &str) -> Vec<Candidate> {
    condition_op("T4", chart, id, &perturb_literal)
}

fn t5_remove_condition(chart: &Chart, id: &str) -> Vec<Candidate> {
    let Some(t) = chart.transition(id) else { return vec![] };
    let Some(cond) = &t.condition else { return vec![] };
    let mut m = t.clone();
    m.condition = None;
    vec![transition_candidate("T5", m, "condition", cond.clone(), "null".into())]
}

fn t6_negate_condition(chart: &Chart, id: &str) -> Vec<Candidate> {
    let Some(t) = chart.transition(id) else { return vec![] };
    let Some(src) = &t.condition else { return vec![] };
    let Ok(cond) = parse_expr(src) else { return vec![] };
    let text = negate(&cond).to_string();
    let mut m = t.clone();
    m.condition = Some(text.clone());
    vec![transition_candidate("T6", m, "condition", src.clone(), text)]
}

fn t7_retarget_dest(chart: &Chart, id: &str) -> Vec<Candidate> {
    let Some(t) = chart.transition(id) else { return vec![] };
    let mut nodes: Vec<&str> = chart.states.iter().map(|s| s.id.as_str()).collect();
    if !t.is_default() {
        nodes.extend(chart.junctions.iter().map(|j| j.id.as_str()));
    }
    let mut out = Vec::new();
    for n in nodes {
        if t.dest.as_deref() == Some(n) {
            continue;
        }
        let mut m = t.clone();
        m.dest = Some(n.to_string());
        // a junction source can close a junction cycle
        if chart.junctions.iter().any(|j| Some(&j.id) == t.source.as_ref()) {
            let mut probe = chart.clone();
            *probe.transition_mut(id).expect("exists") = m.clone();
            if junction_cycle(&probe).is_some() {
                continue;
            }
        }
        let before = t.dest.clone().unwrap_or_default();
        out.push(transition_candidate("T7", m, "dest", before, n.to_string()));
    }
    out
}

fn t8_retarget_source(chart: &Chart, id: &str) -> Vec<Candidate> {
    let Some(t) = chart.transition(id) else { return vec![] };
    let Some(src) = &t.source else { return vec![] };
    let mut out = Vec::new();
    for s in &chart.states {
        if &s.id == src {
            continue;
        }
        let priority = chart.outgoing(&s.id).iter().map(|o| o.priority).max().unwrap_or(0) + 1;
        let mut m = t.clone();
        m.source = Some(s.id.clone());
        m.priority = priority;
        let mut c = transition_candidate("T8", m, "source", src.clone(), s.id.clone());
        if priority != t.priority {
            c.records.push(record(
                "T8",
                ElementKind::Transition,
                id,
                "priority",
                t.priority.to_string(),
                priority.to_string(),
            ));
        }
        out.push(c);
    }
    out
}

fn t9_swap_priorities(chart: &Chart, id: &str) -> Vec<Candidate> {
    let Some(t) = chart.transition(id) else { return vec![] };
    let Some(src) = &t.source else { return vec![] };
    chart
        .outgoing(src)
        .into_iter()
        .filter(|o| o.id != t.id)
        .map(|o| {
            let (mut a, mut b) = (t.clone(), o.clone());
            std::mem::swap(&mut a.priority, &mut b.priority);
            let records = vec![
                record(
                    "T9",
                    ElementKind::Transition,
                    &a.id,
                    "priority",
                    t.priority.to_string(),
                    a.priority.to_string(),
                ),
                record(
                    "T9",
                    ElementKind::Transition,
                    &b.id,
                    "priority",
                    o.priority.to_string(),
                    b.priority.to_string(),
                ),
            ];
            Candidate { replacements: vec![Replacement::Transition(a), Replacement::Transition(b)], records }
        })
        .collect()
}

fn t10_delete_condition_action(chart: &Chart, id: &str) -> Vec<Candidate> {
    let Some(t) = chart.transition(id) else { return vec![] };
    (0..t.condition_action.len())
        .map(|i| {
            let mut m = t.clone();
            m.condition_action.remove(i);
            let after = list_text(&m.condition_action);
            transition_candidate("T10", m, "condition_action", list_text(&t.condition_action), after)
        })
        .collect()
}

fn t11_swap_actions(chart: &Chart, id: &str) -> Vec<Candidate> {
    let Some(t) = chart.transition(id) else { return vec![] };
    if t.condition_action == t.transition_action {
        return vec![];
    }
    let mut m = t.clone();
    std::mem::swap(&mut m.condition_action, &mut m.transition_action);
    let show = |x: &Transition| {
        format!(
            "condition_action={} transition_action={}",
            list_text(&x.condition_action),
            list_text(&x.transition_action)
        )
    };
    let (before, after) = (show(t), show(&m));
    vec![transition_candidate("T11", m, "condition_action<->transition_action", before, after)]
}

// ---- stopping rule

fn element_ids(chart: &Chart, kind: ElementKind) -> Vec<String> {
    match kind {
        ElementKind::State => chart.states.iter().map(|s| s.id.clone()).collect(),
        ElementKind::Transition => chart.transitions.iter().map(|t| t.id.clone()).collect(),
    }
}

/// Applies one mutation: kind, then element, then operators in random order.
/// Elements with no applicable operator are dropped and another is drawn.
pub fn mutate_once(chart: &mut Chart, rng: &mut impl Rng) -> Result<Vec<MutationRecord>, BaselineError> {
    let mut pools = [
        (ElementKind::State, element_ids(chart, ElementKind::State)),
        (ElementKind::Transition, element_ids(chart, ElementKind::Transition)),
    ];
    loop {
        let live: Vec<usize> = (0..2).filter(|&k| !pools[k].1.is_empty()).collect();
        if live.is_empty() {
            return Err(BaselineError::NoApplicableMutation(chart.name.clone()));
        }
        let (kind, pool) = &mut pools[live[rng.random_range(0..live.len())]];
        let id = pool.swap_remove(rng.random_range(0..pool.len()));
        let mut ops: Vec<&Operator> = operators_for(*kind).collect();
        ops.shuffle(rng);
        for op in ops {
            if let Some(records) = op.apply(chart, &id, rng) {
                return Ok(records);
            }
        }
    }
}

/// Draws the stopping decision after `n` applied mutations.
fn keep_going(n: usize, rng: &mut impl Rng) -> bool {
    let p: f64 = rng.random();
    p < 0.5f64.powi(n as i32)
}

/// One baseline mutant of `model` for `seed`.
pub fn generate_baseline(
    model: &Chart,
    seed: u64,
    first_order_only: bool,
) -> Result<(Chart, Vec<MutationRecord>), BaselineError> {
    let mut rng = rng(seed);
    let mut chart = model.clone();
    let mut records = Vec::new();
    let mut n = 0;
    loop {
        records.extend(mutate_once(&mut chart, &mut rng)?);
        n += 1;
        if first_order_only || !keep_going(n, &mut rng) {
            return Ok((chart, records));
        }
    }
}

/// Number of mutations the stopping rule would apply, without applying them.
pub fn stopping_count(rng: &mut impl Rng, first_order_only: bool) -> usize {
    let mut n = 1;
    while !first_order_only && keep_going(n, rng) {
        n += 1;
    }
    n
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountDistribution {
    pub runs: u64,
    pub mean: f64,
    pub histogram: BTreeMap<usize, u64>,
}

impl CountDistribution {
    /// Empirical P(count >= k).
    pub fn at_least(&self, k: usize) -> f64 {
        let hits: u64 = self.histogram.range(k..).map(|(_, c)| c).sum();
        hits as f64 / self.runs as f64
    }
}

/// Runs the stopping loop once per seed `0..seeds`.
pub fn mutation_count_distribution(seeds: u64, first_order_only: bool) -> CountDistribution {
    let mut histogram = BTreeMap::new();
    let mut total = 0u64;
    for seed in 0..seeds {
        let n = stopping_count(&mut rng(seed), first_order_only);
        total += n as u64;
        *histogram.entry(n).or_insert(0) += 1;
    }
    CountDistribution { runs: seeds, mean: total as f64 / seeds as f64, histogram }
}

/// Analytic mean of the stopping loop: sum over k >= 0 of 0.5^(k(k+1)/2).
pub fn expected_mutation_count() -> f64 {
    (0..20).map(|k| 0.5f64.powi(k * (k + 1) / 2)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::validate::{validate, ValidationVerdict};

    #[test]
    fn catalog_shape() {
        assert_eq!(operators_for(ElementKind::State).count(), 8);
        assert_eq!(operators_for(ElementKind::Transition).count(), 11);
    }

    #[test]
    fn negate_open_door_condition() {
        let chart = corpus::fridge().chart;
        let cands = operator("T1").unwrap().candidates(&chart, "T2");
        assert_eq!(cands.len(), 1);
        let rec = &cands[0].records[0];
        assert_eq!((rec.before.as_str(), rec.after.as_str()), ("DOOR_SENSOR == 1", "DOOR_SENSOR != 1"));
    }

    #[test]
    fn seeded_run_reaches_the_negated_condition() {
        let chart = corpus::fridge().chart;
        let seed = (0..5000)
            .find(|&s| {
                let (_, recs) = generate_baseline(&chart, s, true).unwrap();
                recs[0].operator_id == "T1" && recs[0].element_id == "T2"
            })
            .expect("some seed picks T1 on T2");
        let (m, _) = generate_baseline(&chart, seed, true).unwrap();
        assert_eq!(m.transition("T2").unwrap().condition.as_deref(), Some("DOOR_SENSOR != 1"));
    }

    #[test]
    fn alarm_constant_perturbed() {
        let chart = corpus::fridge().chart;
        let cands = operator("S1").unwrap().candidates(&chart, "S_CLOSE_NORM");
        assert!(cands.iter().any(|c| c.records[0].before == "ALARM = 0" && c.records[0].after == "ALARM = 1"));
    }

    #[test]
    fn first_order_has_one_record() {
        let chart = corpus::elevator().chart;
        for seed in 0..300 {
            let (m, recs) = generate_baseline(&chart, seed, true).unwrap();
            let elements: std::collections::BTreeSet<_> = recs.iter().map(|r| &r.element_id).collect();
            assert!(recs[0].operator_id == "T9" || elements.len() == 1);
            assert_ne!(m, chart);
        }
    }

    #[test]
    fn seed_determinism() {
        let chart = corpus::pacemaker().chart;
        for seed in [0, 1, 99, u64::MAX] {
            assert_eq!(generate_baseline(&chart, seed, false), generate_baseline(&chart, seed, false));
        }
    }

    #[test]
    fn mutants_stay_valid() {
        for m in corpus::all() {
            for seed in 0..200 {
                let (mutant, recs) = generate_baseline(&m.chart, seed, false).unwrap();
                let report = validate(&mutant);
                assert_eq!(
                    report.verdict,
                    ValidationVerdict::Compilable,
                    "{} seed {seed}: {recs:?} {report:?}",
                    m.name
                );
            }
        }
    }

    #[test]
    fn distribution_matches_analytic_mean() {
        let d = mutation_count_distribution(20_000, false);
        assert!((d.mean - expected_mutation_count()).abs() < 0.03, "{}", d.mean);
        assert!((d.at_least(2) - 0.5).abs() < 0.02);
        assert_eq!(mutation_count_distribution(1000, true).mean, 1.0);
        assert!((expected_mutation_count() - 1.6416).abs() < 1e-3);
    }

    #[test]
    fn degenerate_chart_has_no_mutation() {
        let text = r#"{"name":"c","variables":[],
          "states":[{"id":"A","name":"A","entry":[],"during":[],"exit":[]}],"junctions":[],
          "transitions":[{"id":"T0","source":null,"dest":"A","priority":1,"event":null,"condition":null,"condition_action":[],"transition_action":[]}]}"#;
        let chart = crate::chart::parse_chart(text).unwrap();
        assert!(matches!(generate_baseline(&chart, 1, true), Err(BaselineError::NoApplicableMutation(_))));
    }
}
