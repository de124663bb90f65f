//! Seeded random charts and suites for property tests and benchmarks.
//!
//! Every generated chart passes both validation stages. Junctions are
//! numbered and may only lead to higher-numbered junctions, which rules out
//! junction cycles.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::chart::{Chart, Junction, State, Transition, VarKind, Variable};
use crate::expr::{Value, ValueType};
use crate::sim::{Suite, TestCase, DEFAULT_TOLERANCE};

#[derive(Debug, Clone, Copy)]
pub struct GenOptions {
    pub max_states: usize,
    pub max_junctions: usize,
    pub max_out: usize,
    pub max_actions: usize,
    pub expr_depth: u32,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions { max_states: 6, max_junctions: 2, max_out: 3, max_actions: 2, expr_depth: 2 }
    }
}

struct Vars {
    num_read: Vec<String>,
    bool_read: Vec<String>,
    num_write: Vec<String>,
    bool_write: Vec<String>,
    bool_inputs: Vec<String>,
}

fn number(rng: &mut impl Rng) -> String {
    match rng.random_range(0..4) {
        0 => format!("{}.5", rng.random_range(0..10)),
        1 => format!("-{}", rng.random_range(1..5)),
        _ => rng.random_range(0..10).to_string(),
    }
}

fn num_expr(rng: &mut impl Rng, v: &Vars, depth: u32) -> String {
    if depth == 0 || rng.random_bool(0.5) {
        return match v.num_read.choose(rng) {
            Some(x) if rng.random_bool(0.7) => x.clone(),
            _ => number(rng),
        };
    }
    let op = ["+", "-", "*"].choose(rng).unwrap();
    format!("({} {op} {})", num_expr(rng, v, depth - 1), num_expr(rng, v, depth - 1))
}

fn bool_expr(rng: &mut impl Rng, v: &Vars, depth: u32) -> String {
    let leaf = depth == 0 || rng.random_bool(0.4);
    if leaf {
        return match rng.random_range(0..3) {
            0 if !v.bool_read.is_empty() => v.bool_read.choose(rng).unwrap().clone(),
            0 => "true".into(),
            _ => {
                let op = ["<", "<=", ">", ">=", "==", "!="].choose(rng).unwrap();
                format!("{} {op} {}", num_expr(rng, v, 1), num_expr(rng, v, 0))
            }
        };
    }
    match rng.random_range(0..3) {
        0 => format!("!({})", bool_expr(rng, v, depth - 1)),
        1 => format!("({} && {})", bool_expr(rng, v, depth - 1), bool_expr(rng, v, depth - 1)),
        _ => format!("({} || {})", bool_expr(rng, v, depth - 1), bool_expr(rng, v, depth - 1)),
    }
}

fn actions(rng: &mut impl Rng, v: &Vars, o: &GenOptions) -> Vec<String> {
    (0..rng.random_range(0..=o.max_actions))
        .filter_map(|_| {
            if rng.random_bool(0.5) {
                let x = v.num_write.choose(rng)?;
                Some(format!("{x} = {}", num_expr(rng, v, o.expr_depth)))
            } else {
                let x = v.bool_write.choose(rng)?;
                Some(format!("{x} = {}", bool_expr(rng, v, o.expr_depth)))
            }
        })
        .collect()
}

/// A valid, canonical chart.
pub fn random_chart(rng: &mut impl Rng, o: &GenOptions) -> Chart {
    let mut variables = Vec::new();
    let mut add = |name: String, kind, ty, rng: &mut _| {
        let initial = match ty {
            ValueType::Number => Value::Num(rng_num(rng)),
            ValueType::Boolean => Value::Bool(false),
        };
        variables.push(Variable { name, kind, value_type: ty, initial });
    };
    let n_in = rng.random_range(1..=3);
    let b_in = rng.random_range(0..=2);
    let n_out = rng.random_range(1..=2);
    let b_out = rng.random_range(0..=1);
    let n_loc = rng.random_range(0..=2);
    for i in 0..n_in {
        add(format!("IN{i}"), VarKind::Input, ValueType::Number, rng);
    }
    for i in 0..b_in {
        add(format!("BIN{i}"), VarKind::Input, ValueType::Boolean, rng);
    }
    for i in 0..n_out {
        add(format!("OUT{i}"), VarKind::Output, ValueType::Number, rng);
    }
    for i in 0..b_out {
        add(format!("BOUT{i}"), VarKind::Output, ValueType::Boolean, rng);
    }
    for i in 0..n_loc {
        add(format!("loc{i}"), VarKind::Local, ValueType::Number, rng);
    }
    let names = |kinds: &[VarKind], ty: ValueType| -> Vec<String> {
        variables.iter().filter(|v| kinds.contains(&v.kind) && v.value_type == ty).map(|v| v.name.clone()).collect()
    };
    let all = [VarKind::Input, VarKind::Output, VarKind::Local];
    let vars = Vars {
        num_read: names(&all, ValueType::Number),
        bool_read: names(&all, ValueType::Boolean),
        num_write: names(&[VarKind::Output, VarKind::Local], ValueType::Number),
        bool_write: names(&[VarKind::Output], ValueType::Boolean),
        bool_inputs: names(&[VarKind::Input], ValueType::Boolean),
    };

    let n_states = rng.random_range(1..=o.max_states.max(1));
    let n_junctions = rng.random_range(0..=o.max_junctions);
    let states: Vec<State> = (0..n_states)
        .map(|i| State {
            id: format!("S{i}"),
            name: format!("STATE_{i}"),
            entry: actions(rng, &vars, o),
            during: actions(rng, &vars, o),
            exit: actions(rng, &vars, o),
        })
        .collect();
    let junctions: Vec<Junction> = (0..n_junctions).map(|i| Junction { id: format!("J{i}") }).collect();

    let state_ids: Vec<String> = states.iter().map(|s| s.id.clone()).collect();
    let mut edges: Vec<(Option<String>, String, u32)> = vec![(None, "S0".into(), 1)];
    for s in &state_ids {
        for p in 1..=rng.random_range(0..=o.max_out) as u32 {
            let dest = if n_junctions > 0 && rng.random_bool(0.3) {
                format!("J{}", rng.random_range(0..n_junctions))
            } else {
                state_ids.choose(rng).unwrap().clone()
            };
            edges.push((Some(s.clone()), dest, p));
        }
    }
    for j in 0..n_junctions {
        for p in 1..=rng.random_range(1..=2u32) {
            let dest = if j + 1 < n_junctions && rng.random_bool(0.3) {
                format!("J{}", rng.random_range(j + 1..n_junctions))
            } else {
                state_ids.choose(rng).unwrap().clone()
            };
            edges.push((Some(format!("J{j}")), dest, p));
        }
    }
    let transitions = edges
        .into_iter()
        .enumerate()
        .map(|(i, (source, dest, priority))| transition(rng, &vars, o, format!("T{i}"), source, dest, priority))
        .collect();

    let mut chart = Chart { name: "generated".into(), variables, states, junctions, transitions };
    chart.canonicalize();
    chart
}

fn transition(
    rng: &mut impl Rng,
    vars: &Vars,
    o: &GenOptions,
    id: String,
    source: Option<String>,
    dest: String,
    priority: u32,
) -> Transition {
    let labelled = source.is_some();
    Transition {
        id,
        source,
        dest: Some(dest),
        priority,
        event: (labelled && rng.random_bool(0.2)).then(|| vars.bool_inputs.choose(rng).cloned()).flatten(),
        condition: (labelled && rng.random_bool(0.8)).then(|| bool_expr(rng, vars, o.expr_depth)),
        condition_action: actions(rng, vars, o),
        transition_action: actions(rng, vars, o),
    }
}

fn rng_num(rng: &mut impl Rng) -> f64 {
    rng.random_range(-3..=5) as f64
}

/// `tests` random input sequences of `steps` steps each.
pub fn random_suite(chart: &Chart, rng: &mut impl Rng, tests: usize, steps: usize) -> Suite {
    let tests = (0..tests)
        .map(|i| {
            let inputs: BTreeMap<String, Vec<Value>> = chart
                .input_variables()
                .map(|v| {
                    let seq = (0..steps)
                        .map(|_| match v.value_type {
                            ValueType::Number => Value::Num(rng.random_range(-2..=8) as f64),
                            ValueType::Boolean => Value::Bool(rng.random_bool(0.5)),
                        })
                        .collect();
                    (v.name.clone(), seq)
                })
                .collect();
            TestCase { name: format!("t{i}"), steps, inputs }
        })
        .collect();
    Suite { tolerance: DEFAULT_TOLERANCE, tests }
}
