//! Discrete-step chart execution, kill verdicts and coverage.
//!
//! Step 0 loads the first input vector and takes the default transition.
//! Every later step loads inputs, searches the active state's outgoing
//! transitions in priority order (depth first through junctions, rolling the
//! environment back on dead ends) and either commits one path or runs the
//! active state's `during` actions. Outputs are recorded after every step.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::chart::{Chart, VarKind};
use crate::expr::{eval_expr, exec_stmts, parse_expr, parse_stmts, Env, EvalError, Expr, Stmt, Value};
use crate::validate::{validate_semantics, validate_structure, ValidationError};

pub const MAX_STEPS: usize = 100_000;
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestCase {
    pub name: String,
    pub steps: usize,
    pub inputs: BTreeMap<String, Vec<Value>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    pub tolerance: f64,
    pub tests: Vec<TestCase>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeError {
    pub step: usize,
    pub element_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub outputs: BTreeMap<String, Vec<Value>>,
    pub active_state: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_error: Option<RuntimeError>,
}

impl Trace {
    /// Number of steps that completed.
    pub fn len(&self) -> usize {
        self.active_state.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active_state.is_empty()
    }

    /// Output equality within `tol`, including runtime-error presence.
    pub fn same_behavior(&self, other: &Trace, tol: f64) -> bool {
        if self.runtime_error.is_some() != other.runtime_error.is_some() || self.len() != other.len() {
            return false;
        }
        if self.outputs.len() != other.outputs.len() {
            return false;
        }
        self.outputs.iter().all(|(name, xs)| {
            other
                .outputs
                .get(name)
                .is_some_and(|ys| xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| x.approx_eq(y, tol)))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Killed,
    Alive,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("chart is not executable: {}", .0.first().map(|e| e.to_string()).unwrap_or_default())]
    InvalidChart(Vec<ValidationError>),
    #[error("test `{test}`: {message}")]
    BadTest { test: String, message: String },
    #[error("test `{test}` asks for {steps} steps; the limit is {MAX_STEPS}")]
    StepBudget { test: String, steps: usize },
    #[error("variable interfaces differ: {0}")]
    InterfaceMismatch(String),
}

#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error("malformed suite JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("suite schema violation at {path}: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Parses a suite file and checks it against `chart`'s inputs.
pub fn parse_suite(text: &str, chart: &Chart) -> Result<Suite, SuiteError> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let suite: Suite = serde_path_to_error::deserialize(value)
        .map_err(|e| SuiteError::Schema { path: e.path().to_string(), message: e.inner().to_string() })?;
    if suite.tolerance.is_nan() || suite.tolerance < 0.0 {
        return Err(SuiteError::Schema { path: "tolerance".into(), message: "must be nonnegative".into() });
    }
    for t in &suite.tests {
        check_test(chart, t)?;
    }
    Ok(suite)
}

fn check_test(chart: &Chart, test: &TestCase) -> Result<(), SimError> {
    let bad = |message: String| SimError::BadTest { test: test.name.clone(), message };
    if test.steps == 0 {
        return Err(bad("steps must be positive".into()));
    }
    if test.steps > MAX_STEPS {
        return Err(SimError::StepBudget { test: test.name.clone(), steps: test.steps });
    }
    for v in chart.input_variables() {
        let seq = test.inputs.get(&v.name).ok_or_else(|| bad(format!("no values for input `{}`", v.name)))?;
        if seq.len() != test.steps {
            return Err(bad(format!("input `{}` has {} values, expected {}", v.name, seq.len(), test.steps)));
        }
        if let Some(x) = seq.iter().find(|x| x.value_type() != v.value_type) {
            return Err(bad(format!("input `{}` expects {}, found {x}", v.name, v.value_type)));
        }
    }
    if let Some(name) = test.inputs.keys().find(|n| chart.variable(n).is_none_or(|v| v.kind != VarKind::Input)) {
        return Err(bad(format!("`{name}` is not an input variable")));
    }
    Ok(())
}

struct CState {
    id: String,
    entry: Vec<Stmt>,
    during: Vec<Stmt>,
    exit: Vec<Stmt>,
}

struct CTrans {
    id: String,
    dest: usize,
    event: Option<String>,
    condition: Option<Expr>,
    condition_action: Vec<Stmt>,
    transition_action: Vec<Stmt>,
}

/// Observed outcomes, indexed like the program's transitions and states.
#[derive(Debug, Clone, Default)]
struct Observed {
    cond_true: Vec<bool>,
    cond_false: Vec<bool>,
    fired: Vec<bool>,
    entered: Vec<bool>,
}

/// A chart with every label parsed, ready to run many tests.
pub struct Program {
    states: Vec<CState>,
    trans: Vec<CTrans>,
    /// Outgoing transition indices per node, ascending priority. Nodes are
    /// states first, then junctions.
    outgoing: Vec<Vec<usize>>,
    default: usize,
    initial: Env,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

fn stmts(srcs: &[String]) -> Vec<Stmt> {
    srcs.iter().flat_map(|s| parse_stmts(s).expect("validated statement")).collect()
}

impl Program {
    pub fn new(chart: &Chart) -> Result<Program, SimError> {
        let mut errs = validate_structure(chart);
        if errs.is_empty() {
            errs = validate_semantics(chart);
        }
        if !errs.is_empty() {
            return Err(SimError::InvalidChart(errs));
        }

        let mut index = HashMap::new();
        for (i, s) in chart.states.iter().enumerate() {
            index.insert(s.id.as_str(), i);
        }
        for (i, j) in chart.junctions.iter().enumerate() {
            index.insert(j.id.as_str(), chart.states.len() + i);
        }
        let states = chart
            .states
            .iter()
            .map(|s| CState {
                id: s.id.clone(),
                entry: stmts(&s.entry),
                during: stmts(&s.during),
                exit: stmts(&s.exit),
            })
            .collect();
        let trans: Vec<CTrans> = chart
            .transitions
            .iter()
            .map(|t| CTrans {
                id: t.id.clone(),
                dest: index[t.dest.as_deref().expect("validated dest")],
                event: t.event.clone(),
                condition: t.condition.as_deref().map(|c| parse_expr(c).expect("validated condition")),
                condition_action: stmts(&t.condition_action),
                transition_action: stmts(&t.transition_action),
            })
            .collect();
        let mut outgoing = vec![Vec::new(); index.len()];
        let mut default = 0;
        let mut order: Vec<usize> = (0..chart.transitions.len()).collect();
        order.sort_by_key(|&i| chart.transitions[i].priority);
        for i in order {
            match &chart.transitions[i].source {
                Some(src) => outgoing[index[src.as_str()]].push(i),
                None => default = i,
            }
        }
        let mut initial = Env::new();
        for v in &chart.variables {
            initial.bind(v.name.clone(), v.initial);
        }
        Ok(Program {
            states,
            trans,
            outgoing,
            default,
            initial,
            inputs: chart.input_variables().map(|v| v.name.clone()).collect(),
            outputs: chart.output_variables().map(|v| v.name.clone()).collect(),
        })
    }

    fn observed(&self) -> Observed {
        let n = self.trans.len();
        Observed {
            cond_true: vec![false; n],
            cond_false: vec![false; n],
            fired: vec![false; n],
            entered: vec![false; self.states.len()],
        }
    }

    pub fn run(&self, test: &TestCase) -> Trace {
        self.run_observed(test, &mut self.observed())
    }

    fn run_observed(&self, test: &TestCase, obs: &mut Observed) -> Trace {
        let mut trace = Trace {
            outputs: self.outputs.iter().map(|o| (o.clone(), Vec::with_capacity(test.steps))).collect(),
            active_state: Vec::with_capacity(test.steps),
            runtime_error: None,
        };
        let mut env = self.initial.clone();
        let mut active = 0;
        for step in 0..test.steps {
            for name in &self.inputs {
                env.bind(name.clone(), test.inputs[name][step]);
            }
            let result = if step == 0 {
                self.initialize(&mut env, obs).map(|s| active = s)
            } else {
                self.step(active, &mut env, obs).map(|s| active = s)
            };
            if let Err((element_id, e)) = result {
                trace.runtime_error = Some(RuntimeError { step, element_id, message: e.to_string() });
                break;
            }
            for (name, seq) in trace.outputs.iter_mut() {
                seq.push(env.get(name).expect("declared output"));
            }
            trace.active_state.push(self.states[active].id.clone());
        }
        trace
    }

    fn initialize(&self, env: &mut Env, obs: &mut Observed) -> Result<usize, (String, EvalError)> {
        let t = &self.trans[self.default];
        exec(&t.id, &t.condition_action, env)?;
        exec(&t.id, &t.transition_action, env)?;
        obs.fired[self.default] = true;
        let s = &self.states[t.dest];
        exec(&s.id, &s.entry, env)?;
        obs.entered[t.dest] = true;
        Ok(t.dest)
    }

    fn step(&self, active: usize, env: &mut Env, obs: &mut Observed) -> Result<usize, (String, EvalError)> {
        let mut path = Vec::new();
        if self.search(active, env, obs, &mut path)? {
            let src = &self.states[active];
            exec(&src.id, &src.exit, env)?;
            for &i in &path {
                exec(&self.trans[i].id, &self.trans[i].transition_action, env)?;
                obs.fired[i] = true;
            }
            let dest = self.trans[*path.last().expect("nonempty path")].dest;
            let s = &self.states[dest];
            exec(&s.id, &s.entry, env)?;
            obs.entered[dest] = true;
            Ok(dest)
        } else {
            let s = &self.states[active];
            exec(&s.id, &s.during, env)?;
            Ok(active)
        }
    }

    /// Depth-first search for a complete path from `node`. On success `path`
    /// holds the transitions taken and `env` carries their condition actions.
    fn search(
        &self,
        node: usize,
        env: &mut Env,
        obs: &mut Observed,
        path: &mut Vec<usize>,
    ) -> Result<bool, (String, EvalError)> {
        for &i in &self.outgoing[node] {
            let t = &self.trans[i];
            if let Some(ev) = &t.event {
                if env.get(ev) != Some(Value::Bool(true)) {
                    continue;
                }
            }
            if let Some(cond) = &t.condition {
                let v = eval_expr(cond, env).map_err(|e| (t.id.clone(), e))?;
                if v == Value::Bool(true) {
                    obs.cond_true[i] = true;
                } else {
                    obs.cond_false[i] = true;
                    continue;
                }
            }
            let snapshot = env.clone();
            exec(&t.id, &t.condition_action, env)?;
            path.push(i);
            if t.dest < self.states.len() || self.search(t.dest, env, obs, path)? {
                return Ok(true);
            }
            path.pop();
            *env = snapshot;
        }
        Ok(false)
    }
}

fn exec(id: &str, stmts: &[Stmt], env: &mut Env) -> Result<(), (String, EvalError)> {
    exec_stmts(stmts, env).map_err(|e| (id.to_string(), e))
}

/// Runs one test against `chart`.
pub fn simulate(chart: &Chart, test: &TestCase) -> Result<Trace, SimError> {
    check_test(chart, test)?;
    Ok(Program::new(chart)?.run(test))
}

/// Runs every test of `suite`.
pub fn simulate_suite(chart: &Chart, suite: &Suite) -> Result<Vec<Trace>, SimError> {
    let program = Program::new(chart)?;
    suite
        .tests
        .iter()
        .map(|t| {
            check_test(chart, t)?;
            Ok(program.run(t))
        })
        .collect()
}

/// Killed iff output lengths, runtime-error presence or any output value differ.
pub fn compare(original: &Trace, mutant: &Trace, tol: f64) -> Verdict {
    if original.same_behavior(mutant, tol) {
        Verdict::Alive
    } else {
        Verdict::Killed
    }
}

fn interface(chart: &Chart) -> Vec<(&str, VarKind, crate::expr::ValueType)> {
    chart
        .variables
        .iter()
        .filter(|v| v.kind != VarKind::Local)
        .map(|v| (v.name.as_str(), v.kind, v.value_type))
        .collect()
}

pub fn check_interface(original: &Chart, mutant: &Chart) -> Result<(), SimError> {
    let (a, b) = (interface(original), interface(mutant));
    if a != b {
        return Err(SimError::InterfaceMismatch(format!(
            "{} declares {:?}, {} declares {:?}",
            original.name,
            a.iter().map(|x| x.0).collect::<Vec<_>>(),
            mutant.name,
            b.iter().map(|x| x.0).collect::<Vec<_>>()
        )));
    }
    Ok(())
}

/// One verdict per test of `suite`.
pub fn verdicts(original: &Chart, mutant: &Chart, suite: &Suite, tol: f64) -> Result<Vec<Verdict>, SimError> {
    check_interface(original, mutant)?;
    let a = simulate_suite(original, suite)?;
    let b = simulate_suite(mutant, suite)?;
    Ok(a.iter().zip(&b).map(|(x, y)| compare(x, y, tol)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub decision_coverage: f64,
    pub execution_coverage: f64,
    pub decisions_covered: usize,
    pub decisions_total: usize,
    pub executed: usize,
    pub executable: usize,
    /// Elements never executed or with a decision outcome never observed.
    pub uncovered: Vec<String>,
}

pub fn coverage(chart: &Chart, suite: &Suite) -> Result<CoverageReport, SimError> {
    let program = Program::new(chart)?;
    let mut obs = program.observed();
    for t in &suite.tests {
        check_test(chart, t)?;
        program.run_observed(t, &mut obs);
    }

    let mut uncovered = Vec::new();
    let (mut covered, mut total) = (0, 0);
    let mut executed = 0;
    for (i, t) in program.trans.iter().enumerate() {
        let complete = if t.condition.is_some() && i != program.default {
            total += 2;
            covered += obs.cond_true[i] as usize + obs.cond_false[i] as usize;
            obs.cond_true[i] && obs.cond_false[i]
        } else {
            total += 1;
            covered += obs.fired[i] as usize;
            obs.fired[i]
        };
        executed += obs.fired[i] as usize;
        if !complete || !obs.fired[i] {
            uncovered.push(t.id.clone());
        }
    }
    for (i, s) in program.states.iter().enumerate() {
        executed += obs.entered[i] as usize;
        if !obs.entered[i] {
            uncovered.push(s.id.clone());
        }
    }
    uncovered.sort();
    let executable = program.trans.len() + program.states.len();
    Ok(CoverageReport {
        decision_coverage: covered as f64 / total as f64,
        execution_coverage: executed as f64 / executable as f64,
        decisions_covered: covered,
        decisions_total: total,
        executed,
        executable,
        uncovered,
    })
}
