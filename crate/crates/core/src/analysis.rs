//! Mutation metrics: duplication, equivalence candidates, mutant quality,
//! lifecycle rates and the Cochran sample size.

use std::collections::BTreeMap;
use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::sim::{compare, Trace, Verdict};

/// Name of the quality formula in use, recorded in every report.
pub const QUALITY_METRIC: &str = "kill-share-v1";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("verdict matrix is not rectangular: {0}")]
    Shape(String),
    #[error("no killed mutants")]
    NoKilledMutants,
    #[error("{0}")]
    DomainError(String),
}

/// Kill results of compiled mutants against a suite.
///
/// `traces[m][t]` is mutant `m`'s output on test `t`; they separate mutants
/// that share a kill vector.
#[derive(Debug, Clone, PartialEq)]
pub struct VerdictMatrix {
    pub mutants: Vec<String>,
    pub tests: Vec<String>,
    pub killed: Vec<Vec<bool>>,
    pub traces: Vec<Vec<Trace>>,
}

impl VerdictMatrix {
    pub fn new(
        mutants: Vec<String>,
        tests: Vec<String>,
        killed: Vec<Vec<bool>>,
        traces: Vec<Vec<Trace>>,
    ) -> Result<Self, AnalysisError> {
        if killed.len() != mutants.len() || traces.len() != mutants.len() {
            return Err(AnalysisError::Shape(format!(
                "{} mutants, {} verdict rows, {} trace rows",
                mutants.len(),
                killed.len(),
                traces.len()
            )));
        }
        for (i, (k, tr)) in killed.iter().zip(&traces).enumerate() {
            if k.len() != tests.len() || tr.len() != tests.len() {
                return Err(AnalysisError::Shape(format!("row {i} does not have {} columns", tests.len())));
            }
        }
        Ok(VerdictMatrix { mutants, tests, killed, traces })
    }

    /// Builds the matrix by comparing each mutant's traces with the original's.
    pub fn from_traces(
        tests: Vec<String>,
        original: &[Trace],
        mutants: Vec<(String, Vec<Trace>)>,
        tol: f64,
    ) -> Result<Self, AnalysisError> {
        let mut ids = Vec::with_capacity(mutants.len());
        let mut killed = Vec::with_capacity(mutants.len());
        let mut traces = Vec::with_capacity(mutants.len());
        for (id, tr) in mutants {
            if tr.len() != original.len() {
                return Err(AnalysisError::Shape(format!(
                    "mutant {id} has {} traces, expected {}",
                    tr.len(),
                    original.len()
                )));
            }
            killed.push(original.iter().zip(&tr).map(|(o, m)| compare(o, m, tol) == Verdict::Killed).collect());
            ids.push(id);
            traces.push(tr);
        }
        Self::new(ids, tests, killed, traces)
    }

    pub fn len(&self) -> usize {
        self.mutants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mutants.is_empty()
    }

    pub fn is_killed(&self, m: usize) -> bool {
        self.killed[m].iter().any(|&k| k)
    }

    fn same_behavior(&self, a: usize, b: usize, tol: f64) -> bool {
        self.killed[a] == self.killed[b]
            && self.traces[a].iter().zip(&self.traces[b]).all(|(x, y)| x.same_behavior(y, tol))
    }
}

/// Partitions the killed mutants into duplicate groups, as row indices.
///
/// Each mutant joins the first earlier group whose leader shares its kill
/// vector and matches its traces on every test.
pub fn duplication_groups(matrix: &VerdictMatrix, tol: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for m in (0..matrix.len()).filter(|&m| matrix.is_killed(m)) {
        match groups.iter_mut().find(|g| matrix.same_behavior(g[0], m, tol)) {
            Some(g) => g.push(m),
            None => groups.push(vec![m]),
        }
    }
    groups
}

/// Surplus members across all groups.
pub fn duplicate_count(groups: &[Vec<usize>]) -> usize {
    groups.iter().map(|g| g.len() - 1).sum()
}

/// Mutants no test kills: potentially equivalent to the original.
pub fn equivalence_candidates(matrix: &VerdictMatrix) -> Vec<usize> {
    (0..matrix.len()).filter(|&m| !matrix.is_killed(m)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quality {
    /// One value per matrix row. Equivalence candidates score 0.
    pub per_mutant: Vec<f64>,
    /// Group leaders: the killed, non-duplicate mutants.
    pub distinct: Vec<usize>,
    pub mean_over_distinct: f64,
}

pub fn mutant_quality(matrix: &VerdictMatrix, tol: f64) -> Result<Quality, AnalysisError> {
    let groups = duplication_groups(matrix, tol);
    if groups.is_empty() {
        return Err(AnalysisError::NoKilledMutants);
    }
    let distinct: Vec<usize> = groups.iter().map(|g| g[0]).collect();
    let d = distinct.len() as f64;
    let kills_per_test: Vec<usize> =
        (0..matrix.tests.len()).map(|t| distinct.iter().filter(|&&m| matrix.killed[m][t]).count()).collect();
    // duplicates share their leader's kill vector, hence its score
    let per_mutant: Vec<f64> = matrix
        .killed
        .iter()
        .map(|row| {
            let k: Vec<usize> = (0..row.len()).filter(|&t| row[t]).collect();
            if k.is_empty() {
                return 0.0;
            }
            let easy: usize = k.iter().map(|&t| kills_per_test[t]).sum();
            1.0 - easy as f64 / (k.len() as f64 * d)
        })
        .collect();
    let mean_over_distinct = distinct.iter().map(|&m| per_mutant[m]).sum::<f64>() / d;
    Ok(Quality { per_mutant, distinct, mean_over_distinct })
}

/// Inverse of the standard normal CDF (Acklam's rational approximation,
/// relative error below 1.2e-9).
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00, 3.754408661907416e+00];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    }
}

/// Cochran's n = ceil(z² p (1-p) / e²) for a two-sided confidence level.
pub fn cochran_sample_size(confidence: f64, margin: f64, p: f64) -> Result<u64, AnalysisError> {
    let open = |x: f64| x > 0.0 && x < 1.0;
    if !open(confidence) {
        return Err(AnalysisError::DomainError(format!("confidence {confidence} must lie in (0, 1)")));
    }
    if !open(margin) {
        return Err(AnalysisError::DomainError(format!("margin {margin} must lie in (0, 1)")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(AnalysisError::DomainError(format!("proportion {p} must lie in [0, 1]")));
    }
    let z = normal_quantile(1.0 - (1.0 - confidence) / 2.0);
    let n = z * z * p * (1.0 - p) / (margin * margin);
    // absorb rounding noise when n is mathematically an integer
    Ok((n - 1e-9).ceil().max(0.0) as u64)
}

/// Additive lifecycle and cost counts for a set of mutants.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub requested: usize,
    pub proposals: usize,
    pub generable: usize,
    pub compiled: usize,
    pub killed: usize,
    pub duplicates: usize,
    pub equivalent: usize,
    /// Killed, non-duplicate mutants.
    pub distinct: usize,
    pub quality_sum: f64,
    pub latency_s: f64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub cost: f64,
}

impl AddAssign<&Tally> for Tally {
    fn add_assign(&mut self, o: &Tally) {
        self.requested += o.requested;
        self.proposals += o.proposals;
        self.generable += o.generable;
        self.compiled += o.compiled;
        self.killed += o.killed;
        self.duplicates += o.duplicates;
        self.equivalent += o.equivalent;
        self.distinct += o.distinct;
        self.quality_sum += o.quality_sum;
        self.latency_s += o.latency_s;
        self.prompt_tokens += o.prompt_tokens;
        self.completion_tokens += o.completion_tokens;
        self.cost += o.cost;
    }
}

impl Tally {
    /// Fills the verdict-derived fields from the compiled mutants' matrix.
    pub fn add_verdicts(&mut self, matrix: &VerdictMatrix, tol: f64) {
        let groups = duplication_groups(matrix, tol);
        self.compiled += matrix.len();
        self.killed += groups.iter().map(Vec::len).sum::<usize>();
        self.duplicates += duplicate_count(&groups);
        self.equivalent += equivalence_candidates(matrix).len();
        if let Ok(q) = mutant_quality(matrix, tol) {
            self.distinct += q.distinct.len();
            self.quality_sum += q.distinct.iter().map(|&m| q.per_mutant[m]).sum::<f64>();
        }
    }

    pub fn metrics(&self) -> Metrics {
        let ratio = |n: usize, d: usize| (d > 0).then(|| n as f64 / d as f64);
        Metrics {
            mutant_count: ratio(self.proposals, self.requested),
            generability: ratio(self.generable, self.proposals),
            compilability: ratio(self.compiled, self.generable),
            duplication: ratio(self.duplicates, self.compiled),
            equivalent: ratio(self.equivalent, self.compiled),
            quality: (self.distinct > 0).then(|| self.quality_sum / self.distinct as f64),
            time_s: (self.proposals > 0).then(|| self.latency_s / self.proposals as f64),
            cost: self.cost,
        }
    }
}

/// Rates derived from a [`Tally`]. `None` marks a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// proposals / requested
    pub mutant_count: Option<f64>,
    /// generable / proposals
    pub generability: Option<f64>,
    /// compiled / generable
    pub compilability: Option<f64>,
    /// surplus duplicates / compiled
    pub duplication: Option<f64>,
    /// equivalence candidates / compiled
    pub equivalent: Option<f64>,
    /// mean quality over killed, non-duplicate mutants
    pub quality: Option<f64>,
    /// generation latency per proposal, seconds
    pub time_s: Option<f64>,
    pub cost: f64,
}

impl Metrics {
    pub fn rates(&self) -> [Option<f64>; 6] {
        [self.mutant_count, self.generability, self.compilability, self.duplication, self.equivalent, self.quality]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub llm: String,
    pub strategy: String,
    pub prompt: String,
    pub few_shot: Option<usize>,
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTally {
    pub key: CellKey,
    pub tally: Tally,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub label: String,
    pub tally: Tally,
    pub metrics: Metrics,
}

impl Row {
    fn new(label: String, tally: Tally) -> Self {
        Row { label, metrics: tally.metrics(), tally }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    #[serde(flatten)]
    pub key: CellKey,
    pub tally: Tally,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub quality_metric: String,
    pub denominators: BTreeMap<String, String>,
    pub overall: Row,
    pub cells: Vec<CellRow>,
    pub by_llm: Vec<Row>,
    pub by_strategy: Vec<Row>,
    pub by_temperature: Vec<Row>,
}

fn fmt_temperature(t: Option<f64>) -> String {
    t.map_or_else(|| "-".to_string(), |t| format!("{t}"))
}

pub fn aggregate(cells: &[CellTally]) -> MetricsReport {
    let mut overall = Tally::default();
    let mut by_llm: BTreeMap<String, Tally> = BTreeMap::new();
    let mut by_strategy: BTreeMap<String, Tally> = BTreeMap::new();
    let mut by_temperature: BTreeMap<String, Tally> = BTreeMap::new();
    for c in cells {
        overall += &c.tally;
        *by_llm.entry(c.key.llm.clone()).or_default() += &c.tally;
        *by_strategy.entry(c.key.strategy.clone()).or_default() += &c.tally;
        *by_temperature.entry(fmt_temperature(c.key.temperature)).or_default() += &c.tally;
    }
    let rows = |m: BTreeMap<String, Tally>| m.into_iter().map(|(k, t)| Row::new(k, t)).collect();
    let denominators = [
        ("mutant_count", "proposals / requested"),
        ("generability", "generable / proposals"),
        ("compilability", "compiled / generable"),
        ("duplication", "surplus duplicates / compiled"),
        ("equivalent", "equivalence candidates / compiled"),
        ("quality", "mean over killed non-duplicate mutants"),
        ("time_s", "summed generation latency / proposals"),
        ("cost", "prompt_tokens * price_in + completion_tokens * price_out"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    MetricsReport {
        quality_metric: QUALITY_METRIC.to_string(),
        denominators,
        overall: Row::new("all".into(), overall),
        cells: cells
            .iter()
            .map(|c| CellRow { key: c.key.clone(), tally: c.tally, metrics: c.tally.metrics() })
            .collect(),
        by_llm: rows(by_llm),
        by_strategy: rows(by_strategy),
        by_temperature: rows(by_temperature),
    }
}

pub const CSV_HEADER: [&str; 17] = [
    "llm",
    "strategy",
    "prompt",
    "few_shot",
    "temperature",
    "requested",
    "proposals",
    "generable",
    "compiled",
    "mutant_count",
    "generability",
    "compilability",
    "duplication",
    "equivalent",
    "quality",
    "time_s",
    "cost",
];

fn fmt_rate(x: Option<f64>) -> String {
    x.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl MetricsReport {
    /// One row per cell; undefined rates are left empty.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("write to memory");
        for c in &self.cells {
            let m = &c.metrics;
            let t = &c.tally;
            w.write_record([
                c.key.llm.clone(),
                c.key.strategy.clone(),
                c.key.prompt.clone(),
                c.key.few_shot.map(|k| k.to_string()).unwrap_or_default(),
                c.key.temperature.map(|t| t.to_string()).unwrap_or_default(),
                t.requested.to_string(),
                t.proposals.to_string(),
                t.generable.to_string(),
                t.compiled.to_string(),
                fmt_rate(m.mutant_count),
                fmt_rate(m.generability),
                fmt_rate(m.compilability),
                fmt_rate(m.duplication),
                fmt_rate(m.equivalent),
                fmt_rate(m.quality),
                fmt_rate(m.time_s),
                format!("{:.6}", m.cost),
            ])
            .expect("write to memory");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv output is utf-8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
