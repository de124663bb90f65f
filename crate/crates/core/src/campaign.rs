//! Campaign runner and on-disk mutant store.
//!
//! Store layout under the configured output directory:
//!
//! ```text
//! manifest.json                 test names, tolerance
//! original_traces.json
//! cells/<cell>/log.ndjson       written last; its presence marks the cell done
//! cells/<cell>/mutants/mNNN.chart.json
//! cells/<cell>/mutants/mNNN.report.json
//! cells/<cell>/traces/mNNN.json
//! campaign.ndjson               all cell logs in grid order
//! reports/metrics.{json,csv}
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{aggregate, CellKey, CellTally, MetricsReport, Tally, VerdictMatrix};
use crate::baseline::generate_baseline;
use crate::chart::{parse_chart, serialize_chart, Chart};
use crate::llm::{
    apply_proposal, build_prompt, few_shot_examples, parse_proposals, FewShotExample, LlmClient, LlmEndpointConfig,
    LlmRequest, PromptSpec, Strategy, StrategyKind, Template, Usage,
};
use crate::sim::{check_interface, parse_suite, Program, Suite, Trace, Verdict};
use crate::validate::{validate, Category, ValidationVerdict};

#[derive(Debug, thiserror::Error)]
pub enum CampaignError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}:{line}: {message}")]
    CorruptLog { path: PathBuf, line: usize, message: String },
    #[error("incomplete store: {0}")]
    IncompleteStore(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CampaignError + '_ {
    move |e| CampaignError::Io { path: path.to_path_buf(), message: e.to_string() }
}

fn read(path: &Path) -> Result<String, CampaignError> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// Writes through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CampaignError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub count: usize,
    #[serde(default)]
    pub first_order_only: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_strategies() -> Vec<StrategyKind> {
    vec![StrategyKind::Global, StrategyKind::Local]
}
fn default_few_shot() -> Vec<usize> {
    vec![0, 3, 6, 9]
}
fn default_temperatures() -> Vec<f64> {
    vec![0.2, 0.4, 0.6, 0.7, 0.8, 1.0]
}
fn default_mutants() -> usize {
    25
}
fn default_parallelism() -> usize {
    4
}

/// Campaign configuration. Relative paths resolve against the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub model: PathBuf,
    pub suite: PathBuf,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<StrategyKind>,
    /// 0 selects the zero-shot template, 3/6/9 the few-shot one.
    #[serde(default = "default_few_shot")]
    pub few_shot_counts: Vec<usize>,
    #[serde(default = "default_temperatures")]
    pub temperatures: Vec<f64>,
    #[serde(default = "default_mutants")]
    pub mutants_per_cell: usize,
    /// Mutants asked for per request; defaults to `mutants_per_cell`.
    #[serde(default)]
    pub n_mutants_per_request: Option<usize>,
    #[serde(default)]
    pub llms: Vec<LlmEndpointConfig>,
    #[serde(default)]
    pub baseline: Option<BaselineConfig>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub few_shot_seed: u64,
    pub output: PathBuf,
}

impl CampaignConfig {
    pub fn parse(text: &str) -> Result<Self, CampaignError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: CampaignConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| CampaignError::Config(format!("{}: {}", e.path(), e.inner())))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CampaignError> {
        let mut cfg = Self::parse(&read(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.model, &mut cfg.suite, &mut cfg.output] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        let relative_replays = cfg.llms.iter_mut().filter_map(|l| match &mut l.provider {
            crate::llm::Provider::Replay { fixtures } if fixtures.is_relative() => Some(fixtures),
            _ => None,
        });
        for f in relative_replays {
            *f = base.join(&*f);
        }
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), CampaignError> {
        let bad = |m: String| Err(CampaignError::Config(m));
        if self.mutants_per_cell == 0 || self.batch_size() == 0 {
            return bad("mutants_per_cell and n_mutants_per_request must be at least 1".into());
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1".into());
        }
        if let Some(t) = self.temperatures.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return bad(format!("temperature {t} outside [0, 1]"));
        }
        if let Some(k) = self.few_shot_counts.iter().find(|k| **k != 0 && !crate::llm::FEW_SHOT_COUNTS.contains(k)) {
            return bad(format!("few-shot count {k} is not one of 0, 3, 6, 9"));
        }
        let mut names: Vec<&str> = self.llms.iter().map(|l| l.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) || names.contains(&"baseline") {
            return bad("llm names must be distinct and not `baseline`".into());
        }
        for l in &self.llms {
            l.check().map_err(CampaignError::Config)?;
        }
        if self.llms.is_empty() && self.baseline.is_none() {
            return bad("nothing to run: no llms and no baseline".into());
        }
        Ok(())
    }

    pub fn batch_size(&self) -> usize {
        self.n_mutants_per_request.unwrap_or(self.mutants_per_cell)
    }

    /// The cell grid in run order: LLM × strategy × prompt × temperature, then baseline.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for (li, llm) in self.llms.iter().enumerate() {
            for &kind in &self.strategies {
                for &shots in &self.few_shot_counts {
                    for &t in &self.temperatures {
                        out.push(Cell::Llm {
                            llm: li,
                            template: Template::for_cell(kind, shots),
                            few_shot: shots,
                            temperature: t,
                            llm_name: llm.name.clone(),
                        });
                    }
                }
            }
        }
        if let Some(b) = &self.baseline {
            out.push(Cell::Baseline(b.clone()));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Llm { llm: usize, llm_name: String, template: Template, few_shot: usize, temperature: f64 },
    Baseline(BaselineConfig),
}

impl Cell {
    pub fn key(&self) -> CellKey {
        match self {
            Cell::Llm { llm_name, template, few_shot, temperature, .. } => CellKey {
                llm: llm_name.clone(),
                strategy: match template.strategy_kind() {
                    StrategyKind::Global => "global".into(),
                    StrategyKind::Local => "local".into(),
                },
                prompt: template.as_str().into(),
                few_shot: Some(*few_shot),
                temperature: Some(*temperature),
            },
            Cell::Baseline(_) => CellKey {
                llm: "baseline".into(),
                strategy: "baseline".into(),
                prompt: "-".into(),
                few_shot: None,
                temperature: None,
            },
        }
    }

    /// Directory name under `cells/`.
    pub fn dir_name(&self) -> String {
        match self {
            Cell::Llm { llm_name, template, few_shot, temperature, .. } => {
                let safe: String = llm_name
                    .chars()
                    .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
                    .collect();
                format!("{safe}__{}-k{few_shot}__t{temperature}", template.as_str())
            }
            Cell::Baseline(_) => "baseline".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutantStatus {
    /// The response held fewer proposals than requested.
    Missing,
    ParseFailure,
    NonGenerable,
    NonCompilable,
    Compiled,
}

impl MutantStatus {
    pub fn is_proposal(self) -> bool {
        self != MutantStatus::Missing
    }
    pub fn is_generable(self) -> bool {
        matches!(self, MutantStatus::NonCompilable | MutantStatus::Compiled)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogRecord {
    Cell {
        cell: String,
        key: CellKey,
        requested: usize,
    },
    Request {
        cell: String,
        request: usize,
        prompt_sha256: Option<String>,
        selected: Option<String>,
        n_mutants: usize,
        usage: Usage,
        latency_s: f64,
        retries: u32,
        cost: f64,
        proposals: usize,
        parse_failures: usize,
        error: Option<String>,
    },
    Mutant {
        cell: String,
        id: String,
        request: usize,
        status: MutantStatus,
        #[serde(default)]
        categories: Vec<Category>,
        #[serde(default)]
        errors: Vec<String>,
        #[serde(default)]
        verdicts: Option<Vec<Verdict>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tests: Vec<String>,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub cells_run: usize,
    pub cells_skipped: usize,
    pub requests_issued: usize,
    pub failed_cells: Vec<String>,
}

/// Shared, read-only campaign inputs.
struct Context<'a> {
    cfg: &'a CampaignConfig,
    chart: Chart,
    suite: Suite,
    original: Vec<Trace>,
    clients: Vec<Box<dyn LlmClient>>,
    examples: Vec<Vec<FewShotExample>>,
    elements: Vec<String>,
    root: &'a Path,
}

/// Runs every cell not already complete, then writes the combined log and
/// the metrics report. `clients[i]` serves `cfg.llms[i]`.
pub fn run_campaign(cfg: &CampaignConfig, clients: Vec<Box<dyn LlmClient>>) -> Result<RunSummary, CampaignError> {
    cfg.check()?;
    assert_eq!(clients.len(), cfg.llms.len(), "one client per configured llm");
    let chart =
        parse_chart(&read(&cfg.model)?).map_err(|e| CampaignError::Config(format!("{}: {e}", cfg.model.display())))?;
    let suite = parse_suite(&read(&cfg.suite)?, &chart)
        .map_err(|e| CampaignError::Config(format!("{}: {e}", cfg.suite.display())))?;
    let program = Program::new(&chart).map_err(|e| CampaignError::Config(e.to_string()))?;
    let original: Vec<Trace> = suite.tests.iter().map(|t| program.run(t)).collect();
    if let Some((t, tr)) = suite.tests.iter().zip(&original).find(|(_, tr)| tr.runtime_error.is_some()) {
        return Err(CampaignError::Config(format!("original chart fails test {}: {:?}", t.name, tr.runtime_error)));
    }

    let root = cfg.output.as_path();
    let manifest = Manifest { tests: suite.tests.iter().map(|t| t.name.clone()).collect(), tolerance: suite.tolerance };
    write_atomic(&root.join("manifest.json"), &json_bytes(&manifest))?;
    write_atomic(&root.join("original_traces.json"), &json_bytes(&original))?;

    let max_shots = cfg.few_shot_counts.iter().copied().max().unwrap_or(0);
    let pool_examples = few_shot_examples(&chart, max_shots, cfg.few_shot_seed);
    let examples = (0..=max_shots).map(|k| pool_examples.iter().take(k).cloned().collect()).collect();
    let elements =
        chart.states.iter().map(|s| s.id.clone()).chain(chart.transitions.iter().map(|t| t.id.clone())).collect();
    let ctx = Context { cfg, chart, suite, original, clients, examples, elements, root };

    let cells = cfg.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| CampaignError::Config(e.to_string()))?;
    let outcomes: Vec<(String, Result<Option<usize>, CampaignError>)> =
        pool.install(|| cells.par_iter().map(|c| (c.dir_name(), run_cell_if_needed(&ctx, c))).collect());

    let mut summary = RunSummary::default();
    for (name, outcome) in outcomes {
        match outcome {
            Ok(Some(requests)) => {
                summary.cells_run += 1;
                summary.requests_issued += requests;
            }
            Ok(None) => summary.cells_skipped += 1,
            Err(e @ CampaignError::Io { .. }) => return Err(e),
            Err(e) => {
                log::error!("cell {name}: {e}");
                summary.failed_cells.push(name);
            }
        }
    }

    let mut combined = String::new();
    for c in &cells {
        let path = cell_dir(root, c).join("log.ndjson");
        if path.exists() {
            combined.push_str(&read(&path)?);
        }
    }
    write_atomic(&root.join("campaign.ndjson"), combined.as_bytes())?;
    if summary.failed_cells.is_empty() {
        let report = report(root)?;
        write_report(&report, &root.join("reports"))?;
    }
    Ok(summary)
}

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    serde_json::to_vec_pretty(v).expect("store value serializes")
}

fn cell_dir(root: &Path, c: &Cell) -> PathBuf {
    root.join("cells").join(c.dir_name())
}

/// `Some(requests issued)` after running, `None` if the cell was already done.
fn run_cell_if_needed(ctx: &Context, cell: &Cell) -> Result<Option<usize>, CampaignError> {
    let dir = cell_dir(ctx.root, cell);
    if dir.join("log.ndjson").exists() {
        log::info!("cell {} already complete", cell.dir_name());
        return Ok(None);
    }
    let (records, requests) = match cell {
        Cell::Llm { .. } => run_llm_cell(ctx, cell, &dir)?,
        Cell::Baseline(b) => (run_baseline_cell(ctx, b, &dir)?, 0),
    };
    let mut text = String::new();
    for r in &records {
        text.push_str(&serde_json::to_string(r).expect("log record serializes"));
        text.push('\n');
    }
    write_atomic(&dir.join("log.ndjson"), text.as_bytes())?;
    Ok(Some(requests))
}

fn cell_seed(name: &str) -> u64 {
    let d = Sha256::digest(name.as_bytes());
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

fn run_llm_cell(ctx: &Context, cell: &Cell, dir: &Path) -> Result<(Vec<LogRecord>, usize), CampaignError> {
    let Cell::Llm { llm, template, few_shot, temperature, .. } = cell else { unreachable!() };
    let endpoint = &ctx.cfg.llms[*llm];
    let client = &ctx.clients[*llm];
    let name = cell.dir_name();
    let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(&name));
    let requested = ctx.cfg.mutants_per_cell;
    let batch = ctx.cfg.batch_size();
    let mut records = vec![LogRecord::Cell { cell: name.clone(), key: cell.key(), requested }];
    let mut slot = 0;
    let mut request = 0;
    while slot < requested {
        let n = batch.min(requested - slot);
        let strategy = match template.strategy_kind() {
            StrategyKind::Global => Strategy::Global,
            StrategyKind::Local => Strategy::Local(ctx.elements.choose(&mut rng).expect("chart has states").clone()),
        };
        let spec = PromptSpec {
            template: *template,
            few_shot_count: *few_shot,
            strategy: strategy.clone(),
            n_mutants: n,
            model_name: endpoint.model.clone(),
            temperature: *temperature,
        };
        let prompt = build_prompt(&ctx.chart, &spec, &ctx.examples[*few_shot])
            .map_err(|e| CampaignError::Config(e.to_string()))?;
        let req = LlmRequest {
            prompt: prompt.clone(),
            model: endpoint.model.clone(),
            temperature: *temperature,
            n_mutants: n,
            chart: Some(ctx.chart.clone()),
            strategy: strategy.clone(),
        };
        let mut statuses: Vec<Slot> = Vec::with_capacity(n);
        let request_record = match client.complete(&req) {
            Ok(resp) => {
                let parsed = parse_proposals(&resp.text, n);
                for p in parsed.proposals.iter().take(n) {
                    statuses.push(match apply_proposal(&ctx.chart, p, &strategy) {
                        Ok(applied) => {
                            let status = match applied.report.verdict {
                                ValidationVerdict::Compilable => MutantStatus::Compiled,
                                _ => MutantStatus::NonCompilable,
                            };
                            Slot::new(status, Some(applied.chart), &applied.report)
                        }
                        Err(report) => Slot::new(MutantStatus::NonGenerable, None, &report),
                    });
                }
                let room = n - statuses.len();
                for _ in 0..parsed.failures.min(room) {
                    statuses.push(Slot::empty(MutantStatus::ParseFailure));
                }
                LogRecord::Request {
                    cell: name.clone(),
                    request,
                    prompt_sha256: Some(crate::llm::prompt_hash(&prompt)),
                    selected: strategy.selected().map(String::from),
                    n_mutants: n,
                    usage: resp.usage,
                    latency_s: resp.latency_s,
                    retries: resp.retries,
                    cost: endpoint.cost(resp.usage),
                    proposals: parsed.proposals.len(),
                    parse_failures: parsed.failures,
                    error: None,
                }
            }
            Err(e) => {
                log::warn!("cell {name} request {request}: {e}");
                LogRecord::Request {
                    cell: name.clone(),
                    request,
                    prompt_sha256: Some(crate::llm::prompt_hash(&prompt)),
                    selected: strategy.selected().map(String::from),
                    n_mutants: n,
                    usage: Usage::default(),
                    latency_s: 0.0,
                    retries: 0,
                    cost: 0.0,
                    proposals: 0,
                    parse_failures: 0,
                    error: Some(e.to_string()),
                }
            }
        };
        records.push(request_record);
        while statuses.len() < n {
            statuses.push(Slot::empty(MutantStatus::Missing));
        }
        let mutants: Vec<_> = statuses.into_iter().enumerate().map(|(i, s)| (slot + i, s)).collect();
        records.extend(materialize(ctx, &name, dir, request, mutants)?);
        slot += n;
        request += 1;
    }
    Ok((records, request))
}

/// Outcome of one requested mutant before simulation.
struct Slot {
    status: MutantStatus,
    chart: Option<Chart>,
    categories: Vec<Category>,
    errors: Vec<String>,
}

impl Slot {
    fn new(status: MutantStatus, chart: Option<Chart>, report: &crate::validate::ValidationReport) -> Self {
        Slot {
            status,
            chart,
            categories: report.categories().into_iter().collect(),
            errors: report.errors.iter().map(|e| e.to_string()).collect(),
        }
    }

    fn empty(status: MutantStatus) -> Self {
        Slot { status, chart: None, categories: vec![], errors: vec![] }
    }
}

/// Stores generable charts, simulates compiled ones and emits mutant records.
fn materialize(
    ctx: &Context,
    cell: &str,
    dir: &Path,
    request: usize,
    slots: Vec<(usize, Slot)>,
) -> Result<Vec<LogRecord>, CampaignError> {
    slots
        .into_par_iter()
        .map(|(slot, Slot { mut status, chart, categories, mut errors })| {
            let stem = format!("m{slot:03}");
            let mut verdicts = None;
            if let Some(chart) = &chart {
                let mdir = dir.join("mutants");
                write_atomic(&mdir.join(format!("{stem}.chart.json")), serialize_chart(chart).as_bytes())?;
                let report = validate(chart);
                write_atomic(&mdir.join(format!("{stem}.report.json")), &json_bytes(&report))?;
                if status == MutantStatus::Compiled {
                    match simulate_mutant(ctx, chart) {
                        Ok((traces, v)) => {
                            write_atomic(&dir.join("traces").join(format!("{stem}.json")), &json_bytes(&traces))?;
                            verdicts = Some(v);
                        }
                        Err(e) => {
                            status = MutantStatus::NonCompilable;
                            errors.push(e);
                        }
                    }
                }
            }
            Ok(LogRecord::Mutant {
                cell: cell.to_string(),
                id: format!("{cell}/{stem}"),
                request,
                status,
                categories,
                errors,
                verdicts,
            })
        })
        .collect()
}

fn simulate_mutant(ctx: &Context, mutant: &Chart) -> Result<(Vec<Trace>, Vec<Verdict>), String> {
    check_interface(&ctx.chart, mutant).map_err(|e| e.to_string())?;
    let program = Program::new(mutant).map_err(|e| e.to_string())?;
    let traces: Vec<Trace> = ctx.suite.tests.iter().map(|t| program.run(t)).collect();
    let verdicts =
        ctx.original.iter().zip(&traces).map(|(o, m)| crate::sim::compare(o, m, ctx.suite.tolerance)).collect();
    Ok((traces, verdicts))
}

fn run_baseline_cell(ctx: &Context, b: &BaselineConfig, dir: &Path) -> Result<Vec<LogRecord>, CampaignError> {
    let name = "baseline".to_string();
    let mut records =
        vec![LogRecord::Cell { cell: name.clone(), key: Cell::Baseline(b.clone()).key(), requested: b.count }];
    let start = Instant::now();
    let mut slots = Vec::with_capacity(b.count);
    for i in 0..b.count {
        let seed = b.seed.wrapping_add(i as u64);
        let slot = match generate_baseline(&ctx.chart, seed, b.first_order_only) {
            Ok((m, _)) => {
                let report = validate(&m);
                let status = match report.verdict {
                    ValidationVerdict::Compilable => MutantStatus::Compiled,
                    ValidationVerdict::NonCompilable => MutantStatus::NonCompilable,
                    ValidationVerdict::NonGenerable => MutantStatus::NonGenerable,
                };
                Slot::new(status, status.is_generable().then_some(m), &report)
            }
            Err(e) => Slot { errors: vec![e.to_string()], ..Slot::empty(MutantStatus::Missing) },
        };
        slots.push((i, slot));
    }
    let proposals = slots.iter().filter(|(_, s)| s.status.is_proposal()).count();
    records.push(LogRecord::Request {
        cell: name.clone(),
        request: 0,
        prompt_sha256: None,
        selected: None,
        n_mutants: b.count,
        usage: Usage::default(),
        latency_s: start.elapsed().as_secs_f64(),
        retries: 0,
        cost: 0.0,
        proposals,
        parse_failures: 0,
        error: None,
    });
    records.extend(materialize(ctx, &name, dir, 0, slots)?);
    Ok(records)
}

/// Reads `campaign.ndjson`, reporting the first malformed line.
pub fn read_log(path: &Path) -> Result<Vec<LogRecord>, CampaignError> {
    let text = read(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CampaignError::CorruptLog {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Recomputes all metrics from a store without touching it.
pub fn report(store: &Path) -> Result<MetricsReport, CampaignError> {
    let log_path = store.join("campaign.ndjson");
    if !log_path.exists() {
        return Err(CampaignError::IncompleteStore(format!("{} not found", log_path.display())));
    }
    let records = read_log(&log_path)?;
    let manifest: Manifest = serde_json::from_str(&read(&store.join("manifest.json"))?)
        .map_err(|e| CampaignError::IncompleteStore(format!("manifest.json: {e}")))?;
    let original: Vec<Trace> = serde_json::from_str(&read(&store.join("original_traces.json"))?)
        .map_err(|e| CampaignError::IncompleteStore(format!("original_traces.json: {e}")))?;

    struct Acc {
        cell: String,
        key: CellKey,
        tally: Tally,
        compiled: Vec<(String, Vec<Trace>)>,
    }
    let mut cells: Vec<Acc> = Vec::new();
    let find = |cells: &mut Vec<Acc>, cell: &str| -> Result<usize, CampaignError> {
        cells
            .iter()
            .position(|a| a.cell == cell)
            .ok_or_else(|| CampaignError::IncompleteStore(format!("record for unknown cell {cell}")))
    };
    for r in records {
        match r {
            LogRecord::Cell { cell, key, requested } => {
                cells.push(Acc { cell, key, tally: Tally { requested, ..Tally::default() }, compiled: vec![] })
            }
            LogRecord::Request { cell, usage, latency_s, cost, .. } => {
                let i = find(&mut cells, &cell)?;
                let t = &mut cells[i].tally;
                t.latency_s += latency_s;
                t.prompt_tokens += usage.prompt_tokens;
                t.completion_tokens += usage.completion_tokens;
                t.cost += cost;
            }
            LogRecord::Mutant { cell, id, status, .. } => {
                let i = find(&mut cells, &cell)?;
                let acc = &mut cells[i];
                acc.tally.proposals += status.is_proposal() as usize;
                acc.tally.generable += status.is_generable() as usize;
                if status == MutantStatus::Compiled {
                    let stem = id.rsplit('/').next().unwrap_or(&id);
                    let path = store.join("cells").join(&cell).join("traces").join(format!("{stem}.json"));
                    let text = fs::read_to_string(&path)
                        .map_err(|_| CampaignError::IncompleteStore(format!("missing traces for {id}")))?;
                    let traces: Vec<Trace> = serde_json::from_str(&text)
                        .map_err(|e| CampaignError::IncompleteStore(format!("{}: {e}", path.display())))?;
                    acc.compiled.push((id, traces));
                }
            }
        }
    }
    let tallies = cells
        .into_iter()
        .map(|mut a| {
            let m = VerdictMatrix::from_traces(manifest.tests.clone(), &original, a.compiled, manifest.tolerance)
                .map_err(|e| CampaignError::IncompleteStore(format!("cell {}: {e}", a.cell)))?;
            a.tally.add_verdicts(&m, manifest.tolerance);
            Ok(CellTally { key: a.key, tally: a.tally })
        })
        .collect::<Result<Vec<_>, CampaignError>>()?;
    Ok(aggregate(&tallies))
}

pub fn write_report(report: &MetricsReport, dir: &Path) -> Result<(), CampaignError> {
    write_atomic(&dir.join("metrics.json"), report.to_json().as_bytes())?;
    write_atomic(&dir.join("metrics.csv"), report.to_csv().as_bytes())
}
