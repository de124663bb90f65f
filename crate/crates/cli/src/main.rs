use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context as _};
use chartmut_core::analysis::{cochran_sample_size, MetricsReport};
use chartmut_core::baseline::generate_baseline;
use chartmut_core::campaign::{self, CampaignConfig, CampaignError};
use chartmut_core::chart::parse_chart_unchecked;
use chartmut_core::llm::{
    apply_proposal, build_prompt, few_shot_examples, parse_proposals, LlmClient, LlmEndpointConfig, LlmRequest,
    PromptSpec, RecordingClient, Strategy, StrategyKind, Template,
};
use chartmut_core::sim::{coverage, parse_suite, Program};
use chartmut_core::{parse_chart, serialize_chart, validate, Chart, Suite, ValidationVerdict};
use clap::{Parser, Subcommand};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "chartmut", version, about = "Mutation analysis for Stateflow-style statecharts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a chart; exits 1 unless it is generable and compilable.
    Validate {
        chart: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run a suite and print each test's final outputs.
    Simulate {
        chart: PathBuf,
        suite: PathBuf,
        /// Write one `<test>.json` trace per test here.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Decision and execution coverage of a suite.
    Coverage { chart: PathBuf, suite: PathBuf },
    /// Generate rule-based mutants with seeds S, S+1, ...
    MutateBaseline {
        chart: PathBuf,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Stop after one mutation.
        #[arg(long)]
        first_order: bool,
        /// Directory for mutant charts; defaults to stdout summaries only.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ask an LLM endpoint for one batch of mutants.
    MutateLlm {
        chart: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a campaign; completed cells are skipped.
    Campaign {
        config: PathBuf,
        /// Save every LLM response as a replay fixture in this directory.
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// Recompute metrics from a campaign store.
    Report {
        store: PathBuf,
        /// Output directory; defaults to `<store>/reports`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cochran sample size for manual inspection.
    SampleSize {
        #[arg(long, default_value_t = 0.95)]
        confidence: f64,
        #[arg(long, default_value_t = 0.05)]
        margin: f64,
        #[arg(long)]
        proportion: f64,
    },
}

/// Failure with its exit status.
enum Failure {
    Domain(anyhow::Error),
    Usage(anyhow::Error),
}

type CmdResult = Result<(), Failure>;

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn domain(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Domain(e.into())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).map_err(usage)
}

fn write(path: &Path, text: &str) -> CmdResult {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display())).map_err(usage)?;
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display())).map_err(usage)
}

fn load_chart(path: &Path) -> Result<Chart, Failure> {
    parse_chart(&read(path)?).with_context(|| format!("{}", path.display())).map_err(domain)
}

fn load_suite(path: &Path, chart: &Chart) -> Result<Suite, Failure> {
    parse_suite(&read(path)?, chart).with_context(|| format!("{}", path.display())).map_err(domain)
}

fn cmd_validate(path: &Path, json: bool) -> CmdResult {
    let chart = parse_chart_unchecked(&read(path)?).map_err(domain)?;
    let report = validate(&chart);
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        println!(
            "{}: {}",
            path.display(),
            serde_json::to_value(report.verdict).expect("verdict").as_str().unwrap_or("")
        );
        for e in &report.errors {
            println!("  {e}");
        }
    }
    match report.verdict {
        ValidationVerdict::Compilable => Ok(()),
        _ => Err(domain(anyhow!("{} error(s)", report.errors.len()))),
    }
}

fn cmd_simulate(chart: &Path, suite: &Path, trace_out: Option<&Path>) -> CmdResult {
    let chart = load_chart(chart)?;
    let suite = load_suite(suite, &chart)?;
    let program = Program::new(&chart).map_err(domain)?;
    let mut failed = 0;
    for t in &suite.tests {
        let tr = program.run(t);
        let last: Vec<String> =
            tr.outputs.iter().map(|(k, v)| format!("{k}={}", v.last().map_or("-".into(), |x| x.to_string()))).collect();
        let state = tr.active_state.last().map_or("-", String::as_str);
        match &tr.runtime_error {
            None => println!("{}: {} steps, state {state}, {}", t.name, tr.len(), last.join(" ")),
            Some(e) => {
                failed += 1;
                println!("{}: runtime error at step {} in {}: {}", t.name, e.step, e.element_id, e.message);
            }
        }
        if let Some(dir) = trace_out {
            write(
                &dir.join(format!("{}.json", t.name)),
                &serde_json::to_string_pretty(&tr).expect("trace serializes"),
            )?;
        }
    }
    if failed > 0 {
        return Err(domain(anyhow!("{failed} test(s) hit a runtime error")));
    }
    Ok(())
}

fn cmd_coverage(chart: &Path, suite: &Path) -> CmdResult {
    let chart = load_chart(chart)?;
    let suite = load_suite(suite, &chart)?;
    let c = coverage(&chart, &suite).map_err(domain)?;
    println!("decision coverage:  {:.1}% ({}/{})", 100.0 * c.decision_coverage, c.decisions_covered, c.decisions_total);
    println!("execution coverage: {:.1}% ({}/{})", 100.0 * c.execution_coverage, c.executed, c.executable);
    for u in &c.uncovered {
        println!("  uncovered: {u}");
    }
    Ok(())
}

fn cmd_mutate_baseline(chart_path: &Path, count: usize, seed: u64, first_order: bool, out: Option<&Path>) -> CmdResult {
    let chart = load_chart(chart_path)?;
    let stem = chart_path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("chart")
        .trim_end_matches(".json")
        .trim_end_matches(".chart");
    for i in 0..count {
        let s = seed.wrapping_add(i as u64);
        let (mutant, records) = generate_baseline(&chart, s, first_order).map_err(domain)?;
        let ops: Vec<String> = records
            .iter()
            .map(|r| format!("{} {} {}: {} -> {}", r.operator_id, r.kind, r.element_id, r.before, r.after))
            .collect();
        println!("seed {s}: {}", ops.join("; "));
        if let Some(dir) = out {
            write(&dir.join(format!("{stem}.seed{s}.chart.json")), &serialize_chart(&mutant))?;
            write(
                &dir.join(format!("{stem}.seed{s}.mutations.json")),
                &serde_json::to_string_pretty(&records).expect("records serialize"),
            )?;
        }
    }
    Ok(())
}

fn default_n() -> usize {
    5
}

/// Settings for a single `mutate-llm` request.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MutateLlmConfig {
    endpoint: LlmEndpointConfig,
    strategy: StrategyKind,
    /// Required for the local strategy.
    #[serde(default)]
    element: Option<String>,
    #[serde(default)]
    few_shot: usize,
    #[serde(default = "default_n")]
    n_mutants: usize,
    #[serde(default)]
    few_shot_seed: u64,
    /// Save the response as a replay fixture here.
    #[serde(default)]
    record: Option<PathBuf>,
}

fn cmd_mutate_llm(chart_path: &Path, config: &Path, out: Option<&Path>) -> CmdResult {
    let chart = load_chart(chart_path)?;
    let cfg: MutateLlmConfig =
        serde_json::from_str(&read(config)?).with_context(|| format!("{}", config.display())).map_err(usage)?;
    cfg.endpoint.check().map_err(|e| usage(anyhow!(e)))?;
    let strategy = match (cfg.strategy, cfg.element) {
        (StrategyKind::Global, _) => Strategy::Global,
        (StrategyKind::Local, Some(id)) => Strategy::Local(id),
        (StrategyKind::Local, None) => return Err(usage(anyhow!("the local strategy needs `element`"))),
    };
    let temperature = cfg.endpoint.temperature.unwrap_or(0.7);
    let spec = PromptSpec {
        template: Template::for_cell(strategy.kind(), cfg.few_shot),
        few_shot_count: cfg.few_shot,
        strategy: strategy.clone(),
        n_mutants: cfg.n_mutants,
        model_name: cfg.endpoint.model.clone(),
        temperature,
    };
    let examples = few_shot_examples(&chart, cfg.few_shot, cfg.few_shot_seed);
    let prompt = build_prompt(&chart, &spec, &examples).map_err(usage)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let mut client = cfg.endpoint.client(base);
    if let Some(dir) = cfg.record {
        client = Box::new(RecordingClient { inner: client, dir: base.join(dir) });
    }
    let req = LlmRequest {
        prompt,
        model: cfg.endpoint.model.clone(),
        temperature,
        n_mutants: cfg.n_mutants,
        chart: Some(chart.clone()),
        strategy: strategy.clone(),
    };
    let resp = client.complete(&req).map_err(domain)?;
    let parsed = parse_proposals(&resp.text, cfg.n_mutants);
    println!(
        "{} proposals, {} parse failures; {} prompt + {} completion tokens, {:.2}s, cost {:.6}",
        parsed.proposals.len(),
        parsed.failures,
        resp.usage.prompt_tokens,
        resp.usage.completion_tokens,
        resp.latency_s,
        cfg.endpoint.cost(resp.usage)
    );
    for (i, p) in parsed.proposals.iter().enumerate() {
        let (verdict, report, mutant) = match apply_proposal(&chart, p, &strategy) {
            Ok(a) => (a.report.verdict, a.report, Some(a.chart)),
            Err(r) => (r.verdict, r, None),
        };
        println!("m{i:03}: {}", serde_json::to_value(verdict).expect("verdict").as_str().unwrap_or(""));
        for e in &report.errors {
            println!("  {e}");
        }
        if let (Some(dir), Some(m)) = (out, mutant) {
            write(&dir.join(format!("m{i:03}.chart.json")), &serialize_chart(&m))?;
        }
    }
    Ok(())
}

fn campaign_failure(e: CampaignError) -> Failure {
    match e {
        CampaignError::Io { .. } | CampaignError::Config(_) => usage(e),
        CampaignError::CorruptLog { .. } | CampaignError::IncompleteStore(_) => domain(e),
    }
}

fn cmd_campaign(config: &Path, record: Option<&Path>) -> CmdResult {
    let cfg = CampaignConfig::load(config).map_err(campaign_failure)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let clients: Vec<Box<dyn LlmClient>> = cfg
        .llms
        .iter()
        .map(|l| {
            let c = l.client(base);
            match record {
                Some(dir) => Box::new(RecordingClient { inner: c, dir: dir.to_path_buf() }) as Box<dyn LlmClient>,
                None => c,
            }
        })
        .collect();
    let s = campaign::run_campaign(&cfg, clients).map_err(campaign_failure)?;
    println!(
        "{} cells run, {} already complete, {} LLM requests; store {}",
        s.cells_run,
        s.cells_skipped,
        s.requests_issued,
        cfg.output.display()
    );
    for c in &s.failed_cells {
        eprintln!("cell {c} failed; rerun to retry it");
    }
    if s.failed_cells.is_empty() {
        let report = campaign::report(&cfg.output).map_err(campaign_failure)?;
        print_summary(&report);
    }
    Ok(())
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |x| format!("{x:.3}"))
}

fn print_summary(r: &MetricsReport) {
    println!(
        "{:<14} {:>6} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>8} {:>10}",
        "llm", "count", "gen", "comp", "dup", "equiv", "quality", "time_s", "cost", "mutants"
    );
    for row in r.by_llm.iter().chain(std::iter::once(&r.overall)) {
        let m = &row.metrics;
        println!(
            "{:<14} {:>6} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>8.4} {:>10}",
            row.label,
            fmt_opt(m.mutant_count),
            fmt_opt(m.generability),
            fmt_opt(m.compilability),
            fmt_opt(m.duplication),
            fmt_opt(m.equivalent),
            fmt_opt(m.quality),
            fmt_opt(m.time_s),
            m.cost,
            row.tally.compiled
        );
    }
    println!("quality metric {}; duplication and equivalent are over compiled mutants", r.quality_metric);
}

fn cmd_report(store: &Path, out: Option<&Path>) -> CmdResult {
    if !store.is_dir() {
        return Err(usage(anyhow!("{} is not a directory", store.display())));
    }
    let report = campaign::report(store).map_err(campaign_failure)?;
    let dir = out.map_or_else(|| store.join("reports"), Path::to_path_buf);
    campaign::write_report(&report, &dir).map_err(campaign_failure)?;
    print_summary(&report);
    println!("wrote {}", dir.join("metrics.csv").display());
    Ok(())
}

fn cmd_sample_size(confidence: f64, margin: f64, proportion: f64) -> CmdResult {
    let n = cochran_sample_size(confidence, margin, proportion).map_err(domain)?;
    println!("{n}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { chart, json } => cmd_validate(chart, *json),
        Command::Simulate { chart, suite, trace_out } => cmd_simulate(chart, suite, trace_out.as_deref()),
        Command::Coverage { chart, suite } => cmd_coverage(chart, suite),
        Command::MutateBaseline { chart, count, seed, first_order, out } => {
            cmd_mutate_baseline(chart, *count, *seed, *first_order, out.as_deref())
        }
        Command::MutateLlm { chart, config, out } => cmd_mutate_llm(chart, config, out.as_deref()),
        Command::Campaign { config, record } => cmd_campaign(config, record.as_deref()),
        Command::Report { store, out } => cmd_report(store, out.as_deref()),
        Command::SampleSize { confidence, margin, proportion } => cmd_sample_size(*confidence, *margin, *proportion),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
