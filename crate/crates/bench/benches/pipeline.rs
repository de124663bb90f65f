use std::hint::black_box;

use chartmut_core::baseline::generate_baseline;
use chartmut_core::llm::{parse_proposals, LlmClient, LlmRequest, Strategy, SyntheticClient};
use chartmut_core::sim::{simulate_suite, verdicts};
use chartmut_core::{corpus, parse_chart, serialize_chart, validate};
use criterion::{criterion_group, criterion_main, Criterion};

fn chart_io(c: &mut Criterion) {
    let text = serialize_chart(&corpus::pacemaker().chart);
    c.bench_function("parse_chart/pacemaker", |b| b.iter(|| parse_chart(black_box(&text)).unwrap()));
    let chart = corpus::pacemaker().chart;
    c.bench_function("validate/pacemaker", |b| b.iter(|| validate(black_box(&chart))));
}

fn simulation(c: &mut Criterion) {
    for m in corpus::all() {
        c.bench_function(&format!("simulate_suite/{}", m.name), |b| {
            b.iter(|| simulate_suite(&m.chart, &m.suite).unwrap())
        });
    }
    let m = corpus::elevator();
    let (mutant, _) = generate_baseline(&m.chart, 5, false).unwrap();
    c.bench_function("verdicts/elevator", |b| {
        b.iter(|| verdicts(&m.chart, &mutant, &m.suite, m.suite.tolerance).unwrap())
    });
}

fn generation(c: &mut Criterion) {
    let chart = corpus::pacemaker().chart;
    let mut seed = 0;
    c.bench_function("baseline/pacemaker", |b| {
        b.iter(|| {
            seed += 1;
            generate_baseline(&chart, seed, false).unwrap()
        })
    });
    let client = SyntheticClient { defect_rate: 0.2, seed: 0 };
    let req = LlmRequest {
        prompt: "bench".into(),
        model: "synthetic".into(),
        temperature: 0.7,
        n_mutants: 25,
        chart: Some(chart.clone()),
        strategy: Strategy::Global,
    };
    let text = client.complete(&req).unwrap().text;
    c.bench_function("synthetic_llm/25", |b| b.iter(|| client.complete(&req).unwrap()));
    c.bench_function("parse_proposals/25", |b| b.iter(|| parse_proposals(black_box(&text), 25)));
}

criterion_group!(benches, chart_io, simulation, generation);
criterion_main!(benches);
