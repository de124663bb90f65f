use std::collections::BTreeMap;

use chartmut_core::analysis::{duplication_groups, equivalence_candidates, mutant_quality, VerdictMatrix};
use chartmut_core::baseline::{generate_baseline, rng};
use chartmut_core::expr::Value;
use chartmut_core::gen::{random_chart, random_suite, GenOptions};
use chartmut_core::sim::simulate_suite;
use chartmut_core::{parse_chart, serialize_chart, validate, Trace, ValidationVerdict};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn chart_round_trip(seed in any::<u64>()) {
        let c = random_chart(&mut rng(seed), &GenOptions::default());
        let text = serialize_chart(&c);
        prop_assert_eq!(parse_chart(&text).unwrap(), c);
    }

    #[test]
    fn baseline_mutants_of_random_charts_validate(seed in any::<u64>(), mseed in any::<u64>()) {
        let c = random_chart(&mut rng(seed), &GenOptions::default());
        if let Ok((m, records)) = generate_baseline(&c, mseed, false) {
            prop_assert!(!records.is_empty());
            let r = validate(&m);
            prop_assert_eq!(r.verdict, ValidationVerdict::Compilable, "{:?} {:?}", records, r.errors);
        }
    }

    #[test]
    fn simulation_is_deterministic(seed in any::<u64>()) {
        let mut r = rng(seed);
        let c = random_chart(&mut r, &GenOptions::default());
        let suite = random_suite(&c, &mut r, 3, 20);
        prop_assert_eq!(simulate_suite(&c, &suite).unwrap(), simulate_suite(&c, &suite).unwrap());
    }
}

fn trace(v: u8) -> Trace {
    Trace {
        outputs: BTreeMap::from([("Y".to_string(), vec![Value::Num(v as f64)])]),
        active_state: vec!["S".into()],
        runtime_error: None,
    }
}

/// Killing cells carry output value 1..=3; alive cells carry 0.
fn matrix_strategy() -> impl Strategy<Value = VerdictMatrix> {
    (1usize..=6, 1usize..=4).prop_flat_map(|(m, t)| {
        prop::collection::vec(prop::collection::vec(0u8..=3, t), m).prop_map(move |cells| {
            let killed = cells.iter().map(|r| r.iter().map(|&v| v > 0).collect()).collect();
            let traces = cells.iter().map(|r| r.iter().map(|&v| trace(v)).collect()).collect();
            VerdictMatrix::new(
                (0..m).map(|i| format!("m{i}")).collect(),
                (0..t).map(|i| format!("t{i}")).collect(),
                killed,
                traces,
            )
            .unwrap()
        })
    })
}

/// Pairwise reference: same group iff same kill vector and equal traces.
fn oracle_groups(m: &VerdictMatrix) -> Vec<Vec<usize>> {
    let n = m.len();
    let same = |a: usize, b: usize| m.killed[a] == m.killed[b] && m.traces[a] == m.traces[b];
    let mut seen = vec![false; n];
    let mut groups = vec![];
    for a in 0..n {
        if seen[a] || !m.killed[a].contains(&true) {
            continue;
        }
        let g: Vec<usize> = (a..n).filter(|&b| same(a, b)).collect();
        g.iter().for_each(|&b| seen[b] = true);
        groups.push(g);
    }
    groups
}

proptest! {
    #[test]
    fn duplication_matches_oracle_and_partitions(m in matrix_strategy()) {
        let groups = duplication_groups(&m, 1e-9);
        prop_assert_eq!(&groups, &oracle_groups(&m));
        let killed = (0..m.len()).filter(|&i| m.is_killed(i)).count();
        prop_assert_eq!(groups.iter().map(Vec::len).sum::<usize>(), killed);
        prop_assert_eq!(equivalence_candidates(&m).len(), m.len() - killed);
    }

    #[test]
    fn quality_bounds_and_duplicate_invariance(m in matrix_strategy()) {
        let Ok(q) = mutant_quality(&m, 1e-9) else {
            prop_assert!((0..m.len()).all(|i| !m.is_killed(i)));
            return Ok(());
        };
        prop_assert!(q.per_mutant.iter().all(|x| (0.0..=1.0).contains(x)));
        // keep one member per group plus the candidates
        let groups = duplication_groups(&m, 1e-9);
        let keep: Vec<usize> = (0..m.len()).filter(|&i| !m.is_killed(i) || groups.iter().any(|g| g[0] == i)).collect();
        let reduced = VerdictMatrix::new(
            keep.iter().map(|&i| m.mutants[i].clone()).collect(),
            m.tests.clone(),
            keep.iter().map(|&i| m.killed[i].clone()).collect(),
            keep.iter().map(|&i| m.traces[i].clone()).collect(),
        ).unwrap();
        let rq = mutant_quality(&reduced, 1e-9).unwrap();
        for (j, &i) in keep.iter().enumerate() {
            prop_assert!(rq.per_mutant[j] >= q.per_mutant[i]);
        }
    }
}
