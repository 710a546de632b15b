use coreset_influence::config::RunConfig;
use coreset_influence::harness::{make_stream, StreamSpec};
use coreset_influence::selection::SelectorKind;

fn spec() -> StreamSpec {
    StreamSpec {
        num_tasks: 3,
        samples_per_class: 40,
        drift: vec![0.0, 2.0, 4.0],
        seed: 11,
        ..StreamSpec::default()
    }
}

fn class_mean(samples: &[coreset_influence::models::Sample], label: usize) -> Vec<f64> {
    let of: Vec<_> = samples.iter().filter(|s| s.label == label).collect();
    let dim = of[0].features.len();
    (0..dim).map(|j| of.iter().map(|s| s.features[j]).sum::<f64>() / of.len() as f64).collect()
}

#[test]
fn streams_are_reproducible() {
    let a = make_stream(&spec()).unwrap();
    let b = make_stream(&spec()).unwrap();
    assert_eq!(a.tasks, b.tasks);
    let other = make_stream(&StreamSpec { seed: 12, ..spec() }).unwrap();
    assert_ne!(a.tasks, other.tasks);
}

#[test]
fn drift_shifts_every_class_of_a_task() {
    let stream = make_stream(&spec()).unwrap();
    let base = make_stream(&StreamSpec { drift: vec![0.0; 3], ..spec() }).unwrap();
    for (t, shift) in [(1usize, 2.0), (2, 4.0)] {
        for label in stream.tasks[t].train.iter().map(|s| s.label).collect::<std::collections::BTreeSet<_>>() {
            let moved = class_mean(&stream.tasks[t].train, label);
            let still = class_mean(&base.tasks[t].train, label);
            for (x, y) in moved.iter().zip(&still) {
                assert!((x - y - shift).abs() < 1e-9, "task {t} label {label}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn ids_are_unique_across_the_stream() {
    let stream = make_stream(&spec()).unwrap();
    let mut ids: Vec<u64> = stream
        .tasks
        .iter()
        .flat_map(|t| t.train.iter().chain(&t.test).map(|s| s.id))
        .collect();
    let n = ids.len();
    ids.sort_unstable();
    ids.dedup();
    assert_eq!(ids.len(), n);
}

#[test]
fn buffer_never_exceeds_budget() {
    for kind in [SelectorKind::Reservoir, SelectorKind::Ring, SelectorKind::Ours, SelectorKind::IfBoth] {
        let cfg = RunConfig::parse(&format!(
            "seed=2\nstream.num_tasks=3\nstream.samples_per_class=20\ncriterion.m=15\nselector={kind}\n"
        ))
        .unwrap();
        let report = cfg.execute().unwrap();
        assert!(report.buffer_trace.iter().all(|b| b.ids.len() <= 15), "{kind}");
        assert_eq!(report.acc_matrix.num_tasks(), 3);
    }
}

#[test]
fn report_config_round_trips() {
    let cfg = RunConfig::parse("seed=4\nstream.num_tasks=2\nstream.samples_per_class=20\ncriterion.m=10\n").unwrap();
    let report = cfg.execute().unwrap();
    let json = report.to_json().unwrap();
    let parsed: coreset_influence::harness::RunReport = serde_json::from_str(&json).unwrap();
    let again = RunConfig::from_pairs(&parsed.config).unwrap().execute().unwrap();
    assert_eq!(again.to_json().unwrap(), json);
}
