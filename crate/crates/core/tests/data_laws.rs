use std::collections::{BTreeMap, BTreeSet};

use unifl_core::linearizer::{linearize_event, CodeDictionary, MedicalEvent};
use unifl_core::metrics::auprc;
use unifl_core::synthdata::{
    generate, ClientDataset, DropRule, EventKind, GeneratorConfig, SchemaVariant, Signal, DESCRIPTIONS,
};
use unifl_core::Task;

fn config() -> GeneratorConfig {
    GeneratorConfig {
        n_clients: 4,
        size_ratio_max: 10.0,
        min_patients: 60,
        seed: 11,
        drop_event_types: vec![DropRule { client: 3, kind: EventKind::Infusion }],
        ..GeneratorConfig::default()
    }
}

fn descriptions_of<'a>(d: &'a ClientDataset, indices: &[usize]) -> Vec<Vec<&'a str>> {
    indices
        .iter()
        .map(|&i| {
            d.records[i]
                .events
                .iter()
                .flat_map(|e| e.features.iter())
                .filter_map(|(_, v)| d.profile.code_vocab.get(v))
                .map(|e| e.description.as_str())
                .collect()
        })
        .collect()
}

fn signal_of(desc: &str) -> Signal {
    DESCRIPTIONS.iter().find(|(_, _, d)| *d == desc).unwrap().1
}

#[test]
fn generation_is_deterministic() {
    assert_eq!(generate(&config()).unwrap(), generate(&config()).unwrap());
    let other = GeneratorConfig { seed: 12, ..config() };
    assert_ne!(generate(&config()).unwrap()[0].records, generate(&other).unwrap()[0].records);
}

#[test]
fn dropped_event_types_vanish_from_that_client_only() {
    let with = generate(&config()).unwrap();
    let without = generate(&GeneratorConfig { drop_event_types: vec![], ..config() }).unwrap();
    let infusion = SchemaVariant::for_client(3).layout(EventKind::Infusion).event_type;
    assert!(with[3].records.iter().flat_map(|r| &r.events).all(|e| e.event_type != infusion));
    assert!(without[3].records.iter().flat_map(|r| &r.events).any(|e| e.event_type == infusion));
    assert_eq!(with[3].profile.dropped_event_types, vec![EventKind::Infusion]);
    for k in 0..3 {
        assert_eq!(with[k], without[k]);
    }
}

#[test]
fn codes_are_client_disjoint_and_cover_every_event() {
    let data = generate(&config()).unwrap();
    let mut union = CodeDictionary::new();
    for d in &data {
        union.extend(&d.profile.code_vocab).unwrap();
        for e in d.records.iter().flat_map(|r| &r.events) {
            assert!(e.features.iter().any(|(_, v)| d.profile.code_vocab.contains(v)));
        }
    }
}

#[test]
fn client_sizes_follow_the_configured_ratio() {
    for ratio in [1.0, 4.0, 10.0, 28.0] {
        let cfg = GeneratorConfig { size_ratio_max: ratio, min_patients: 50, n_clients: 5, ..config() };
        let cfg = GeneratorConfig { drop_event_types: vec![], ..cfg };
        let data = generate(&cfg).unwrap();
        let largest = data[0].records.len() as f64;
        let smallest = data.last().unwrap().records.len() as f64;
        assert!((largest - ratio * smallest).abs() <= 1.0, "ratio {ratio}: {largest} / {smallest}");
        assert_eq!(smallest as usize, 50);
    }
}

#[test]
fn label_priors_match_configuration() {
    let cfg = GeneratorConfig { min_patients: 400, size_ratio_max: 2.0, ..config() };
    for d in generate(&cfg).unwrap() {
        let n = d.records.len() as f64;
        for task in [Task::Los3, Task::Los7, Task::Mort, Task::Readm] {
            let p = d.profile.label_prior[&task][0];
            let hits = d.records.iter().filter(|r| r.labels.stratum(task) == Some(true)).count() as f64;
            let bound = 1.96 * (p * (1.0 - p) / n).sqrt();
            assert!((hits / n - p).abs() <= bound, "client {} {task:?}: {} vs {p}", d.client_id(), hits / n);
        }
    }
}

#[test]
fn los7_implies_los3() {
    for d in generate(&config()).unwrap() {
        for r in &d.records {
            assert!(r.labels.los7.unwrap() <= r.labels.los3.unwrap());
        }
    }
}

/// Logistic regression by full-batch gradient descent on standardized
/// counts.
fn fit_logistic(x: &[Vec<f64>], y: &[u8]) -> Vec<f64> {
    let d = x[0].len();
    let mut w = vec![0.0; d + 1];
    for _ in 0..2000 {
        let mut g = vec![0.0; d + 1];
        for (xi, &yi) in x.iter().zip(y) {
            let z = w[d] + xi.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            let err = 1.0 / (1.0 + (-z).exp()) - yi as f64;
            for j in 0..d {
                g[j] += err * xi[j];
            }
            g[d] += err;
        }
        for j in 0..=d {
            w[j] -= 0.5 * g[j] / x.len() as f64 + 1e-3 * w[j] * (j < d) as u8 as f64;
        }
    }
    w
}

#[test]
fn linear_probe_on_description_counts_recovers_a_strong_signal() {
    let cfg = GeneratorConfig {
        n_clients: 1,
        min_patients: 800,
        size_ratio_max: 1.0,
        signal_strength: 1.0,
        label_gain: 60.0,
        events_per_patient: (10, 14),
        tasks: vec![Task::Los3],
        drop_event_types: vec![],
        ..config()
    };
    let d = &generate(&cfg).unwrap()[0];
    let vocab: BTreeMap<&str, usize> = DESCRIPTIONS.iter().enumerate().map(|(i, (_, _, s))| (*s, i)).collect();
    let featurize = |idx: &[usize]| -> Vec<Vec<f64>> {
        descriptions_of(d, idx)
            .into_iter()
            .map(|descs| {
                let mut v = vec![0.0; DESCRIPTIONS.len()];
                for s in descs {
                    v[vocab[s]] += 1.0;
                }
                v
            })
            .collect()
    };
    let split = &d.splits[&Task::Los3];
    let train_idx: Vec<usize> = split.train.iter().chain(&split.valid).copied().collect();
    let labels = |idx: &[usize]| -> Vec<u8> { idx.iter().map(|&i| d.records[i].labels.los3.unwrap()).collect() };
    let w = fit_logistic(&featurize(&train_idx), &labels(&train_idx));
    // Held-out: the test split plus a fresh cohort from another seed.
    let fresh = GeneratorConfig { seed: 99, ..cfg };
    let fresh = &generate(&fresh).unwrap()[0];
    let mut scores = Vec::new();
    let mut ys = Vec::new();
    let score = |v: &[f64]| w[v.len()] + v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
    for v in featurize(&split.test) {
        scores.push(score(&v));
    }
    ys.extend(labels(&split.test));
    for r in &fresh.records {
        let mut v = vec![0.0; DESCRIPTIONS.len()];
        for e in r.events.iter().flat_map(|e| &e.features) {
            if let Some(entry) = fresh.profile.code_vocab.get(&e.1) {
                v[vocab[entry.description.as_str()]] += 1.0;
            }
        }
        scores.push(score(&v));
        ys.push(r.labels.los3.unwrap());
    }
    let ap = auprc(&scores, &ys).unwrap();
    assert!(ap > 0.9, "held-out AUPRC {ap}");
}

#[test]
fn pooled_training_evidence_strictly_contains_each_clients() {
    let data = generate(&config()).unwrap();
    let per_client: Vec<BTreeSet<&str>> = data
        .iter()
        .map(|d| {
            descriptions_of(d, &d.splits[&Task::Los3].train)
                .into_iter()
                .flatten()
                .filter(|s| signal_of(s) != Signal::Neutral)
                .collect()
        })
        .collect();
    let pooled: BTreeSet<&str> = per_client.iter().flatten().copied().collect();
    for (k, s) in per_client.iter().enumerate() {
        assert!(s.is_subset(&pooled) && s.len() < pooled.len(), "client {k}");
        let excluded: BTreeSet<&str> = data[k].profile.excluded_descriptions.iter().map(String::as_str).collect();
        assert!(s.is_disjoint(&excluded));
    }
}

#[test]
fn every_generated_split_is_balanced() {
    let cfg = GeneratorConfig { n_clients: 6, ..config() };
    for d in generate(&cfg).unwrap() {
        for (task, s) in &d.splits {
            let n = d.records.len() as f64;
            let strata: Vec<bool> = d.records.iter().map(|r| r.labels.stratum(*task).unwrap()).collect();
            let pos = strata.iter().filter(|&&b| b).count() as f64;
            for (part, ratio) in s.parts().into_iter().zip([0.8, 0.1, 0.1]) {
                assert!((part.len() as f64 - ratio * n).abs() <= 1.0);
                let p = part.iter().filter(|&&i| strata[i]).count() as f64;
                assert!((p - ratio * pos).abs() <= 1.0, "client {} {task:?}", d.client_id());
            }
        }
    }
}

#[test]
fn identical_content_linearizes_identically_across_clients() {
    let data = generate(&GeneratorConfig { n_clients: 6, ..config() }).unwrap();
    // Clients 0 and 3 share a schema but not codes.
    let (a, b) = (&data[0], &data[3]);
    assert_eq!(a.profile.schema, b.profile.schema);
    let mut dict = CodeDictionary::new();
    dict.extend(&a.profile.code_vocab).unwrap();
    dict.extend(&b.profile.code_vocab).unwrap();
    let mut checked = 0;
    for (i, (kind, signal, _)) in DESCRIPTIONS.iter().enumerate() {
        let (sa, sb) = (a.profile.schema.code(0, i), b.profile.schema.code(3, i));
        assert_ne!(sa, sb);
        if !(a.profile.code_vocab.contains(&sa) && b.profile.code_vocab.contains(&sb)) {
            continue;
        }
        let l = a.profile.schema.layout(*kind);
        let ev = |code: &str| MedicalEvent::new(l.event_type, 1).with(l.code_field, code).with(l.value_field, "42");
        assert_eq!(linearize_event(&ev(&sa), &dict), linearize_event(&ev(&sb), &dict), "{signal:?}");
        checked += 1;
    }
    assert!(checked >= 40);
}
