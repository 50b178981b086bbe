//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! a tally; with `UNIFL_ACCEPTANCE_STRICT=1` any failure also fails the
//! process.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use unifl::dataset_io::DataBundle;
use unifl::pipeline::{self, TrainJob};
use unifl::{RayonExecutor, RunConfig};
use unifl_core::fl::{
    aggregate_fedavg, aggregate_fedbn, run, run_observed, ClientUpdate, FlConfig, Method, MethodKind, RunOutcome,
    Sequential, TrainSettings, Weighting,
};
use unifl_core::linearizer::{linearize_event, train_vocab, MedicalEvent, PAD, UNK};
use unifl_core::metrics::{auprc, EvalReport};
use unifl_core::model::{grad_check, init_params, Hyperparams, ParamSet};
use unifl_core::rng;
use unifl_core::synthdata::{tokenizer_corpus, ClientDataset, SchemaVariant, DESCRIPTIONS};
use unifl_core::Task;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn config(name: &str) -> RunConfig {
    RunConfig::load(&repo().join("configs").join(name)).unwrap()
}

fn tiny_hp(task: Task, layer_norm: bool) -> Hyperparams {
    Hyperparams {
        vocab_size: 16,
        embed_dim: 4,
        hidden_dim: 4,
        max_tokens_per_event: 6,
        max_events_per_patient: 6,
        task,
        layer_norm,
        learning_rate: 0.1,
        batch_size: 4,
    }
}

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst: (f64, u64, String) = (0.0, 0, String::new());
    let mut failed = 0;
    for i in 0..100u64 {
        let task = Task::ALL[i as usize % Task::ALL.len()];
        let r = grad_check(&tiny_hp(task, i % 5 != 0), 50_000 + i, 1e-4).map_err(|e| e.to_string())?;
        failed += usize::from(!r.passed);
        if r.worst_rel_error > worst.0 {
            worst = (r.worst_rel_error, i, r.worst_tensor);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let line = format!(
        "{failed}/100 models over 1e-4; worst {:.2e} (model {}, {}); {secs:.1}s",
        worst.0, worst.1, worst.2
    );
    ensure!(failed == 0 && secs < 60.0, "{line}");
    Ok(line)
}

/// Client data for `cfg`, encoded for `task`.
fn encoded(cfg: &RunConfig, task: Task) -> (DataBundle, Vec<unifl_core::encode::ClientTaskData>) {
    let bundle = pipeline::build_data(cfg).unwrap();
    let clients = pipeline::encode_task(&bundle, cfg, task).unwrap();
    (bundle, clients)
}

fn train_settings(cfg: &RunConfig, kind: MethodKind, mu: f64, vocab_len: usize, seed: u64) -> TrainSettings {
    cfg.settings(Method::with_mu(kind, mu), Task::Los3, vocab_len, seed)
}

fn strip(mut o: RunOutcome) -> RunOutcome {
    for h in &mut o.histories {
        h.method.clear();
    }
    o
}

fn aggregator_laws() -> Outcome {
    let hp = tiny_hp(Task::Dx, true);
    let mut r = rng::stream(9, 0, 0, 0);
    for trial in 0..200u64 {
        let n = r.random_range(1..=6);
        let sets: Vec<ParamSet> = (0..n).map(|k| init_params(&hp, trial * 10 + k).unwrap()).collect();
        let sizes: Vec<usize> = (0..n).map(|_| r.random_range(1..500)).collect();
        let ups: Vec<ClientUpdate> = sets.iter().zip(&sizes).map(|(p, &n)| ClientUpdate { params: p, n_samples: n }).collect();

        let same: Vec<ClientUpdate> = sizes.iter().map(|&n| ClientUpdate { params: &sets[0], n_samples: n }).collect();
        ensure!(aggregate_fedavg(&same, Weighting::Size).unwrap() == sets[0], "idempotence, trial {trial}");

        let avg = aggregate_fedavg(&ups, Weighting::Size).unwrap();
        let flat: Vec<Vec<f64>> = sets.iter().map(ParamSet::flatten).collect();
        for (j, v) in avg.flatten().into_iter().enumerate() {
            let lo = flat.iter().map(|f| f[j]).fold(f64::INFINITY, f64::min);
            let hi = flat.iter().map(|f| f[j]).fold(f64::NEG_INFINITY, f64::max);
            ensure!(lo <= v && v <= hi, "hull, trial {trial} value {j}");
        }

        let bn = aggregate_fedbn(&ups, Weighting::Size).unwrap();
        for (k, personal) in bn.iter().enumerate() {
            for (ti, t) in personal.tensors.iter().enumerate() {
                let expect = if t.is_norm { &sets[k].tensors[ti].values } else { &avg.tensors[ti].values };
                ensure!(&t.values == expect, "FedBN exclusion, trial {trial} client {k} {}", t.name);
            }
        }
    }

    let cfg = config("tiny.json");
    let (bundle, clients) = encoded(&cfg, Task::Los3);
    let v = bundle.vocab.len();
    for seed in [0, 1] {
        let go = |kind| strip(run(FlConfig { clients: &clients, settings: &train_settings(&cfg, kind, 0.0, v, seed) }, &Sequential).unwrap());
        ensure!(go(MethodKind::FedProx) == go(MethodKind::FedAvg), "FedProx(0) != FedAvg, seed {seed}");
        ensure!(go(MethodKind::FedPxN) == go(MethodKind::FedBN), "FedPxN(0) != FedBN, seed {seed}");
    }
    Ok("idempotence, hull and norm exclusion on 200 draws; mu=0 reductions bit-exact".into())
}

fn collapse_law() -> Outcome {
    let mut cfg = config("tiny.json");
    cfg.generator.n_clients = 1;
    cfg.generator.drop_event_types.clear();
    let (bundle, clients) = encoded(&cfg, Task::Los3);
    let rounds = 12;
    let trajectory = |kind| {
        let mut s = train_settings(&cfg, kind, 0.0, bundle.vocab.len(), 3);
        s.rounds = rounds;
        s.local_epochs = 1;
        s.patience = usize::MAX;
        let mut traj = Vec::new();
        run_observed(FlConfig { clients: &clients, settings: &s }, &Sequential, &mut |_, m| traj.push(m.to_vec())).unwrap();
        traj
    };
    let fl = trajectory(MethodKind::FedAvg);
    let local = trajectory(MethodKind::Local);
    ensure!(fl.len() == rounds && local.len() == rounds, "trajectory lengths {} / {}", fl.len(), local.len());
    ensure!(fl == local, "trajectories diverge at step {:?}", fl.iter().zip(&local).position(|(a, b)| a != b));
    Ok(format!("{rounds}-round trajectory bit-identical"))
}

fn brute_force_ap(scores: &[f64], labels: &[u8]) -> f64 {
    let p = labels.iter().filter(|&&y| y == 1).count() as f64;
    let mut thresholds = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let (mut ap, mut tp_prev) = (0.0, 0usize);
    for t in thresholds {
        let k = scores.iter().filter(|&&s| s >= t).count();
        let tp = scores.iter().zip(labels).filter(|(&s, &y)| s >= t && y == 1).count();
        if tp > tp_prev {
            ap += (tp - tp_prev) as f64 / p * (tp as f64 / k as f64);
        }
        tp_prev = tp;
    }
    ap
}

fn auprc_oracle() -> Outcome {
    let mut r = rng::stream(4, 0, 0, 0);
    for case in 0..1000 {
        let n = r.random_range(1..=50);
        let grid = [2u32, 5, 20, 1_000_000][case % 4];
        let raw: Vec<u32> = (0..n).map(|_| r.random_range(0..grid)).collect();
        let mut labels: Vec<u8> = (0..n).map(|_| r.random_range(0..2u8)).collect();
        if !labels.contains(&1) {
            labels[r.random_range(0..n)] = 1;
        }
        let scores: Vec<f64> = raw.iter().map(|&k| k as f64 / grid as f64).collect();
        let ap = auprc(&scores, &labels).unwrap();
        ensure!(ap == brute_force_ap(&scores, &labels), "oracle, case {case}");
        let mono: Vec<f64> = raw.iter().map(|&k| (k as f64).powi(3) * 2.0 - 11.0).collect();
        ensure!(auprc(&mono, &labels).unwrap() == ap, "monotone, case {case}");
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            idx.swap(i, r.random_range(0..=i));
        }
        let s2: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let y2: Vec<u8> = idx.iter().map(|&i| labels[i]).collect();
        ensure!(auprc(&s2, &y2).unwrap() == ap, "permutation, case {case}");
    }
    Ok("1000 instances exact; monotone and permutation invariant".into())
}

fn unifl(out: &Path, args: &[&str]) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_unifl"))
        .args(args)
        .env("UNIFL_OUT", out)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    Ok(())
}

fn read_results(runs: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for p in unifl::results::find_results(runs).unwrap() {
        out.insert(p.strip_prefix(runs).unwrap().display().to_string(), std::fs::read(&p).unwrap());
    }
    out
}

fn concurrency() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = repo().join("configs/tiny.json");
    let c = cfg.to_str().unwrap();
    let data = tmp.path().join("data");
    let d = data.to_str().unwrap();
    unifl(tmp.path(), &["generate-data", "--config", c, "--out", d])?;
    let mut results = Vec::new();
    for workers in ["1", "8"] {
        let out = tmp.path().join(format!("w{workers}"));
        for task in ["los3", "dx"] {
            unifl(&out, &["train", "--config", c, "--data", d, "--method", "all", "--task", task, "--workers", workers])?;
        }
        results.push(read_results(&out.join("runs")));
    }
    ensure!(results[0].len() == 12, "expected 12 result files, found {}", results[0].len());
    ensure!(results[0] == results[1], "results differ between 1 and 8 workers");
    Ok(format!("{} result CSVs byte-identical across 1 and 8 workers", results[0].len()))
}

fn mean_auprc(reports: &[EvalReport]) -> f64 {
    reports.iter().map(|r| r.auprc).sum::<f64>() / reports.len() as f64
}

/// Reports and mean rounds used per method on the shipped config.
struct Sweep {
    auprc: BTreeMap<MethodKind, f64>,
    rounds: BTreeMap<MethodKind, f64>,
    secs: f64,
}

fn sweep() -> Sweep {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config("acceptance.json");
    cfg.output_dir = tmp.path().to_path_buf();
    let task = Task::Los3;
    let (bundle, clients) = encoded(&cfg, task);
    let exec = RayonExecutor::new(std::thread::available_parallelism().map_or(1, |n| n.get())).unwrap();
    let mut auprc = BTreeMap::new();
    let mut rounds = BTreeMap::new();
    for kind in [MethodKind::Local, MethodKind::Centralized, MethodKind::FedAvg, MethodKind::FedBN] {
        let job = TrainJob { cfg: &cfg, method: cfg.method(kind, None), task, seeds: &cfg.seeds };
        let reports = pipeline::train(&job, &bundle, &clients, &exec).unwrap();
        let mut used = Vec::new();
        for seed in &cfg.seeds {
            let path = job.run_dir().join(format!("seed_{seed}/history.json"));
            used.extend(unifl::results::load_history(&path).unwrap().iter().map(|h| h.rounds_used as f64));
        }
        auprc.insert(kind, mean_auprc(&reports));
        rounds.insert(kind, used.iter().sum::<f64>() / used.len() as f64);
    }
    Sweep { auprc, rounds, secs: start.elapsed().as_secs_f64() }
}

const TOLERANCE: f64 = -0.005;

fn ordering(s: &Sweep) -> Outcome {
    let a = |k| s.auprc[&k];
    let (ll, cl, avg, bn) = (a(MethodKind::Local), a(MethodKind::Centralized), a(MethodKind::FedAvg), a(MethodKind::FedBN));
    let line = format!("LL {ll:.4}, FedAvg {avg:.4}, FedBN {bn:.4}, CL {cl:.4}; {:.0}s", s.secs);
    ensure!(cl - bn >= TOLERANCE, "CL < FedBN: {line}");
    ensure!(bn - ll >= TOLERANCE, "FedBN < LL: {line}");
    ensure!(avg - ll >= TOLERANCE, "FedAvg < LL: {line}");
    ensure!(s.secs < 30.0 * 60.0, "too slow: {line}");
    Ok(line)
}

fn round_accounting(s: &Sweep) -> Outcome {
    let fl = (s.rounds[&MethodKind::FedAvg] + s.rounds[&MethodKind::FedBN]) / 2.0;
    let cl = s.rounds[&MethodKind::Centralized];
    let ratio = fl / cl;
    ensure!(ratio.is_finite() && ratio > 0.0, "ratio {ratio} (FL {fl}, CL {cl})");
    Ok(format!("FL rounds {fl:.1} / CL epochs {cl:.1} = {ratio:.2}"))
}

fn check_splits(data: &[ClientDataset]) -> Result<usize, String> {
    let mut checked = 0;
    for d in data {
        for (task, s) in &d.splits {
            let strata: Vec<bool> = d.records.iter().map(|r| r.labels.stratum(*task).unwrap()).collect();
            let n = strata.len() as f64;
            let pos = strata.iter().filter(|&&b| b).count() as f64;
            for (part, ratio) in s.parts().into_iter().zip([0.8, 0.1, 0.1]) {
                let p = part.iter().filter(|&&i| strata[i]).count() as f64;
                ensure!((part.len() as f64 - ratio * n).abs() <= 1.0, "client {} {task:?}: size", d.client_id());
                ensure!((p - ratio * pos).abs() <= 1.0, "client {} {task:?}: positives", d.client_id());
            }
            checked += 1;
        }
    }
    Ok(checked)
}

fn split_bounds() -> Outcome {
    let mut checked = 0;
    for name in ["acceptance.json", "tiny.json"] {
        checked += check_splits(&pipeline::build_data(&config(name)).unwrap().clients)?;
    }
    let mut wide = config("tiny.json");
    wide.generator.n_clients = 10;
    wide.generator.tasks = Task::ALL.to_vec();
    checked += check_splits(&pipeline::build_data(&wide).unwrap().clients)?;
    Ok(format!("{checked} client/task splits within bounds"))
}

fn linearizer_compatibility() -> Outcome {
    let mut cfg = config("tiny.json");
    cfg.generator.n_clients = 6;
    cfg.generator.drop_event_types.clear();
    cfg.generator.exclude_descriptions = false;
    let bundle = pipeline::build_data(&cfg).unwrap();
    let mut pairs = 0;
    for (i, (kind, _, _)) in DESCRIPTIONS.iter().enumerate() {
        for a in &bundle.clients {
            for b in &bundle.clients {
                let (ca, cb) = (a.profile.schema.code(a.client_id(), i), b.profile.schema.code(b.client_id(), i));
                if a.client_id() >= b.client_id() || a.profile.schema == b.profile.schema {
                    continue;
                }
                ensure!(ca != cb, "codes collide");
                for schema in SchemaVariant::ALL {
                    let l = schema.layout(*kind);
                    let ev = |code: &str| MedicalEvent::new(l.event_type, 5).with(l.code_field, code).with(l.value_field, "7.5");
                    let (ta, tb) = (linearize_event(&ev(&ca), &bundle.dictionary), linearize_event(&ev(&cb), &bundle.dictionary));
                    ensure!(ta == tb, "{:?} vs {:?}", ta.as_str(), tb.as_str());
                    pairs += 1;
                }
            }
        }
    }
    let vocab = train_vocab(&tokenizer_corpus(), 512).unwrap();
    let alphabet: Vec<char> = "abcdefghij klmnopqrstuvwxyz0123456789.%-_é漢🙂\t".chars().collect();
    let mut r = rng::stream(10, 0, 0, 0);
    for i in 0..10_000 {
        let len = r.random_range(0..40);
        let text: String = if i % 3 == 0 {
            (0..len).filter_map(|_| char::from_u32(r.random_range(0..0x11000))).collect()
        } else {
            (0..len).map(|_| alphabet[r.random_range(0..alphabet.len())]).collect()
        };
        let ids = vocab.tokenize(&text);
        ensure!(ids.ids.iter().all(|&t| t != PAD && t != UNK), "special id in {text:?}");
        ensure!(vocab.detokenize(&ids.ids).as_deref() == Ok(text.as_str()), "round trip of {text:?}");
    }
    Ok(format!("{pairs} cross-schema event pairs identical; 10k fuzz strings round-trip"))
}

fn report(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
    });
    let secs = start.elapsed().as_secs_f64();
    match &result {
        Ok(detail) => println!("PASS {name}: {detail} [{secs:.1}s]"),
        Err(detail) => println!("FAIL {name}: {detail} [{secs:.1}s]"),
    }
    result.is_ok()
}

fn main() {
    let mut results = vec![
        report("1 gradient oracle", gradient_oracle),
        report("2 aggregator laws", aggregator_laws),
        report("3 collapse law", collapse_law),
        report("4 AUPRC oracle", auprc_oracle),
        report("5 determinism across workers", concurrency),
    ];
    match &catch_unwind(sweep) {
        Ok(s) => {
            results.push(report("6 qualitative ordering", || ordering(s)));
            results.push(report("7 round accounting", || round_accounting(s)));
        }
        Err(_) => {
            results.push(report("6 qualitative ordering", || Err("sweep failed".into())));
            results.push(report("7 round accounting", || Err("sweep failed".into())));
        }
    }
    results.push(report("8 stratified split bounds", split_bounds));
    results.push(report("9 linearizer compatibility", linearizer_compatibility));
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed < results.len() && std::env::var_os("UNIFL_ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}
