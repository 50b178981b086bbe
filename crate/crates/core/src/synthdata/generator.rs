use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::catalog::{EventKind, SchemaVariant, Signal, DESCRIPTIONS};
use super::split::{split, DEFAULT_RATIOS};
use super::{ClientDataset, ClientProfile, Labels, PatientRecord};
use crate::error::{Error, Result};
use crate::linearizer::{description_corpus_line, schema_corpus_line, CodeDictionary, MedicalEvent};
use crate::model::{Task, DX_CATEGORIES};
use crate::rng;

/// Sharpness of the risk-to-description mapping.
const EMISSION_SHARPNESS: f64 = 12.0;
/// Admission window the timestamps fall into, in minutes.
const WINDOW_MINUTES: u32 = 720;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DropRule {
    pub client: u32,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub n_clients: usize,
    /// Largest over smallest client size.
    pub size_ratio_max: f64,
    pub min_patients: usize,
    pub seed: u64,
    /// Probability that an event carries risk information, in `(0, 1]`.
    pub signal_strength: f64,
    /// Slope `a` of the label logit in the latent risk.
    pub label_gain: f64,
    pub tasks: Vec<Task>,
    /// Inclusive range.
    pub events_per_patient: (usize, usize),
    /// Mean prevalence per task across clients.
    pub base_priors: BTreeMap<Task, f64>,
    /// Client priors range from `base / spread` to `base * spread`.
    pub prior_spread: f64,
    pub drop_event_types: Vec<DropRule>,
    /// Give every client a disjoint handful of descriptions it never records.
    pub exclude_descriptions: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_clients: 4,
            size_ratio_max: 28.0,
            min_patients: 60,
            seed: 0,
            signal_strength: 0.8,
            label_gain: 8.0,
            tasks: Task::ALL.to_vec(),
            events_per_patient: (6, 12),
            base_priors: [
                (Task::Dx, 0.2),
                (Task::Los3, 0.45),
                (Task::Los7, 0.2),
                (Task::Mort, 0.1),
                (Task::Readm, 0.12),
            ]
            .into_iter()
            .collect(),
            prior_spread: 1.5,
            drop_event_types: Vec::new(),
            exclude_descriptions: true,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_clients == 0 {
            return fail("n_clients must be at least 1".into());
        }
        if !(self.size_ratio_max >= 1.0) {
            return fail("size_ratio_max must be at least 1".into());
        }
        if self.min_patients < 20 {
            return fail("min_patients must be at least 20".into());
        }
        if !(self.signal_strength > 0.0 && self.signal_strength <= 1.0) {
            return fail("signal_strength must lie in (0, 1]".into());
        }
        if !(self.label_gain.is_finite() && self.label_gain >= 0.0) {
            return fail("label_gain must be finite and non-negative".into());
        }
        if self.tasks.is_empty() {
            return fail("no tasks enabled".into());
        }
        let (lo, hi) = self.events_per_patient;
        if lo == 0 || lo > hi {
            return fail(alloc::format!("bad events_per_patient range ({lo}, {hi})"));
        }
        for task in &self.tasks {
            match self.base_priors.get(task) {
                Some(&p) if p > 0.0 && p < 1.0 => {}
                _ => return fail(alloc::format!("base prior for {} must lie in (0, 1)", task.name())),
            }
        }
        if !(self.prior_spread >= 1.0) {
            return fail("prior_spread must be at least 1".into());
        }
        for rule in &self.drop_event_types {
            if rule.client as usize >= self.n_clients {
                return fail(alloc::format!("drop rule for unknown client {}", rule.client));
            }
        }
        for c in 0..self.n_clients as u32 {
            let dropped = self.drop_event_types.iter().filter(|r| r.client == c).count();
            if dropped >= EventKind::ALL.len() {
                return fail(alloc::format!("client {c} drops every event type"));
            }
        }
        Ok(())
    }

    /// Log-spaced sizes, client 0 largest.
    pub fn client_sizes(&self) -> Vec<usize> {
        let n = self.n_clients;
        (0..n)
            .map(|i| {
                let frac = if n == 1 { 0.0 } else { (n - 1 - i) as f64 / (n - 1) as f64 };
                libm::round(self.min_patients as f64 * libm::pow(self.size_ratio_max, frac)) as usize
            })
            .collect()
    }

    /// Configured priors of one client: 18 entries for Dx, one otherwise.
    pub fn client_priors(&self, client: usize) -> BTreeMap<Task, Vec<f64>> {
        let n = self.n_clients;
        let position = if n == 1 { 0.0 } else { 2.0 * client as f64 / (n - 1) as f64 - 1.0 };
        let factor = libm::pow(self.prior_spread, position);
        let clamp = |p: f64| p.clamp(0.02, 0.95);
        self.tasks
            .iter()
            .map(|&task| {
                let base = self.base_priors[&task] * factor;
                let priors = if task == Task::Dx {
                    (0..DX_CATEGORIES)
                        .map(|k| clamp(base * (0.5 + k as f64 / (DX_CATEGORIES - 1) as f64)))
                        .collect()
                } else {
                    alloc::vec![clamp(base)]
                };
                (task, priors)
            })
            .collect()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + libm::log1p(libm::exp(-x.abs()))
}

/// Offset `b` with `E_r[sigmoid(a r + b)] = prior` for `r ~ U(0, 1)`.
pub fn offset_for_prior(gain: f64, prior: f64) -> f64 {
    let mean = |b: f64| {
        if gain.abs() < 1e-12 {
            sigmoid(b)
        } else {
            (softplus(gain + b) - softplus(b)) / gain
        }
    };
    let (mut lo, mut hi) = (-60.0 - gain.abs(), 60.0 + gain.abs());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) < prior {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Text the shared tokenizer is trained on: public descriptions and schema
/// words only, laid out as they appear in linearized events.
pub fn tokenizer_corpus() -> Vec<String> {
    let mut lines = Vec::new();
    for variant in SchemaVariant::ALL {
        for kind in EventKind::ALL {
            let l = variant.layout(kind);
            let fields = if l.value_first {
                [l.value_field, l.code_field]
            } else {
                [l.code_field, l.value_field]
            };
            lines.push(schema_corpus_line(l.event_type, &fields));
        }
    }
    lines.extend(DESCRIPTIONS.iter().map(|(_, _, d)| description_corpus_line(d)));
    lines
}

struct ClientSpec {
    id: u32,
    schema: SchemaVariant,
    /// Description indices available per `(kind, signal)`.
    pool: BTreeMap<(EventKind, Signal), Vec<usize>>,
    dropped: Vec<EventKind>,
    offsets: BTreeMap<Task, Vec<f64>>,
}

fn excluded(client: u32, index: usize) -> bool {
    // Eight disjoint groups of four non-neutral descriptions, one per event
    // kind, mixing high and low signals.
    let (_, signal, _) = DESCRIPTIONS[index];
    if signal == Signal::Neutral {
        return false;
    }
    let kind = index / 12;
    let j = kind * 8 + index % 12;
    (j + kind) % 8 == client as usize % 8
}

fn pick_kind(rng: &mut rng::Rng, allowed: &[EventKind]) -> EventKind {
    let total: f64 = allowed.iter().map(|k| k.weight()).sum();
    let mut x = rng.random::<f64>() * total;
    for &k in allowed {
        x -= k.weight();
        if x < 0.0 {
            return k;
        }
    }
    *allowed.last().expect("at least one kind")
}

fn emit_event(spec: &ClientSpec, cfg: &GeneratorConfig, rng: &mut rng::Rng, risk: f64, timestamp: u32) -> (EventKind, MedicalEvent) {
    let kind = pick_kind(rng, &EventKind::ALL);
    let signal = if rng.random::<f64>() < cfg.signal_strength {
        if rng.random::<f64>() < sigmoid(EMISSION_SHARPNESS * (risk - 0.5)) {
            Signal::High
        } else {
            Signal::Low
        }
    } else {
        Signal::Neutral
    };
    let candidates = match spec.pool.get(&(kind, signal)) {
        Some(c) if !c.is_empty() => c,
        _ => &spec.pool[&(kind, Signal::Neutral)],
    };
    let index = candidates[rng.random_range(0..candidates.len())];
    let value = alloc::format!("{}", rng.random_range(0..100u32));
    let layout = spec.schema.layout(kind);
    let code = spec.schema.code(spec.id, index);
    let mut ev = MedicalEvent::new(layout.event_type, timestamp);
    if layout.value_first {
        ev = ev.with(layout.value_field, value).with(layout.code_field, code);
    } else {
        ev = ev.with(layout.code_field, code).with(layout.value_field, value);
    }
    (kind, ev)
}

fn generate_patient(spec: &ClientSpec, cfg: &GeneratorConfig, rng: &mut rng::Rng, index: usize) -> PatientRecord {
    let risk: f64 = rng.random();
    let (lo, hi) = cfg.events_per_patient;
    let events = loop {
        let n = rng.random_range(lo..=hi);
        let mut times: Vec<u32> = (0..n).map(|_| rng.random_range(0..WINDOW_MINUTES)).collect();
        times.sort_unstable();
        let events: Vec<MedicalEvent> = times
            .into_iter()
            .map(|t| emit_event(spec, cfg, rng, risk, t))
            .filter(|(kind, _)| !spec.dropped.contains(kind))
            .map(|(_, ev)| ev)
            .collect();
        if !events.is_empty() {
            break events;
        }
    };
    let gain = cfg.label_gain;
    let mut labels = Labels::default();
    // One shared draw nests LOS7 inside LOS3.
    let los_draw: f64 = rng.random();
    for &task in &cfg.tasks {
        let offsets = &spec.offsets[&task];
        let bits = offsets
            .iter()
            .map(|&b| {
                let p = sigmoid(gain * risk + b);
                let u = if matches!(task, Task::Los3 | Task::Los7) { los_draw } else { rng.random() };
                (u < p) as u8
            })
            .collect();
        labels.set(task, bits);
    }
    PatientRecord {
        patient_id: alloc::format!("c{}-p{:05}", spec.id, index),
        client_id: spec.id,
        events,
        labels,
    }
}

/// Generates every client with records, dictionary slice and splits.
pub fn generate(cfg: &GeneratorConfig) -> Result<Vec<ClientDataset>> {
    cfg.validate()?;
    let sizes = cfg.client_sizes();
    let mut out = Vec::with_capacity(cfg.n_clients);
    for (c, &n_patients) in sizes.iter().enumerate() {
        let id = c as u32;
        let schema = SchemaVariant::for_client(id);
        let mut pool: BTreeMap<(EventKind, Signal), Vec<usize>> = BTreeMap::new();
        let mut code_vocab = CodeDictionary::new();
        let mut excluded_descriptions = Vec::new();
        for (i, &(kind, signal, desc)) in DESCRIPTIONS.iter().enumerate() {
            if cfg.exclude_descriptions && excluded(id, i) {
                excluded_descriptions.push(String::from(desc));
                continue;
            }
            pool.entry((kind, signal)).or_default().push(i);
            code_vocab.insert(schema.code(id, i), desc, schema.family())?;
        }
        let dropped: Vec<EventKind> = cfg
            .drop_event_types
            .iter()
            .filter(|r| r.client == id)
            .map(|r| r.kind)
            .collect();
        let label_prior = cfg.client_priors(c);
        let offsets = label_prior
            .iter()
            .map(|(&t, ps)| (t, ps.iter().map(|&p| offset_for_prior(cfg.label_gain, p)).collect()))
            .collect();
        let spec = ClientSpec { id, schema, pool, dropped: dropped.clone(), offsets };
        let mut rng = rng::stream(cfg.seed, rng::domain::GENERATE, id as u64, 0);
        let records: Vec<PatientRecord> = (0..n_patients)
            .map(|i| generate_patient(&spec, cfg, &mut rng, i))
            .collect();
        let mut splits = BTreeMap::new();
        for &task in &cfg.tasks {
            splits.insert(task, split(&records, task, DEFAULT_RATIOS, cfg.seed)?);
        }
        let profile = ClientProfile {
            client_id: id,
            schema,
            n_patients,
            label_prior,
            dropped_event_types: dropped,
            excluded_descriptions,
            code_vocab,
        };
        out.push(ClientDataset { profile, records, splits });
    }
    Ok(out)
}
