use alloc::string::ToString;
use alloc::vec::Vec;

use super::{
    aggregate_fedavg, aggregate_fedbn, local_train, ClientResult, ClientUpdate, EarlyStopper, Executor, FlConfig,
    MethodKind, RoundRecord, RunHistory, Schedule, TrainSettings,
};
use crate::encode::ClientTaskData;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalReport};
use crate::model::{init_params, ParamSet, Prox, Sample, Task};

/// Histories and kept checkpoints of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// One history for federated and centralized runs, one per client for
    /// Local.
    pub histories: Vec<RunHistory>,
    /// Kept checkpoint for each client, in client order.
    pub models: Vec<ParamSet>,
}

impl RunOutcome {
    /// One test report per client.
    pub fn reports(&self, task: Task) -> Vec<EvalReport> {
        self.histories
            .iter()
            .flat_map(|h| {
                h.test.iter().map(move |c| EvalReport {
                    task,
                    client: c.client,
                    method: h.method.clone(),
                    seed: h.seed,
                    auprc: c.auprc,
                    n_samples: c.n_samples,
                    rounds_used: h.rounds_used,
                })
            })
            .collect()
    }
}

fn client_err(client: &ClientTaskData, e: Error) -> Error {
    match e {
        e @ Error::Client { .. } => e,
        e => Error::Client { client: client.client_id, reason: e.to_string() },
    }
}

fn check_clients(clients: &[ClientTaskData]) -> Result<()> {
    if clients.is_empty() {
        return Err(Error::Config("no clients".into()));
    }
    for (i, c) in clients.iter().enumerate() {
        if clients[..i].iter().any(|o| o.client_id == c.client_id) {
            return Err(Error::Config(alloc::format!("duplicate client id {}", c.client_id)));
        }
        for (name, part) in [("train", &c.train), ("valid", &c.valid), ("test", &c.test)] {
            if part.is_empty() {
                return Err(Error::Client { client: c.client_id, reason: alloc::format!("empty {name} split") });
            }
        }
    }
    Ok(())
}

fn is_eval_round(s: &TrainSettings, round: usize) -> bool {
    round.is_multiple_of(s.eval_every) || round == s.rounds
}

fn test_results<E: Executor>(
    exec: &E,
    clients: &[ClientTaskData],
    models: &[ParamSet],
    s: &TrainSettings,
) -> Result<Vec<ClientResult>> {
    exec.map(clients.len(), |k| {
        let c = &clients[k];
        evaluate(&models[k], &c.test, &s.hp, s.averaging)
            .map(|auprc| ClientResult { client: c.client_id, auprc, n_samples: c.test.len() })
            .map_err(|e| client_err(c, e))
    })
    .into_iter()
    .collect()
}

/// Dispatches on the configured method.
pub fn run<E: Executor>(cfg: FlConfig<'_>, exec: &E) -> Result<RunOutcome> {
    match cfg.settings.method.kind {
        MethodKind::Local => run_local(cfg, exec),
        MethodKind::Centralized => run_centralized(cfg, exec),
        _ => run_federated(cfg, exec),
    }
}

/// Like [`run`], calling `observer(round, models)` after every round's
/// update (per-client models; a single model for FedAvg-style and pooled
/// runs). Local runs clients one after another, restarting the round count
/// for each.
pub fn run_observed<E: Executor>(
    cfg: FlConfig<'_>,
    exec: &E,
    observer: &mut dyn FnMut(usize, &[ParamSet]),
) -> Result<RunOutcome> {
    match cfg.settings.method.kind {
        MethodKind::Local => {
            cfg.settings.validate()?;
            check_clients(cfg.clients)?;
            let mut out = RunOutcome { histories: Vec::new(), models: Vec::new() };
            for c in cfg.clients {
                let (h, m) = pooled(core::slice::from_ref(c), cfg.settings, false, exec, observer)?;
                out.histories.push(h);
                out.models.extend(m);
            }
            Ok(out)
        }
        MethodKind::Centralized => {
            cfg.settings.validate()?;
            check_clients(cfg.clients)?;
            let (h, models) = pooled(cfg.clients, cfg.settings, cfg.settings.literal_shuffle, exec, observer)?;
            Ok(RunOutcome { histories: alloc::vec![h], models })
        }
        _ => federated(cfg, exec, observer),
    }
}

/// Each client trains on its own data only.
pub fn run_local<E: Executor>(cfg: FlConfig<'_>, exec: &E) -> Result<RunOutcome> {
    cfg.settings.validate()?;
    check_clients(cfg.clients)?;
    let runs = exec.map(cfg.clients.len(), |k| {
        let c = core::slice::from_ref(&cfg.clients[k]);
        pooled(c, cfg.settings, false, &super::Sequential, &mut |_, _| {})
    });
    let mut out = RunOutcome { histories: Vec::new(), models: Vec::new() };
    for r in runs {
        let (h, m) = r?;
        out.histories.push(h);
        out.models.extend(m);
    }
    Ok(out)
}

/// One model trained on the union of all clients' training data.
pub fn run_centralized<E: Executor>(cfg: FlConfig<'_>, exec: &E) -> Result<RunOutcome> {
    cfg.settings.validate()?;
    check_clients(cfg.clients)?;
    let (h, models) = pooled(cfg.clients, cfg.settings, cfg.settings.literal_shuffle, exec, &mut |_, _| {})?;
    Ok(RunOutcome { histories: alloc::vec![h], models })
}

/// Federated rounds: broadcast, parallel local training, aggregation.
pub fn run_federated<E: Executor>(cfg: FlConfig<'_>, exec: &E) -> Result<RunOutcome> {
    federated(cfg, exec, &mut |_, _| {})
}

/// Training on pooled data; with a single client this is the Local regime.
/// The shuffle stream is keyed on the first client's id.
fn pooled<E: Executor>(
    clients: &[ClientTaskData],
    s: &TrainSettings,
    literal_shuffle: bool,
    exec: &E,
    observer: &mut dyn FnMut(usize, &[ParamSet]),
) -> Result<(RunHistory, Vec<ParamSet>)> {
    let label = if clients.len() == 1 && s.method.kind == MethodKind::Local {
        MethodKind::Local.label()
    } else {
        s.method.kind.label()
    };
    let wrap = |e: Error| if clients.len() == 1 { client_err(&clients[0], e) } else { e };
    let train: Vec<Sample> = clients.iter().flat_map(|c| c.train.iter().cloned()).collect();
    let valid: Vec<Sample> = clients.iter().flat_map(|c| c.valid.iter().cloned()).collect();
    let stream_id = clients[0].client_id;
    let mut params = init_params(&s.hp, s.seed)?;
    let mut stopper = EarlyStopper::new(s.patience);
    let mut best = params.clone();
    let mut rounds = Vec::new();
    let mut stop_round = None;
    for t in 0..s.rounds {
        let round = t + 1;
        let sched = Schedule {
            seed: s.seed,
            stream: stream_id,
            first_epoch: t * s.local_epochs,
            epochs: s.local_epochs,
            literal_shuffle,
        };
        let step = local_train(&params, &train, &s.hp, &sched, None).map_err(wrap)?;
        params = step.params;
        observer(round, core::slice::from_ref(&params));
        let mut rec = RoundRecord { round, train_loss: step.mean_loss, val_auprc: None, val_score: None };
        if is_eval_round(s, round) {
            let v = evaluate(&params, &valid, &s.hp, s.averaging).map_err(wrap)?;
            rec.val_auprc = Some(alloc::vec![v]);
            rec.val_score = Some(v);
            let d = stopper.observe(v, round);
            if d.improved {
                best.clone_from(&params);
            }
            rounds.push(rec);
            if d.stop && round < s.rounds {
                stop_round = Some(round);
                break;
            }
        } else {
            rounds.push(rec);
        }
    }
    let models = alloc::vec![best; clients.len()];
    let test = test_results(exec, clients, &models, s)?;
    let (best_score, best_round) = stopper.best().unwrap_or((f64::NAN, 0));
    let history = RunHistory {
        method: label.into(),
        seed: s.seed,
        clients: clients.iter().map(|c| c.client_id).collect(),
        rounds_used: rounds.len(),
        rounds,
        best_round,
        best_score,
        stop_round,
        test,
    };
    Ok((history, models))
}

fn federated<E: Executor>(
    cfg: FlConfig<'_>,
    exec: &E,
    observer: &mut dyn FnMut(usize, &[ParamSet]),
) -> Result<RunOutcome> {
    let s = cfg.settings;
    let clients = cfg.clients;
    s.validate()?;
    check_clients(clients)?;
    let kind = s.method.kind;
    if !kind.is_federated() {
        return Err(Error::Config(alloc::format!("{} is not a federated method", kind.label())));
    }
    let n = clients.len();
    let init = init_params(&s.hp, s.seed)?;
    // FedAvg-style methods hold one global model; FedBN-style one per client.
    let mut models: Vec<ParamSet> = if kind.personalizes_norm() { alloc::vec![init; n] } else { alloc::vec![init] };
    let model_for = |models: &[ParamSet], k: usize| if models.len() == 1 { 0 } else { k };
    let mu = s.method.effective_mu();
    let include_norm = s.prox_norm();
    let mut stopper = EarlyStopper::new(s.patience);
    let mut best = models.clone();
    let mut rounds = Vec::new();
    let mut stop_round = None;
    for t in 0..s.rounds {
        let round = t + 1;
        let results = exec.map(n, |k| {
            let c = &clients[k];
            let start = &models[model_for(&models, k)];
            let sched = Schedule {
                seed: s.seed,
                stream: c.client_id,
                first_epoch: t * s.local_epochs,
                epochs: s.local_epochs,
                literal_shuffle: false,
            };
            let prox = kind.uses_prox().then_some(Prox { mu, anchor: start, include_norm });
            local_train(start, &c.train, &s.hp, &sched, prox).map_err(|e| client_err(c, e))
        });
        let results: Vec<_> = results.into_iter().collect::<Result<_>>()?;
        let updates: Vec<ClientUpdate<'_>> = results
            .iter()
            .zip(clients)
            .map(|(r, c)| ClientUpdate { params: &r.params, n_samples: c.n_train() })
            .collect();
        models = if kind.personalizes_norm() {
            aggregate_fedbn(&updates, s.weighting)?
        } else {
            alloc::vec![aggregate_fedavg(&updates, s.weighting)?]
        };
        observer(round, &models);
        let train_loss = results.iter().map(|r| r.mean_loss).sum::<f64>() / n as f64;
        let mut rec = RoundRecord { round, train_loss, val_auprc: None, val_score: None };
        if is_eval_round(s, round) {
            let vals: Vec<f64> = exec
                .map(n, |k| {
                    let c = &clients[k];
                    evaluate(&models[model_for(&models, k)], &c.valid, &s.hp, s.averaging)
                        .map_err(|e| client_err(c, e))
                })
                .into_iter()
                .collect::<Result<_>>()?;
            let score = vals.iter().sum::<f64>() / n as f64;
            rec.val_auprc = Some(vals);
            rec.val_score = Some(score);
            let d = stopper.observe(score, round);
            if d.improved {
                best.clone_from(&models);
            }
            rounds.push(rec);
            if d.stop && round < s.rounds {
                stop_round = Some(round);
                break;
            }
        } else {
            rounds.push(rec);
        }
    }
    let per_client: Vec<ParamSet> = (0..n).map(|k| best[model_for(&best, k)].clone()).collect();
    let test = test_results(exec, clients, &per_client, s)?;
    let (best_score, best_round) = stopper.best().unwrap_or((f64::NAN, 0));
    let history = RunHistory {
        method: kind.label().into(),
        seed: s.seed,
        clients: clients.iter().map(|c| c.client_id).collect(),
        rounds_used: rounds.len(),
        rounds,
        best_round,
        best_score,
        stop_round,
        test,
    };
    Ok(RunOutcome { histories: alloc::vec![history], models: per_client })
}
