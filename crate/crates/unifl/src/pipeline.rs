//! The operations behind each subcommand.

use std::path::{Path, PathBuf};

use serde::Serialize;
use unifl_core::encode::{encode_client, ClientTaskData};
use unifl_core::fl::{self, Executor, FlConfig, Method, RunOutcome, TrainSettings};
use unifl_core::linearizer::{train_vocab, CodeDictionary};
use unifl_core::metrics::{summarize, EvalReport, Summary};
use unifl_core::model::{
    backward_batch, compare_gradients, fixture_problem, numeric_gradient, GradCheckFixture, GradCheckReport,
    Hyperparams, Sample,
};
use unifl_core::synthdata::{generate, tokenizer_corpus};
use unifl_core::Task;

use crate::config::RunConfig;
use crate::dataset_io::{read_bundle, write_bundle, DataBundle};
use crate::error::{io, json, Error, Result};
use crate::results::{self, RESULTS_FILE};

pub const CONFIG_ECHO: &str = "config.json";

/// Generates clients and trains the shared tokenizer.
pub fn build_data(cfg: &RunConfig) -> Result<DataBundle> {
    let clients = generate(&cfg.generator)?;
    let mut dictionary = CodeDictionary::new();
    for c in &clients {
        dictionary.extend(&c.profile.code_vocab)?;
    }
    let vocab = train_vocab(&tokenizer_corpus(), cfg.model.vocab_size)?;
    Ok(DataBundle { clients, dictionary, vocab })
}

fn write_echo<T: Serialize>(value: &T, dir: &Path) -> Result<()> {
    let path = dir.join(CONFIG_ECHO);
    let text = serde_json::to_string_pretty(value).map_err(json(&path))?;
    std::fs::write(&path, text + "\n").map_err(io(&path))
}

/// Writes the data directory plus a config echo.
pub fn generate_data(cfg: &RunConfig, out: &Path) -> Result<DataBundle> {
    let bundle = build_data(cfg)?;
    write_bundle(&bundle, out)?;
    write_echo(cfg, out)?;
    log::info!("wrote {} clients to {}", bundle.clients.len(), out.display());
    Ok(bundle)
}

/// Reads a data directory, or generates it in memory when `dir` is absent.
pub fn load_or_build(cfg: &RunConfig, dir: Option<&Path>) -> Result<DataBundle> {
    match dir {
        Some(d) => read_bundle(d),
        None => build_data(cfg),
    }
}

pub fn encode_task(bundle: &DataBundle, cfg: &RunConfig, task: Task) -> Result<Vec<ClientTaskData>> {
    let hp = cfg.model.hyperparams(task, bundle.vocab.len());
    bundle
        .clients
        .iter()
        .map(|c| {
            encode_client(c, task, &bundle.dictionary, &bundle.vocab, &hp).map_err(|e| {
                Error::Core(unifl_core::Error::Client { client: c.client_id(), reason: e.to_string() })
            })
        })
        .collect()
}

/// Fully resolved description of a `train` invocation.
#[derive(Debug, Clone, Serialize)]
pub struct TrainEcho<'a> {
    pub config: &'a RunConfig,
    pub method: Method,
    pub task: Task,
    pub seeds: &'a [u64],
    pub hyperparams: Hyperparams,
}

/// One method on one task over several seeds.
pub struct TrainJob<'a> {
    pub cfg: &'a RunConfig,
    pub method: Method,
    pub task: Task,
    pub seeds: &'a [u64],
}

impl TrainJob<'_> {
    pub fn settings(&self, vocab_len: usize, seed: u64) -> TrainSettings {
        self.cfg.settings(self.method, self.task, vocab_len, seed)
    }

    pub fn run_dir(&self) -> PathBuf {
        self.cfg.runs_dir().join(self.task.name()).join(self.method.kind.cli_name())
    }
}

/// Runs every seed, writing histories, checkpoints and `results.csv` under
/// the job's run directory. Returns the test reports.
pub fn train<E: Executor>(
    job: &TrainJob<'_>,
    bundle: &DataBundle,
    clients: &[ClientTaskData],
    exec: &E,
) -> Result<Vec<EvalReport>> {
    let dir = job.run_dir();
    std::fs::create_dir_all(&dir).map_err(io(&dir))?;
    let vocab_len = bundle.vocab.len();
    write_echo(
        &TrainEcho {
            config: job.cfg,
            method: job.method,
            task: job.task,
            seeds: job.seeds,
            hyperparams: job.cfg.model.hyperparams(job.task, vocab_len),
        },
        &dir,
    )?;
    let mut reports = Vec::new();
    for &seed in job.seeds {
        let settings = job.settings(vocab_len, seed);
        let outcome = fl::run(FlConfig { clients, settings: &settings }, exec)?;
        write_outcome(&outcome, clients, &dir.join(format!("seed_{seed}")))?;
        let r = outcome.reports(job.task);
        log::info!(
            "{} {} seed {seed}: mean test AUPRC {:.4}",
            job.task.name(),
            job.method.kind.label(),
            r.iter().map(|x| x.auprc).sum::<f64>() / r.len() as f64
        );
        reports.extend(r);
    }
    results::write_reports(&reports, &dir.join(RESULTS_FILE))?;
    Ok(reports)
}

/// Shared models are written once; personalized ones per client.
fn write_outcome(outcome: &RunOutcome, clients: &[ClientTaskData], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    results::save_history(&outcome.histories, &dir.join("history.json"))?;
    let shared = outcome.models.windows(2).all(|w| w[0] == w[1]) && outcome.histories.len() == 1;
    if shared {
        results::save_checkpoint(&outcome.models[0], &dir.join("model.json"))?;
    } else {
        for (m, c) in outcome.models.iter().zip(clients) {
            results::save_checkpoint(m, &dir.join(format!("client_{}.json", c.client_id)))?;
        }
    }
    Ok(())
}

/// Summary of every `results.csv` under `runs`.
pub fn summarize_runs(runs: &Path) -> Result<Summary> {
    let mut reports = Vec::new();
    for p in results::find_results(runs)? {
        reports.extend(results::read_reports(&p)?);
    }
    Ok(summarize(&reports)?)
}

/// Writes `summary.csv`-style output and a text table next to it.
pub fn write_summary(summary: &Summary, out: &Path) -> Result<String> {
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io(parent))?;
    }
    std::fs::write(out, results::summary_csv(summary)).map_err(io(out))?;
    let table = results::summary_table(summary);
    let txt = out.with_extension("txt");
    std::fs::write(&txt, &table).map_err(io(&txt))?;
    Ok(table)
}

/// Built-in fixtures: one per head width, with and without layer norm.
pub fn default_fixtures() -> Vec<GradCheckFixture> {
    let base = Hyperparams {
        vocab_size: 24,
        embed_dim: 5,
        hidden_dim: 4,
        max_tokens_per_event: 6,
        max_events_per_patient: 4,
        ..Hyperparams::default()
    };
    vec![
        GradCheckFixture { hp: Hyperparams { task: Task::Los3, ..base.clone() }, seed: 1 },
        GradCheckFixture { hp: Hyperparams { task: Task::Dx, ..base.clone() }, seed: 2 },
        GradCheckFixture { hp: Hyperparams { task: Task::Mort, layer_norm: false, ..base }, seed: 3 },
    ]
}

/// Gradient check of one fixture. With `corrupt`, one analytic gradient
/// entry is perturbed first, which must make the check fail.
pub fn gradcheck_fixture(fx: &GradCheckFixture, tolerance: f64, corrupt: bool) -> Result<GradCheckReport> {
    let (params, samples) = fixture_problem(&fx.hp, fx.seed)?;
    let refs: Vec<&Sample> = samples.iter().collect();
    let (_, mut analytic) = backward_batch(&refs, &params, &fx.hp)?;
    if corrupt {
        let bias = analytic
            .get_mut("head.bias")
            .ok_or_else(|| Error::Usage("model has no head bias".into()))?;
        bias.values[0] += 0.01 + bias.values[0].abs();
    }
    let numeric = numeric_gradient(&samples, &params, &fx.hp)?;
    Ok(compare_gradients(&analytic, &numeric, tolerance)?)
}
