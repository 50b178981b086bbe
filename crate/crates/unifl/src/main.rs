use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use unifl::pipeline::{self, TrainJob};
use unifl::{Error, RayonExecutor, Result, RunConfig};
use unifl_core::fl::MethodKind;
use unifl_core::model::GradCheckFixture;
use unifl_core::Task;

#[derive(Parser)]
#[command(name = "unifl", version, about = "Federated learning over heterogeneous synthetic EHR clients")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate per-client records, dictionary, splits and vocabulary.
    GenerateData {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to `<output_dir>/data`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one or more methods on a task for every seed.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// `local|centralized|fedavg|fedprox|fedbn|fedpxn`, a comma list, or `all`.
        #[arg(long)]
        method: String,
        /// `dx|los3|los7|mort|readm`.
        #[arg(long)]
        task: Task,
        /// Comma-separated seeds overriding the config.
        #[arg(long, value_delimiter = ',')]
        seed_list: Option<Vec<u64>>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Shuffle pooled data once instead of every epoch (Centralized).
        #[arg(long)]
        literal_shuffle: bool,
        #[arg(long)]
        mu: Option<f64>,
        /// Data directory; defaults to `<output_dir>/data`.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Aggregate every results.csv under a directory.
    Summarize {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check analytic gradients against finite differences.
    Gradcheck {
        /// JSON list of `{hp, seed}` fixtures; built-in ones otherwise.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        /// Perturb the analytic gradient first (negative control).
        #[arg(long)]
        corrupt: bool,
    },
}

fn parse_methods(s: &str) -> Result<Vec<MethodKind>> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(MethodKind::ALL.to_vec());
    }
    s.split(',').map(|m| m.trim().parse::<MethodKind>().map_err(Error::from)).collect()
}

fn data_dir(cfg: &RunConfig, explicit: Option<PathBuf>) -> PathBuf {
    explicit.unwrap_or_else(|| cfg.data_dir())
}

fn load_fixtures(path: &Path) -> Result<Vec<GradCheckFixture>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.into(), source })
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::GenerateData { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let out = data_dir(&cfg, out);
            pipeline::generate_data(&cfg, &out)?;
            println!("{}", out.display());
            Ok(true)
        }
        Command::Train { config, method, task, seed_list, workers, literal_shuffle, mu, data } => {
            let mut cfg = RunConfig::load(&config)?;
            if literal_shuffle {
                cfg.fl.literal_shuffle = true;
            }
            if let Some(seeds) = seed_list {
                cfg.seeds = seeds;
            }
            cfg.validate()?;
            let methods = parse_methods(&method)?;
            let bundle = unifl::dataset_io::read_bundle(&data_dir(&cfg, data))?;
            let clients = pipeline::encode_task(&bundle, &cfg, task)?;
            let exec = RayonExecutor::new(workers)?;
            for kind in methods {
                let job = TrainJob { cfg: &cfg, method: cfg.method(kind, mu), task, seeds: &cfg.seeds };
                pipeline::train(&job, &bundle, &clients, &exec)?;
                println!("{}", job.run_dir().display());
            }
            Ok(true)
        }
        Command::Summarize { runs, out } => {
            let summary = pipeline::summarize_runs(&runs)?;
            print!("{}", pipeline::write_summary(&summary, &out)?);
            Ok(true)
        }
        Command::Gradcheck { fixtures, tolerance, corrupt } => {
            let fixtures = match fixtures {
                Some(p) => load_fixtures(&p)?,
                None => pipeline::default_fixtures(),
            };
            let mut all = true;
            for (i, fx) in fixtures.iter().enumerate() {
                let r = pipeline::gradcheck_fixture(fx, tolerance, corrupt)?;
                println!(
                    "fixture {i} ({} seed {}): worst relative error {:.3e} in {} -> {}",
                    fx.hp.task.name(),
                    fx.seed,
                    r.worst_rel_error,
                    r.worst_tensor,
                    if r.passed { "pass" } else { "FAIL" }
                );
                all &= r.passed;
            }
            Ok(all)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
