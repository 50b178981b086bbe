//! Local, centralized and federated training regimes.
//!
//! Federated rounds are fork-join: every client trains from its broadcast
//! parameters on an [`Executor`], then aggregation runs single-threaded over
//! the returned snapshots. Each client's shuffles come from a stream keyed on
//! `(seed, client_id, epoch)`, so results never depend on scheduling.

mod aggregate;
mod early_stop;
mod runner;
mod train;

pub use aggregate::{aggregate_fedavg, aggregate_fedbn, ClientUpdate, Weighting};
pub use early_stop::{early_stop, EarlyStopper, StopDecision};
pub use runner::{run, run_centralized, run_federated, run_local, run_observed, RunOutcome};
pub use train::{batches, epoch_order, local_train, LocalResult, Schedule};

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::encode::ClientTaskData;
use crate::error::{Error, Result};
use crate::metrics::Averaging;
use crate::model::Hyperparams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Local,
    Centralized,
    FedAvg,
    FedProx,
    FedBN,
    FedPxN,
}

impl MethodKind {
    pub const ALL: [MethodKind; 6] = [
        MethodKind::Local,
        MethodKind::FedAvg,
        MethodKind::FedProx,
        MethodKind::FedBN,
        MethodKind::FedPxN,
        MethodKind::Centralized,
    ];

    /// Label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            MethodKind::Local => "Local",
            MethodKind::Centralized => "Centralized",
            MethodKind::FedAvg => "FedAvg",
            MethodKind::FedProx => "FedProx",
            MethodKind::FedBN => "FedBN",
            MethodKind::FedPxN => "FedPxN",
        }
    }

    pub fn cli_name(self) -> &'static str {
        match self {
            MethodKind::Local => "local",
            MethodKind::Centralized => "centralized",
            MethodKind::FedAvg => "fedavg",
            MethodKind::FedProx => "fedprox",
            MethodKind::FedBN => "fedbn",
            MethodKind::FedPxN => "fedpxn",
        }
    }

    pub fn is_federated(self) -> bool {
        matches!(self, MethodKind::FedAvg | MethodKind::FedProx | MethodKind::FedBN | MethodKind::FedPxN)
    }

    /// FedBN-style aggregation that keeps norm tensors client-local.
    pub fn personalizes_norm(self) -> bool {
        matches!(self, MethodKind::FedBN | MethodKind::FedPxN)
    }

    pub fn uses_prox(self) -> bool {
        matches!(self, MethodKind::FedProx | MethodKind::FedPxN)
    }
}

impl core::str::FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodKind::ALL
            .into_iter()
            .find(|m| m.cli_name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(alloc::format!("unknown method {s:?}")))
    }
}

/// A training regime plus its proximal strength (ignored unless FedProx or
/// FedPxN).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Method {
    pub kind: MethodKind,
    pub mu: f64,
}

impl Method {
    pub const DEFAULT_MU: f64 = 0.01;

    pub fn new(kind: MethodKind) -> Self {
        Self { kind, mu: Self::DEFAULT_MU }
    }

    pub fn with_mu(kind: MethodKind, mu: f64) -> Self {
        Self { kind, mu }
    }

    pub fn effective_mu(&self) -> f64 {
        if self.kind.uses_prox() {
            self.mu
        } else {
            0.0
        }
    }
}

/// Everything about a run except the client data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub method: Method,
    pub hp: Hyperparams,
    /// Communication rounds, or epochs for Local and Centralized.
    pub rounds: usize,
    pub local_epochs: usize,
    pub seed: u64,
    pub patience: usize,
    pub eval_every: usize,
    pub weighting: Weighting,
    /// Whether the proximal term also pulls norm tensors. Defaults to `true`
    /// for FedProx and `false` for FedPxN.
    pub prox_includes_norm: Option<bool>,
    /// Centralized only: shuffle the pooled data once instead of every epoch.
    pub literal_shuffle: bool,
    pub averaging: Averaging,
}

impl TrainSettings {
    pub fn new(method: Method, hp: Hyperparams, seed: u64) -> Self {
        Self {
            method,
            hp,
            rounds: 30,
            local_epochs: 1,
            seed,
            patience: 5,
            eval_every: 1,
            weighting: Weighting::Size,
            prox_includes_norm: None,
            literal_shuffle: false,
            averaging: Averaging::Micro,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.hp.validate()?;
        let fail = |m: &str| Err(Error::Config(m.into()));
        if self.rounds == 0 {
            return fail("rounds must be at least 1");
        }
        if self.local_epochs == 0 {
            return fail("local_epochs must be at least 1");
        }
        if self.patience == 0 {
            return fail("patience must be at least 1");
        }
        if self.eval_every == 0 {
            return fail("eval_every must be at least 1");
        }
        if !(self.method.mu >= 0.0) {
            return fail("mu must be non-negative");
        }
        Ok(())
    }

    pub fn prox_norm(&self) -> bool {
        self.prox_includes_norm
            .unwrap_or(self.method.kind != MethodKind::FedPxN)
    }
}

/// A run: settings plus the participating clients.
#[derive(Debug, Clone, Copy)]
pub struct FlConfig<'a> {
    pub clients: &'a [ClientTaskData],
    pub settings: &'a TrainSettings,
}

/// Runs per-client jobs. Implementations may run them in any order or in
/// parallel, but must return results in index order.
pub trait Executor: Sync {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync;
}

/// Runs jobs one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        (0..n).map(f).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based round (or epoch) index.
    pub round: usize,
    pub train_loss: f64,
    /// Present on evaluation rounds: one value per client, or one pooled
    /// value for Centralized.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_auprc: Option<Vec<f64>>,
    /// Early-stopping criterion on evaluation rounds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientResult {
    pub client: u32,
    pub auprc: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHistory {
    pub method: String,
    pub seed: u64,
    pub clients: Vec<u32>,
    pub rounds: Vec<RoundRecord>,
    /// Round whose checkpoint was kept.
    pub best_round: usize,
    pub best_score: f64,
    /// Set when early stopping ended the run before the round budget.
    pub stop_round: Option<usize>,
    pub rounds_used: usize,
    /// Test AUPRC of the kept checkpoint, per client.
    pub test: Vec<ClientResult>,
}
