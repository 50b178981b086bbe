//! Hierarchical GRU predictor.
//!
//! Each event's tokens are embedded and run through an encoder GRU whose
//! layer-normalized final state is the event vector. The event vectors, in
//! time order, feed an aggregator GRU; its layer-normalized final state goes
//! through a linear head. Gradients are derived by hand.

mod gradcheck;
mod network;
mod optim;
mod params;

pub use gradcheck::{
    compare_gradients, fixture_problem, grad_check, numeric_gradient, relative_error, GradCheckFixture, GradCheckReport,
    TensorError, FD_STEP, REL_FLOOR,
};
pub use network::{
    backward, backward_batch, forward_event, forward_patient, EventCache, ForwardCache, Sample,
};
pub use optim::{bce_with_logits, loss, sgd_step, Prox};
pub use params::{init_params, ParamSet, ParamTensor};

use alloc::string::String;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of diagnosis categories predicted by the Dx task.
pub const DX_CATEGORIES: usize = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Dx,
    Los3,
    Los7,
    Mort,
    Readm,
}

impl Task {
    pub const ALL: [Task; 5] = [Task::Dx, Task::Los3, Task::Los7, Task::Mort, Task::Readm];

    pub fn head_dim(self) -> usize {
        match self {
            Task::Dx => DX_CATEGORIES,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Dx => "dx",
            Task::Los3 => "los3",
            Task::Los7 => "los7",
            Task::Mort => "mort",
            Task::Readm => "readm",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Task::Dx => "Dx",
            Task::Los3 => "LOS3",
            Task::Los7 => "LOS7",
            Task::Mort => "Mort",
            Task::Readm => "Readm",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl core::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(alloc::format!("unknown task {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub max_tokens_per_event: usize,
    pub max_events_per_patient: usize,
    pub task: Task,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Layer norm after each GRU. Without it the model has no norm-flagged
    /// tensors.
    pub layer_norm: bool,
}

impl Hyperparams {
    pub fn head_dim(&self) -> usize {
        self.task.head_dim()
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("vocab_size", self.vocab_size),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("max_tokens_per_event", self.max_tokens_per_event),
            ("max_events_per_patient", self.max_events_per_patient),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in sizes {
            if v == 0 {
                return Err(Error::Hyperparams(alloc::format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Hyperparams(String::from("learning_rate must be positive")));
        }
        Ok(())
    }
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            vocab_size: 2050,
            embed_dim: 64,
            hidden_dim: 64,
            max_tokens_per_event: 32,
            max_events_per_patient: 64,
            task: Task::Los3,
            learning_rate: 0.05,
            batch_size: 32,
            layer_norm: true,
        }
    }
}
