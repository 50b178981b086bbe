//! Synthetic heterogeneous, non-i.i.d. clients.
//!
//! Each patient has a latent risk `r ~ U(0, 1)`. Events carry descriptions
//! whose risk class (high, low, neutral) depends on `r`, and labels are
//! `Bernoulli(sigmoid(a r + b))` with a client- and task-specific offset `b`
//! that sets the client's label prior. Clients differ in schema (event and
//! field names, field order), in their code strings for the same
//! descriptions, in size, in label priors, in which descriptions they ever
//! record, and optionally in whole missing event types.

mod catalog;
mod generator;
mod split;

pub use catalog::{EventKind, EventLayout, SchemaVariant, Signal, DESCRIPTIONS};
pub use generator::{generate, offset_for_prior, tokenizer_corpus, DropRule, GeneratorConfig};
pub use split::{split, stratified_split, SplitSpec, DEFAULT_RATIOS};

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::linearizer::{CodeDictionary, MedicalEvent};
use crate::model::{Task, DX_CATEGORIES};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Labels {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dx: Option<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub los3: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub los7: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mort: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readm: Option<u8>,
}

impl Labels {
    /// The label vector for a task, as the model consumes it.
    pub fn vector(&self, task: Task) -> Option<Vec<f64>> {
        let bit = |b: &Option<u8>| b.map(|v| alloc::vec![v as f64]);
        match task {
            Task::Dx => self.dx.as_ref().map(|v| v.iter().map(|&b| b as f64).collect()),
            Task::Los3 => bit(&self.los3),
            Task::Los7 => bit(&self.los7),
            Task::Mort => bit(&self.mort),
            Task::Readm => bit(&self.readm),
        }
    }

    /// Stratification key: the label itself, or "any diagnosis" for Dx.
    pub fn stratum(&self, task: Task) -> Option<bool> {
        match task {
            Task::Dx => self.dx.as_ref().map(|v| v.contains(&1)),
            Task::Los3 => self.los3.map(|b| b == 1),
            Task::Los7 => self.los7.map(|b| b == 1),
            Task::Mort => self.mort.map(|b| b == 1),
            Task::Readm => self.readm.map(|b| b == 1),
        }
    }

    pub(crate) fn set(&mut self, task: Task, bits: Vec<u8>) {
        match task {
            Task::Dx => {
                debug_assert_eq!(bits.len(), DX_CATEGORIES);
                self.dx = Some(bits);
            }
            Task::Los3 => self.los3 = Some(bits[0]),
            Task::Los7 => self.los7 = Some(bits[0]),
            Task::Mort => self.mort = Some(bits[0]),
            Task::Readm => self.readm = Some(bits[0]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatientRecord {
    pub patient_id: String,
    pub client_id: u32,
    /// Time-ordered events.
    pub events: Vec<MedicalEvent>,
    pub labels: Labels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientProfile {
    pub client_id: u32,
    pub schema: SchemaVariant,
    pub n_patients: usize,
    /// Configured prevalence per task (18 entries for Dx).
    pub label_prior: BTreeMap<Task, Vec<f64>>,
    pub dropped_event_types: Vec<EventKind>,
    /// Pool descriptions this client never records.
    pub excluded_descriptions: Vec<String>,
    pub code_vocab: CodeDictionary,
}

/// One client's records, profile and per-task splits.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientDataset {
    pub profile: ClientProfile,
    pub records: Vec<PatientRecord>,
    pub splits: BTreeMap<Task, SplitSpec>,
}

impl ClientDataset {
    pub fn client_id(&self) -> u32 {
        self.profile.client_id
    }
}
