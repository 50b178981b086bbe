//! Turns patient records into model inputs.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linearizer::{linearize_event, time_order, CodeDictionary, TokenSequence, TokenizerVocab};
use crate::model::{Hyperparams, Sample, Task};
use crate::synthdata::{ClientDataset, PatientRecord};

/// Linearizes and tokenizes the most recent events of a record.
pub fn encode_record(
    record: &PatientRecord,
    task: Task,
    dict: &CodeDictionary,
    vocab: &TokenizerVocab,
    hp: &Hyperparams,
) -> Result<Sample> {
    if record.events.is_empty() {
        return Err(Error::EmptyRecord);
    }
    let ordered = time_order(&record.events);
    let recent = &ordered[ordered.len().saturating_sub(hp.max_events_per_patient)..];
    let events = recent
        .iter()
        .map(|ev| {
            let mut toks = vocab.tokenize(linearize_event(ev, dict).as_str());
            toks.ids.truncate(hp.max_tokens_per_event);
            if toks.is_empty() {
                return Err(Error::EmptyEvent);
            }
            Ok(toks)
        })
        .collect::<Result<Vec<TokenSequence>>>()?;
    let labels = record.labels.vector(task).ok_or_else(|| {
        Error::InvalidArgument(alloc::format!("{} has no {} label", record.patient_id, task.name()))
    })?;
    Ok(Sample { events, labels })
}

/// One client's encoded train, validation and test samples for one task.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientTaskData {
    pub client_id: u32,
    pub train: Vec<Sample>,
    pub valid: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl ClientTaskData {
    pub fn n_train(&self) -> usize {
        self.train.len()
    }
}

pub fn encode_client(
    dataset: &ClientDataset,
    task: Task,
    dict: &CodeDictionary,
    vocab: &TokenizerVocab,
    hp: &Hyperparams,
) -> Result<ClientTaskData> {
    let split = dataset.splits.get(&task).ok_or_else(|| Error::Client {
        client: dataset.client_id(),
        reason: alloc::format!("no split for task {}", task.name()),
    })?;
    let encode = |idx: &[usize]| -> Result<Vec<Sample>> {
        idx.iter()
            .map(|&i| {
                let rec = dataset.records.get(i).ok_or_else(|| Error::Client {
                    client: dataset.client_id(),
                    reason: alloc::format!("split index {i} out of range"),
                })?;
                encode_record(rec, task, dict, vocab, hp)
            })
            .collect()
    };
    Ok(ClientTaskData {
        client_id: dataset.client_id(),
        train: encode(&split.train)?,
        valid: encode(&split.valid)?,
        test: encode(&split.test)?,
    })
}
