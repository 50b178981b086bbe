//! Generated-data directory: per-client JSONL records, profiles, splits,
//! the shared code dictionary and the tokenizer vocabulary.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use unifl_core::linearizer::{CodeDictionary, TokenizerVocab};
use unifl_core::synthdata::{ClientDataset, ClientProfile, PatientRecord, SplitSpec};
use unifl_core::Task;

use crate::error::{io, json, Error, Result};
use crate::vocab_file;

pub const VOCAB_FILE: &str = "vocab.txt";
pub const DICTIONARY_FILE: &str = "dictionary.tsv";
pub const CLIENTS_FILE: &str = "clients.json";
pub const SPLITS_FILE: &str = "splits.json";
const DICTIONARY_HEADER: &str = "code\tdescription\tdomain_tag";

pub fn records_file(client_id: u32) -> String {
    format!("client_{client_id}.jsonl")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClientSplits {
    client: u32,
    splits: BTreeMap<Task, SplitSpec>,
}

/// Everything `train` needs from a data directory.
#[derive(Debug, Clone, PartialEq)]
pub struct DataBundle {
    pub clients: Vec<ClientDataset>,
    pub dictionary: CodeDictionary,
    pub vocab: TokenizerVocab,
}

pub fn dictionary_to_tsv(dict: &CodeDictionary) -> String {
    let mut out = String::from(DICTIONARY_HEADER);
    out.push('\n');
    for (code, e) in dict.iter() {
        out.push_str(&format!("{code}\t{}\t{}\n", e.description, e.domain_tag));
    }
    out
}

pub fn dictionary_from_tsv(text: &str, path: &Path) -> Result<CodeDictionary> {
    let fail = |line: usize, reason: String| Error::Format { path: path.to_path_buf(), line, reason };
    let mut dict = CodeDictionary::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 && line == DICTIONARY_HEADER {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let [code, description, tag] = cols[..] else {
            return Err(fail(i + 1, format!("expected 3 tab-separated columns, found {}", cols.len())));
        };
        dict.insert(code, description, tag).map_err(|e| fail(i + 1, e.to_string()))?;
    }
    Ok(dict)
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(json(path))?;
    text.push('\n');
    std::fs::write(path, text).map_err(io(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(json(path))
}

pub fn write_records(records: &[PatientRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(io(path))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(json(path))?;
        w.write_all(b"\n").map_err(io(path))?;
    }
    w.flush().map_err(io(path))
}

pub fn read_records(path: &Path) -> Result<Vec<PatientRecord>> {
    let file = std::fs::File::open(path).map_err(io(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Writes a whole data directory, creating it if needed.
pub fn write_bundle(bundle: &DataBundle, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    vocab_file::save(&bundle.vocab, &dir.join(VOCAB_FILE))?;
    let dict_path = dir.join(DICTIONARY_FILE);
    std::fs::write(&dict_path, dictionary_to_tsv(&bundle.dictionary)).map_err(io(&dict_path))?;
    let profiles: Vec<&ClientProfile> = bundle.clients.iter().map(|c| &c.profile).collect();
    write_json(&profiles, &dir.join(CLIENTS_FILE))?;
    let splits: Vec<ClientSplits> = bundle
        .clients
        .iter()
        .map(|c| ClientSplits { client: c.client_id(), splits: c.splits.clone() })
        .collect();
    write_json(&splits, &dir.join(SPLITS_FILE))?;
    for c in &bundle.clients {
        write_records(&c.records, &dir.join(records_file(c.client_id())))?;
    }
    Ok(())
}

fn check_split(path: &Path, client: u32, task: Task, spec: &SplitSpec, n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in spec.parts().into_iter().flatten() {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(Error::Config(format!(
                "{}: client {client} {} split has bad or repeated index {i}",
                path.display(),
                task.name()
            )));
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Config(format!(
            "{}: client {client} {} split does not cover every record",
            path.display(),
            task.name()
        )));
    }
    Ok(())
}

pub fn read_bundle(dir: &Path) -> Result<DataBundle> {
    let vocab = vocab_file::load(&dir.join(VOCAB_FILE))?;
    let dict_path = dir.join(DICTIONARY_FILE);
    let dict_text = std::fs::read_to_string(&dict_path).map_err(io(&dict_path))?;
    let dictionary = dictionary_from_tsv(&dict_text, &dict_path)?;
    let profiles: Vec<ClientProfile> = read_json(&dir.join(CLIENTS_FILE))?;
    let splits_path = dir.join(SPLITS_FILE);
    let mut splits: BTreeMap<u32, BTreeMap<Task, SplitSpec>> = read_json::<Vec<ClientSplits>>(&splits_path)?
        .into_iter()
        .map(|s| (s.client, s.splits))
        .collect();
    let mut clients = Vec::with_capacity(profiles.len());
    for profile in profiles {
        let id = profile.client_id;
        let path: PathBuf = dir.join(records_file(id));
        let records = read_records(&path)?;
        let client_splits = splits
            .remove(&id)
            .ok_or_else(|| Error::Config(format!("{}: no splits for client {id}", splits_path.display())))?;
        for (task, spec) in &client_splits {
            check_split(&splits_path, id, *task, spec, records.len())?;
        }
        clients.push(ClientDataset { profile, records, splits: client_splits });
    }
    Ok(DataBundle { clients, dictionary, vocab })
}
