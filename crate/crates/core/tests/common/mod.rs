#![allow(dead_code)]

use unifl_core::encode::{encode_client, ClientTaskData};
use unifl_core::fl::{Method, MethodKind, TrainSettings};
use unifl_core::linearizer::{train_vocab, CodeDictionary, TokenizerVocab};
use unifl_core::model::Hyperparams;
use unifl_core::synthdata::{generate, tokenizer_corpus, ClientDataset, GeneratorConfig};
use unifl_core::Task;

pub struct Fixture {
    pub datasets: Vec<ClientDataset>,
    pub dict: CodeDictionary,
    pub vocab: TokenizerVocab,
}

pub fn small_generator(n_clients: usize) -> GeneratorConfig {
    GeneratorConfig {
        n_clients,
        size_ratio_max: 3.0,
        min_patients: 30,
        seed: 5,
        tasks: vec![Task::Los3, Task::Dx],
        events_per_patient: (3, 5),
        ..GeneratorConfig::default()
    }
}

pub fn fixture(cfg: &GeneratorConfig) -> Fixture {
    let datasets = generate(cfg).unwrap();
    let mut dict = CodeDictionary::new();
    for d in &datasets {
        dict.extend(&d.profile.code_vocab).unwrap();
    }
    let vocab = train_vocab(&tokenizer_corpus(), 320).unwrap();
    Fixture { datasets, dict, vocab }
}

pub fn hp(vocab_len: usize, task: Task) -> Hyperparams {
    Hyperparams {
        vocab_size: vocab_len,
        embed_dim: 6,
        hidden_dim: 5,
        max_tokens_per_event: 8,
        max_events_per_patient: 5,
        task,
        learning_rate: 0.2,
        batch_size: 8,
        layer_norm: true,
    }
}

pub fn clients(fx: &Fixture, hp: &Hyperparams) -> Vec<ClientTaskData> {
    fx.datasets
        .iter()
        .map(|d| encode_client(d, hp.task, &fx.dict, &fx.vocab, hp).unwrap())
        .collect()
}

pub fn settings(kind: MethodKind, mu: f64, hp: &Hyperparams, seed: u64, rounds: usize) -> TrainSettings {
    let mut s = TrainSettings::new(Method::with_mu(kind, mu), hp.clone(), seed);
    s.rounds = rounds;
    s.patience = 3;
    s
}
