//! Byte-level byte-pair encoding.
//!
//! Ids `0` and `1` are the padding and unknown specials, ids `2..258` are the
//! 256 single bytes, and every merge appends one id after that. Because all
//! bytes are present, tokenization is total and never emits [`UNK`].
//!
//! Text is pre-split before every space, so a chunk is an optional leading
//! space followed by non-space bytes. Merges never cross chunk boundaries.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
/// Id of byte `0x00`; byte `b` has id `BYTE_OFFSET + b`.
pub const BYTE_OFFSET: u32 = 2;
const BYTE_COUNT: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizerVocab {
    tokens: Vec<Vec<u8>>,
    merges: Vec<(u32, u32)>,
    ranks: BTreeMap<(u32, u32), u32>,
}

impl TokenizerVocab {
    /// A vocabulary holding only the specials and the byte alphabet.
    pub fn bytes_only() -> Self {
        let mut tokens = Vec::with_capacity(BYTE_OFFSET as usize + BYTE_COUNT);
        tokens.push(Vec::new());
        tokens.push(Vec::new());
        tokens.extend((0..=255u8).map(|b| alloc::vec![b]));
        Self {
            tokens,
            merges: Vec::new(),
            ranks: BTreeMap::new(),
        }
    }

    /// Rebuilds a vocabulary from its ordered merge list.
    pub fn from_merges(merges: Vec<(u32, u32)>) -> Result<Self> {
        let mut vocab = Self::bytes_only();
        for (left, right) in merges {
            vocab.push_merge(left, right)?;
        }
        Ok(vocab)
    }

    fn push_merge(&mut self, left: u32, right: u32) -> Result<u32> {
        let next = self.tokens.len() as u32;
        for id in [left, right] {
            if id < BYTE_OFFSET || id >= next {
                return Err(Error::InvalidVocab(alloc::format!(
                    "merge ({left}, {right}) references id {id} not defined before {next}"
                )));
            }
        }
        if self.ranks.contains_key(&(left, right)) {
            return Err(Error::InvalidVocab(alloc::format!("duplicate merge ({left}, {right})")));
        }
        let mut bytes = self.tokens[left as usize].clone();
        bytes.extend_from_slice(&self.tokens[right as usize]);
        self.tokens.push(bytes);
        self.ranks.insert((left, right), self.merges.len() as u32);
        self.merges.push((left, right));
        Ok(next)
    }

    /// Total number of ids, specials included.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Bytes of a token; empty for the specials.
    pub fn token_bytes(&self, id: u32) -> Option<&[u8]> {
        self.tokens.get(id as usize).map(Vec::as_slice)
    }

    pub fn tokens(&self) -> &[Vec<u8>] {
        &self.tokens
    }

    pub fn merges(&self) -> &[(u32, u32)] {
        &self.merges
    }

    /// Greedy application of merges in rank order, chunk by chunk.
    pub fn tokenize(&self, text: &str) -> TokenSequence {
        let mut ids = Vec::with_capacity(text.len());
        let mut work = Vec::new();
        for chunk in chunks(text.as_bytes()) {
            work.clear();
            work.extend(chunk.iter().map(|&b| BYTE_OFFSET + b as u32));
            self.apply_merges(&mut work);
            ids.extend_from_slice(&work);
        }
        TokenSequence { ids }
    }

    fn apply_merges(&self, word: &mut Vec<u32>) {
        while word.len() > 1 {
            let best = word
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0], w[1])).map(|&r| (r, (w[0], w[1]))))
                .min();
            let Some((rank, pair)) = best else { break };
            let merged = BYTE_OFFSET + BYTE_COUNT as u32 + rank;
            merge_pair(word, pair, merged);
        }
    }

    /// Concatenates token bytes back into text.
    pub fn detokenize(&self, ids: &[u32]) -> Result<String> {
        let mut bytes = Vec::new();
        for &id in ids {
            if id == PAD || id == UNK {
                return Err(Error::Decode(alloc::format!("special id {id} has no text")));
            }
            let tok = self.token_bytes(id).ok_or(Error::TokenOutOfRange {
                id,
                vocab_size: self.len(),
            })?;
            bytes.extend_from_slice(tok);
        }
        String::from_utf8(bytes).map_err(|e| Error::Decode(alloc::format!("{e}")))
    }
}

/// Splits before every space.
fn chunks(bytes: &[u8]) -> impl Iterator<Item = &[u8]> {
    let mut start = 0;
    core::iter::from_fn(move || {
        if start >= bytes.len() {
            return None;
        }
        let mut pos = start + 1;
        while pos < bytes.len() && bytes[pos] != b' ' {
            pos += 1;
        }
        let chunk = &bytes[start..pos];
        start = pos;
        Some(chunk)
    })
}

fn merge_pair(word: &mut Vec<u32>, pair: (u32, u32), merged: u32) {
    let mut out = 0;
    let mut i = 0;
    while i < word.len() {
        if i + 1 < word.len() && word[i] == pair.0 && word[i + 1] == pair.1 {
            word[out] = merged;
            i += 2;
        } else {
            word[out] = word[i];
            i += 1;
        }
        out += 1;
    }
    word.truncate(out);
}

/// Trains a vocabulary of at most `target_size` byte and merge tokens (the
/// two specials come on top). The most frequent adjacent pair is merged
/// first; count ties go to the lexicographically smallest `(left, right)`
/// bytes. Training stops early once every chunk is a single token.
pub fn train_vocab<S: AsRef<str>>(corpus: &[S], target_size: usize) -> Result<TokenizerVocab> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if target_size < BYTE_COUNT {
        return Err(Error::VocabTooSmall(target_size));
    }
    let mut counts: BTreeMap<&[u8], u64> = BTreeMap::new();
    for line in corpus {
        for chunk in chunks(line.as_ref().as_bytes()) {
            *counts.entry(chunk).or_default() += 1;
        }
    }
    let mut words: Vec<(Vec<u32>, u64)> = counts
        .into_iter()
        .map(|(chunk, n)| (chunk.iter().map(|&b| BYTE_OFFSET + b as u32).collect(), n))
        .collect();

    let mut vocab = TokenizerVocab::bytes_only();
    while vocab.len() - (BYTE_OFFSET as usize) < target_size {
        let mut pairs: BTreeMap<(u32, u32), u64> = BTreeMap::new();
        for (word, n) in &words {
            for w in word.windows(2) {
                *pairs.entry((w[0], w[1])).or_default() += n;
            }
        }
        let best = pairs
            .into_iter()
            .max_by(|a, b| {
                a.1.cmp(&b.1).then_with(|| {
                    let ka = (&vocab.tokens[a.0 .0 as usize], &vocab.tokens[a.0 .1 as usize]);
                    let kb = (&vocab.tokens[b.0 .0 as usize], &vocab.tokens[b.0 .1 as usize]);
                    kb.cmp(&ka)
                })
            });
        let Some(((left, right), _)) = best else { break };
        let merged = vocab.push_merge(left, right)?;
        for (word, _) in &mut words {
            merge_pair(word, (left, right), merged);
        }
    }
    Ok(vocab)
}
