//! Schema linearization: structured events become free text.
//!
//! An event is rendered as its type followed by every `(name, value)` feature
//! pair in order, with medical codes replaced by their descriptions. Two
//! hospitals that store the same measurement under different codes therefore
//! produce the same text.

mod bpe;

pub use bpe::{train_vocab, TokenSequence, TokenizerVocab, BYTE_OFFSET, PAD, UNK};

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Delimiter placed between linearized fields.
pub const DELIMITER: char = ' ';

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MedicalEvent {
    pub event_type: String,
    /// Ordered `(name, value)` pairs.
    pub features: Vec<(String, String)>,
    /// Minutes since admission.
    pub timestamp: u32,
}

impl MedicalEvent {
    pub fn new(event_type: impl Into<String>, timestamp: u32) -> Self {
        Self {
            event_type: event_type.into(),
            features: Vec::new(),
            timestamp,
        }
    }

    pub fn with(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.features.push((name.into(), value.into()));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DictEntry {
    pub description: String,
    pub domain_tag: String,
}

/// Medical-code to free-text description map.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeDictionary {
    entries: BTreeMap<String, DictEntry>,
}

impl CodeDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a code. Codes are unique and descriptions must be nonempty.
    pub fn insert(
        &mut self,
        code: impl Into<String>,
        description: impl Into<String>,
        domain_tag: impl Into<String>,
    ) -> Result<()> {
        let code = code.into();
        let description = description.into();
        if code.is_empty() {
            return Err(Error::Dictionary("empty code".into()));
        }
        if description.trim().is_empty() {
            return Err(Error::Dictionary(alloc::format!("code {code:?} has an empty description")));
        }
        if self.entries.contains_key(&code) {
            return Err(Error::Dictionary(alloc::format!("duplicate code {code:?}")));
        }
        self.entries.insert(
            code,
            DictEntry {
                description,
                domain_tag: domain_tag.into(),
            },
        );
        Ok(())
    }

    /// Merges another dictionary into this one, rejecting duplicate codes.
    pub fn extend(&mut self, other: &CodeDictionary) -> Result<()> {
        for (code, entry) in other.iter() {
            self.insert(code, entry.description.clone(), entry.domain_tag.clone())?;
        }
        Ok(())
    }

    pub fn get(&self, code: &str) -> Option<&DictEntry> {
        self.entries.get(code)
    }

    pub fn contains(&self, code: &str) -> bool {
        self.entries.contains_key(code)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in code order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &DictEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }
}

/// The linearized text of one event.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EventText(String);

impl EventText {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl core::fmt::Display for EventText {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Replaces a code with its description; anything else passes through.
pub fn describe_value<'a>(value: &'a str, dict: &'a CodeDictionary) -> &'a str {
    match dict.get(value) {
        Some(entry) => entry.description.as_str(),
        None => value,
    }
}

/// Lowercases and collapses whitespace runs to a single delimiter.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(DELIMITER);
        }
        out.push_str(&word.to_lowercase());
    }
    out
}

/// Renders `type name_1 value_1 name_2 value_2 ...`.
pub fn linearize_event(event: &MedicalEvent, dict: &CodeDictionary) -> EventText {
    let mut out = normalize(&event.event_type);
    let mut push = |part: &str| {
        let part = normalize(part);
        if part.is_empty() {
            return;
        }
        if !out.is_empty() {
            out.push(DELIMITER);
        }
        out.push_str(&part);
    };
    for (name, value) in &event.features {
        push(name);
        push(describe_value(value, dict));
    }
    EventText(out)
}

/// Sorts events by timestamp, ties broken by original position.
pub fn time_order(events: &[MedicalEvent]) -> Vec<&MedicalEvent> {
    let mut ordered: Vec<&MedicalEvent> = events.iter().collect();
    ordered.sort_by_key(|e| e.timestamp);
    ordered
}

/// Words a tokenizer corpus should contain for a schema: the event type and
/// its feature names, laid out the way they appear in linearized text.
pub fn schema_corpus_line(event_type: &str, feature_names: &[&str]) -> String {
    let mut line = normalize(event_type);
    for name in feature_names {
        line.push(DELIMITER);
        line.push_str(&normalize(name));
    }
    line
}

/// A description as it appears mid-sentence (after a feature name).
pub fn description_corpus_line(description: &str) -> String {
    let mut line = String::new();
    line.push(DELIMITER);
    line.push_str(&normalize(description));
    line
}

impl From<&str> for EventText {
    fn from(s: &str) -> Self {
        EventText(s.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    fn glucose_dict() -> CodeDictionary {
        let mut d = CodeDictionary::new();
        d.insert("50912", "Glucose", "mimic").unwrap();
        d
    }

    #[test]
    fn describe_value_substitutes_codes() {
        let d = glucose_dict();
        assert_eq!(describe_value("50912", &d), "Glucose");
        assert_eq!(describe_value("120", &d), "120");
        assert_eq!(describe_value("", &d), "");
    }

    #[test]
    fn linearize_lab_event() {
        let ev = MedicalEvent::new("labevents", 0)
            .with("itemid", "50912")
            .with("value", "120");
        assert_eq!(
            linearize_event(&ev, &glucose_dict()).as_str(),
            "labevents itemid glucose value 120"
        );
    }

    #[test]
    fn linearize_without_features() {
        let ev = MedicalEvent::new("x", 3);
        assert_eq!(linearize_event(&ev, &CodeDictionary::new()).as_str(), "x");
    }

    #[test]
    fn linearize_multiword_description() {
        let mut d = CodeDictionary::new();
        d.insert("D7", "heparin sodium", "mimic").unwrap();
        let ev = MedicalEvent::new("prescriptions", 0).with("drug", "D7");
        let expected = format!("{} {} {}", "prescriptions", "drug", "heparin sodium");
        assert_eq!(linearize_event(&ev, &d).as_str(), expected);
    }

    #[test]
    fn whitespace_is_collapsed_and_empty_fields_skipped() {
        let ev = MedicalEvent::new("  Lab  Events ", 0)
            .with("Item\tID", "")
            .with("v", " 1 ");
        let text = linearize_event(&ev, &CodeDictionary::new());
        assert_eq!(text.as_str(), "lab events item id v 1");
        assert!(!text.as_str().contains("  "));
    }

    #[test]
    fn different_codes_same_description_are_compatible() {
        let mut d = CodeDictionary::new();
        d.insert("50912", "Glucose", "mimic").unwrap();
        d.insert("L-77", "glucose", "eicu").unwrap();
        let a = MedicalEvent::new("lab", 5).with("name", "50912").with("result", "7");
        let b = MedicalEvent::new("lab", 9).with("name", "L-77").with("result", "7");
        assert_eq!(linearize_event(&a, &d), linearize_event(&b, &d));
    }

    #[test]
    fn dictionary_rejects_bad_entries() {
        let mut d = glucose_dict();
        assert!(d.insert("50912", "again", "x").is_err());
        assert!(d.insert("1", "  ", "x").is_err());
        assert!(d.insert("", "desc", "x").is_err());
    }

    #[test]
    fn time_order_is_stable() {
        let evs = vec![
            MedicalEvent::new("b", 10),
            MedicalEvent::new("a", 5),
            MedicalEvent::new("c", 10),
        ];
        let types: Vec<&str> = time_order(&evs).iter().map(|e| e.event_type.as_str()).collect();
        assert_eq!(types, ["a", "b", "c"]);
    }
}
