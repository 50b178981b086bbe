//! Tokenizer vocabulary as diff-able text.
//!
//! One line per token id: `<pad>`, `<unk>`, then the escaped bytes of every
//! byte and merged token. A `#merges` line follows, then one `left right`
//! id pair per merge, in rank order.

use std::fmt::Write as _;
use std::path::Path;

use unifl_core::linearizer::TokenizerVocab;

use crate::error::{io, Error, Result};

pub const MERGES_SENTINEL: &str = "#merges";
const SPECIALS: [&str; 2] = ["<pad>", "<unk>"];

/// Printable ASCII other than `\` and a leading `#` or `<` is written as is;
/// everything else as `\xHH`.
fn escape(bytes: &[u8], out: &mut String) {
    for (i, &b) in bytes.iter().enumerate() {
        let leading = i == 0 && (b == b'#' || b == b'<');
        if b.is_ascii_graphic() && b != b'\\' && !leading {
            out.push(b as char);
        } else {
            write!(out, "\\x{b:02x}").unwrap();
        }
    }
}

fn unescape(s: &str) -> Option<Vec<u8>> {
    let mut out = Vec::with_capacity(s.len());
    let b = s.as_bytes();
    let mut i = 0;
    while i < b.len() {
        if b[i] == b'\\' {
            let hex = s.get(i + 2..i + 4)?;
            if b.get(i + 1) != Some(&b'x') {
                return None;
            }
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 4;
        } else {
            out.push(b[i]);
            i += 1;
        }
    }
    Some(out)
}

pub fn to_text(vocab: &TokenizerVocab) -> String {
    let mut out = String::new();
    for s in SPECIALS {
        out.push_str(s);
        out.push('\n');
    }
    for tok in &vocab.tokens()[SPECIALS.len()..] {
        escape(tok, &mut out);
        out.push('\n');
    }
    out.push_str(MERGES_SENTINEL);
    out.push('\n');
    for (l, r) in vocab.merges() {
        writeln!(out, "{l} {r}").unwrap();
    }
    out
}

pub fn from_text(text: &str, path: &Path) -> Result<TokenizerVocab> {
    let fail = |line: usize, reason: String| Error::Format { path: path.to_path_buf(), line, reason };
    let lines: Vec<&str> = text.lines().collect();
    let sentinel = lines
        .iter()
        .position(|l| *l == MERGES_SENTINEL)
        .ok_or_else(|| fail(lines.len(), format!("missing {MERGES_SENTINEL} line")))?;
    for (i, s) in SPECIALS.iter().enumerate() {
        if lines.get(i) != Some(s) {
            return Err(fail(i + 1, format!("expected {s}")));
        }
    }
    let mut merges = Vec::new();
    for (i, l) in lines.iter().enumerate().skip(sentinel + 1) {
        let mut parts = l.split(' ');
        let pair = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => a.parse::<u32>().ok().zip(b.parse::<u32>().ok()),
            _ => None,
        };
        merges.push(pair.ok_or_else(|| fail(i + 1, format!("bad merge line {l:?}")))?);
    }
    let vocab = TokenizerVocab::from_merges(merges).map_err(|e| fail(sentinel + 2, e.to_string()))?;
    let listed = &lines[SPECIALS.len()..sentinel];
    let implied = &vocab.tokens()[SPECIALS.len()..];
    if listed.len() != implied.len() {
        return Err(fail(
            sentinel + 1,
            format!("{} tokens listed but merges imply {}", listed.len(), implied.len()),
        ));
    }
    for (i, (line, tok)) in listed.iter().zip(implied).enumerate() {
        if unescape(line).as_deref() != Some(tok.as_slice()) {
            return Err(fail(i + SPECIALS.len() + 1, format!("token {line:?} disagrees with merges")));
        }
    }
    Ok(vocab)
}

pub fn save(vocab: &TokenizerVocab, path: &Path) -> Result<()> {
    std::fs::write(path, to_text(vocab)).map_err(io(path))
}

pub fn load(path: &Path) -> Result<TokenizerVocab> {
    let text = std::fs::read_to_string(path).map_err(io(path))?;
    from_text(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use unifl_core::linearizer::train_vocab;

    #[test]
    fn round_trip() {
        let corpus = ["#hash <angle> back\\slash", " tab\tnew", "aaab aaab"];
        let v = train_vocab(&corpus, 300).unwrap();
        let text = to_text(&v);
        assert_eq!(from_text(&text, Path::new("v")).unwrap(), v);
        assert!(text.lines().nth(2 + 32).unwrap() == "\\x20");
    }

    #[test]
    fn rejects_tampering() {
        let v = train_vocab(&["aaab"], 257).unwrap();
        let text = to_text(&v);
        let bad = text.replacen("\naa\n", "\nab\n", 1);
        assert!(from_text(&bad, Path::new("v")).is_err());
        assert!(from_text(&text.replace(MERGES_SENTINEL, "#m"), Path::new("v")).is_err());
        let err = from_text(&format!("{text}1 x\n"), Path::new("v")).unwrap_err();
        assert!(matches!(err, Error::Format { line, .. } if line == text.lines().count() + 1));
    }
}
