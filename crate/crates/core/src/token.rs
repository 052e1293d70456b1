//! Subtokenization of program entity names and documentation sentences, and
//! the token/id vocabularies built over them.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const BOS: u32 = 2;
pub const EOS: u32 = 3;
pub const NUM_SPECIALS: usize = 4;

const SPECIAL_NAMES: [&str; NUM_SPECIALS] = ["<PAD>", "<UNK>", "<BOS>", "<EOS>"];

#[derive(Clone, Copy, PartialEq, Eq)]
enum CharClass {
    Lower,
    Upper,
    Digit,
}

fn classify(c: char) -> Option<CharClass> {
    if c.is_numeric() {
        Some(CharClass::Digit)
    } else if c.is_uppercase() {
        Some(CharClass::Upper)
    } else if c.is_alphanumeric() {
        Some(CharClass::Lower)
    } else {
        None
    }
}

fn push_lower(buf: &mut String, c: char) {
    buf.extend(c.to_lowercase().filter(|l| l.is_alphanumeric()));
}

/// Splits an entity name into lowercase subtokens.
///
/// Boundaries fall at every non-alphanumeric character, before every
/// uppercase letter (so `DU` yields `d`, `u`), and between letters and digits.
pub fn split_identifier(name: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut prev: Option<CharClass> = None;
    for c in name.chars() {
        let Some(class) = classify(c) else {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            prev = None;
            continue;
        };
        let boundary = match (prev, class) {
            (None, _) => false,
            (Some(_), CharClass::Upper) => true,
            (Some(CharClass::Digit), CharClass::Digit) => false,
            (Some(CharClass::Digit), _) | (Some(_), CharClass::Digit) => true,
            _ => false,
        };
        if boundary && !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
        push_lower(&mut cur, c);
        prev = Some(class);
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Replaces punctuation with spaces, splits on whitespace, and lowercases.
pub fn split_doc_sentence(sentence: &str) -> Vec<String> {
    let cleaned: String = sentence
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    cleaned
        .split_whitespace()
        .map(|w| {
            let mut s = String::with_capacity(w.len());
            for c in w.chars() {
                push_lower(&mut s, c);
            }
            s
        })
        .filter(|s| !s.is_empty())
        .collect()
}

/// Bidirectional token/id map. Ids 0..4 are PAD, UNK, BOS, EOS.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    token_of: Vec<String>,
    id_of: HashMap<String, u32>,
}

impl Vocab {
    fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut token_of: Vec<String> = SPECIAL_NAMES.iter().map(|s| s.to_string()).collect();
        let mut id_of = HashMap::with_capacity(tokens.len());
        for tok in tokens {
            let id = token_of.len() as u32;
            if id_of.insert(tok.clone(), id).is_some() {
                return Err(Error::Corrupt(format!("duplicate vocabulary token `{tok}`")));
            }
            token_of.push(tok);
        }
        Ok(Vocab { token_of, id_of })
    }

    /// Keeps the `max_size - 4` most frequent tokens; frequency ties go to the
    /// lexicographically smaller token.
    pub fn build<I, S>(streams: I, max_size: usize) -> Result<Self>
    where
        I: IntoIterator,
        I::Item: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if max_size <= NUM_SPECIALS {
            return Err(Error::Config(format!(
                "vocabulary size must exceed {NUM_SPECIALS}, got {max_size}"
            )));
        }
        let mut counts: HashMap<String, u64> = HashMap::new();
        for stream in streams {
            for tok in stream {
                *counts.entry(tok.as_ref().to_owned()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(max_size - NUM_SPECIALS);
        Self::from_tokens(ranked.into_iter().map(|(t, _)| t).collect())
    }

    pub fn len(&self) -> usize {
        self.token_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_of.len() == NUM_SPECIALS
    }

    pub fn id(&self, token: &str) -> u32 {
        self.id_of.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: u32) -> Result<&str> {
        self.token_of
            .get(id as usize)
            .map(String::as_str)
            .ok_or(Error::IdOutOfRange {
                id,
                size: self.len(),
            })
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    /// Maps ids back to tokens, dropping PAD, BOS and EOS. UNK decodes to `<UNK>`.
    pub fn decode(&self, ids: &[u32]) -> Result<Vec<String>> {
        let mut out = Vec::with_capacity(ids.len());
        for &id in ids {
            let tok = self.token(id)?;
            if matches!(id, PAD | BOS | EOS) {
                continue;
            }
            out.push(tok.to_owned());
        }
        Ok(out)
    }

    /// Text form: the four special names, then one token per line in id order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for tok in &self.token_of {
            let _ = writeln!(s, "{tok}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        for expected in SPECIAL_NAMES {
            match lines.next() {
                Some(l) if l == expected => {}
                other => {
                    return Err(Error::Corrupt(format!(
                        "vocabulary header: expected `{expected}`, found {other:?}"
                    )))
                }
            }
        }
        Self::from_tokens(lines.map(str::to_owned).collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// Hex SHA-256 of the text form; checkpoints record it to detect a
    /// vocabulary swapped underneath a trained model.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}
