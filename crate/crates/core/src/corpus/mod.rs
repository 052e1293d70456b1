//! Training records built from indexed projects: extraction, truncation,
//! dataset splits, context-overlap statistics, and id encoding.

mod encode;
mod records;
mod split;
mod stats;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::token::Vocab;

pub use encode::{encode_record, EncodedExample};
pub use records::{build_method_record, build_records, RecordOptions};
pub use split::{split_dataset, unit_counts, DatasetSplit, SplitMode};
pub use stats::{stats_overlap, LevelStats, OverlapReport};

/// Maximum subtoken counts per context segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LengthConfig {
    pub local: usize,
    pub infile: usize,
    pub crossfile: usize,
    pub doc: usize,
    pub target: usize,
}

impl Default for LengthConfig {
    fn default() -> Self {
        LengthConfig {
            local: 55,
            infile: 30,
            crossfile: 30,
            doc: 10,
            target: 5,
        }
    }
}

impl LengthConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [self.local, self.infile, self.crossfile, self.doc, self.target];
        if all.contains(&0) {
            return Err(Error::Config(format!("all context lengths must be positive: {self:?}")));
        }
        Ok(())
    }

    /// Project context positions: in-file segment then cross-file segment.
    pub fn project(&self) -> usize {
        self.infile + self.crossfile
    }

    /// Length of the concatenated code-encoder input.
    pub fn input(&self) -> usize {
        self.local + self.project() + self.doc
    }

    /// Decoder sequence length: the target plus one BOS/EOS slot.
    pub fn decoder(&self) -> usize {
        self.target + 1
    }
}

/// One method with its target name and extracted, truncated contexts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub id: String,
    pub project: String,
    pub path: String,
    pub name_raw: String,
    pub target: Vec<String>,
    pub local: Vec<String>,
    pub pro_infile: Vec<String>,
    pub pro_crossfile: Vec<String>,
    pub doc: Vec<String>,
    /// One bit per subtoken of `pro_infile ++ pro_crossfile`.
    pub invoked_mask: Vec<bool>,
    /// Leading subtokens of `local` that come from the return type and
    /// parameters; the rest are body identifiers.
    #[serde(default)]
    pub signature_len: usize,
}

impl MethodRecord {
    pub fn check(&self, cfg: &LengthConfig) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(format!("record {}: {what}", self.id)));
        if self.target.is_empty() {
            return bad("empty target");
        }
        if self.invoked_mask.len() != self.pro_infile.len() + self.pro_crossfile.len() {
            return bad("invoked mask misaligned with project context");
        }
        if self.signature_len > self.local.len() {
            return bad("signature length exceeds local context");
        }
        if self.local.len() > cfg.local
            || self.pro_infile.len() > cfg.infile
            || self.pro_crossfile.len() > cfg.crossfile
            || self.doc.len() > cfg.doc
            || self.target.len() > cfg.target
        {
            return bad("context longer than configured lengths");
        }
        Ok(())
    }

    /// Unit that must stay within one split in file-shuffle mode.
    pub fn file_key(&self) -> String {
        format!("{}/{}", self.project, self.path)
    }
}

/// Reads records from JSON Lines; blank lines are ignored.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| Error::Corrupt(format!("JSON Lines record {}: {e}", i + 1)))
        })
        .collect()
}

/// Code vocabulary over local, project, and target subtokens; doc
/// vocabulary over doc subtokens.
pub fn build_vocabs(records: &[MethodRecord], code_size: usize, doc_size: usize) -> Result<(Vocab, Vocab)> {
    let code = Vocab::build(
        records.iter().map(|r| {
            r.local
                .iter()
                .chain(&r.pro_infile)
                .chain(&r.pro_crossfile)
                .chain(&r.target)
        }),
        code_size,
    )?;
    let doc = Vocab::build(records.iter().map(|r| &r.doc), doc_size)?;
    Ok((code, doc))
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> Result<String> {
    let mut out = String::new();
    for it in items {
        out.push_str(&serde_json::to_string(it)?);
        out.push('\n');
    }
    Ok(out)
}
