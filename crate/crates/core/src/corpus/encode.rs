use serde::{Deserialize, Serialize};

use super::{LengthConfig, MethodRecord};
use crate::token::{split_identifier, Vocab, BOS, EOS, PAD};

/// A record mapped to padded id sequences.
///
/// Pad masks hold 1 for real tokens and 0 for padding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedExample {
    pub id: String,
    /// Target subtokens as strings, so scoring is unaffected by UNK.
    pub target: Vec<String>,
    pub x_loc_ids: Vec<u32>,
    /// In-file segment padded to its length, then the cross-file segment.
    pub x_pro_ids: Vec<u32>,
    pub x_doc_ids: Vec<u32>,
    pub y_in_ids: Vec<u32>,
    pub y_out_ids: Vec<u32>,
    /// Invocation indicator per project position.
    pub mask: Vec<f32>,
    pub loc_pad: Vec<u8>,
    pub pro_pad: Vec<u8>,
    pub doc_pad: Vec<u8>,
}

impl EncodedExample {
    /// Checks that segment lengths agree with `cfg`.
    pub fn matches(&self, cfg: &LengthConfig) -> bool {
        self.x_loc_ids.len() == cfg.local
            && self.x_pro_ids.len() == cfg.project()
            && self.x_doc_ids.len() == cfg.doc
            && self.y_in_ids.len() == cfg.decoder()
            && self.y_out_ids.len() == cfg.decoder()
            && self.mask.len() == cfg.project()
            && self.loc_pad.len() == cfg.local
            && self.pro_pad.len() == cfg.project()
            && self.doc_pad.len() == cfg.doc
    }

    /// True when no project position holds a real token.
    pub fn project_free(&self) -> bool {
        self.pro_pad.iter().all(|&p| p == 0)
    }

    /// Copy with every project position replaced by PAD.
    pub fn without_project(&self) -> Self {
        let mut ex = self.clone();
        ex.x_pro_ids.fill(PAD);
        ex.mask.fill(0.0);
        ex.pro_pad.fill(0);
        ex
    }
}

fn padded(ids: Vec<u32>, len: usize) -> (Vec<u32>, Vec<u8>) {
    let mut ids = ids;
    ids.truncate(len);
    let mut pad = vec![1u8; ids.len()];
    ids.resize(len, PAD);
    pad.resize(len, 0);
    (ids, pad)
}

/// Encodes code streams with `code_vocab` and the doc stream with
/// `doc_vocab`, padding every segment to its configured length. EOS is left
/// out when the method name had more subtokens than the target length.
pub fn encode_record(
    r: &MethodRecord,
    code_vocab: &Vocab,
    doc_vocab: &Vocab,
    cfg: &LengthConfig,
) -> EncodedExample {
    let (x_loc_ids, loc_pad) = padded(code_vocab.encode(&r.local), cfg.local);
    let n_in = r.pro_infile.len().min(cfg.infile);
    let n_cross = r.pro_crossfile.len().min(cfg.crossfile);
    let (mut x_pro_ids, mut pro_pad) = padded(code_vocab.encode(&r.pro_infile), cfg.infile);
    let (cross_ids, cross_pad) = padded(code_vocab.encode(&r.pro_crossfile), cfg.crossfile);
    x_pro_ids.extend(cross_ids);
    pro_pad.extend(cross_pad);

    let bit = |i: usize| r.invoked_mask.get(i).map_or(0.0, |&b| f32::from(u8::from(b)));
    let mut mask = vec![0.0f32; cfg.project()];
    for (i, m) in mask.iter_mut().take(n_in).enumerate() {
        *m = bit(i);
    }
    for j in 0..n_cross {
        mask[cfg.infile + j] = bit(r.pro_infile.len() + j);
    }

    let (x_doc_ids, doc_pad) = padded(doc_vocab.encode(&r.doc), cfg.doc);

    let target: Vec<String> = r.target.iter().take(cfg.target).cloned().collect();
    let ids = code_vocab.encode(&target);
    let truncated = split_identifier(&r.name_raw).len() > cfg.target;
    let mut y_in_ids = vec![BOS];
    y_in_ids.extend(&ids);
    y_in_ids.resize(cfg.decoder(), PAD);
    let mut y_out_ids = ids;
    if !truncated {
        y_out_ids.push(EOS);
    }
    y_out_ids.resize(cfg.decoder(), PAD);

    EncodedExample {
        id: r.id.clone(),
        target,
        x_loc_ids,
        x_pro_ids,
        x_doc_ids,
        y_in_ids,
        y_out_ids,
        mask,
        loc_pad,
        pro_pad,
        doc_pad,
    }
}
