use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Adam, TrainConfig};
use crate::error::{Error, Result};
use crate::gtnm::{Gtnm, ModelConfig};
use crate::nn::{ParamStore, Tensor};
use crate::token::Vocab;

const MAGIC: &[u8; 5] = b"GTNM1";

/// Identity of the vocabularies a model was trained with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabRef {
    pub code_sha256: String,
    pub code_size: usize,
    pub doc_sha256: String,
    pub doc_size: usize,
}

impl VocabRef {
    pub fn of(code: &Vocab, doc: &Vocab) -> Self {
        VocabRef {
            code_sha256: code.fingerprint(),
            code_size: code.len(),
            doc_sha256: doc.fingerprint(),
            doc_size: doc.len(),
        }
    }
}

/// Model parameters plus what is needed to resume training.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: ModelConfig,
    pub train: Option<TrainConfig>,
    pub vocab: Option<VocabRef>,
    /// Completed epochs.
    pub epoch: usize,
    /// Completed updates.
    pub step: u64,
    pub best_valid_loss: Option<f64>,
    pub params: ParamStore,
    pub adam: Option<Adam>,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    model: ModelConfig,
    train: Option<TrainConfig>,
    vocab: Option<VocabRef>,
    epoch: usize,
    step: u64,
    best_valid_loss: Option<f64>,
    adam_t: Option<u64>,
    /// Parameters, then Adam first moments, then second moments.
    tensors: Vec<Entry>,
}

impl Checkpoint {
    /// Parameters only, as used for inference.
    pub fn of_model(model: &Gtnm, vocab: Option<VocabRef>) -> Self {
        Checkpoint {
            model: model.cfg,
            train: None,
            vocab,
            epoch: 0,
            step: 0,
            best_valid_loss: None,
            params: model.params.clone(),
            adam: None,
        }
    }

    pub fn into_model(self) -> Result<Gtnm> {
        Gtnm::from_params(self.model, self.params)
    }

    /// `GTNM1`, header length as u64 LE, JSON header, then raw LE f32
    /// payloads in header order.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut tensors: Vec<Entry> = self
            .params
            .iter()
            .map(|(n, t)| Entry {
                name: n.to_owned(),
                shape: t.shape.clone(),
            })
            .collect();
        let mut payload: Vec<&Tensor> = self.params.iter().map(|(_, t)| t).collect();
        if let Some(adam) = &self.adam {
            for (kind, moments) in [("m", &adam.m), ("v", &adam.v)] {
                for ((n, _), t) in self.params.iter().zip(moments) {
                    tensors.push(Entry {
                        name: format!("adam.{kind}.{n}"),
                        shape: t.shape.clone(),
                    });
                    payload.push(t);
                }
            }
        }
        let header = Header {
            model: self.model,
            train: self.train,
            vocab: self.vocab.clone(),
            epoch: self.epoch,
            step: self.step,
            best_valid_loss: self.best_valid_loss,
            adam_t: self.adam.as_ref().map(|a| a.t),
            tensors,
        };
        let json = serde_json::to_vec(&header)?;
        let n: usize = payload.iter().map(|t| t.len()).sum();
        let mut out = Vec::with_capacity(MAGIC.len() + 8 + json.len() + 4 * n);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for t in payload {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |m: &str| Error::Corrupt(format!("checkpoint: {m}"));
        if bytes.len() < 13 || &bytes[..5] != MAGIC {
            return Err(corrupt("missing GTNM1 magic"));
        }
        let hlen = u64::from_le_bytes(bytes[5..13].try_into().expect("8 bytes")) as usize;
        let body = &bytes[13..];
        if body.len() < hlen {
            return Err(corrupt("truncated header"));
        }
        let header: Header = serde_json::from_slice(&body[..hlen])?;
        let mut data = &body[hlen..];
        let mut read = |e: &Entry| -> Result<Tensor> {
            let n: usize = e.shape.iter().product();
            if data.len() < 4 * n {
                return Err(corrupt(&format!("payload of `{}` truncated", e.name)));
            }
            let vals = data[..4 * n]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            data = &data[4 * n..];
            Tensor::new(e.shape.clone(), vals)
        };
        let moments = if header.adam_t.is_some() { 3 } else { 1 };
        if !header.tensors.len().is_multiple_of(moments) {
            return Err(corrupt("tensor list does not match optimizer state"));
        }
        let np = header.tensors.len() / moments;
        let mut params = ParamStore::new();
        for e in &header.tensors[..np] {
            let t = read(e)?;
            params.add(e.name.clone(), t);
        }
        let adam = match header.adam_t {
            Some(t) => {
                let m = header.tensors[np..2 * np].iter().map(&mut read).collect::<Result<_>>()?;
                let v = header.tensors[2 * np..].iter().map(&mut read).collect::<Result<_>>()?;
                Some(Adam { m, v, t })
            }
            None => None,
        };
        if !data.is_empty() {
            return Err(corrupt("trailing bytes after payload"));
        }
        Ok(Checkpoint {
            model: header.model,
            train: header.train,
            vocab: header.vocab,
            epoch: header.epoch,
            step: header.step,
            best_valid_loss: header.best_valid_loss,
            params,
            adam,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Errors when `vocab` differs from the vocabularies recorded at training.
    pub fn check_vocab(&self, vocab: &VocabRef) -> Result<()> {
        match &self.vocab {
            Some(v) if v != vocab => Err(Error::Config(format!(
                "vocabulary mismatch: checkpoint expects code {} ({} tokens) and doc {} ({} tokens)",
                &v.code_sha256[..12.min(v.code_sha256.len())],
                v.code_size,
                &v.doc_sha256[..12.min(v.doc_sha256.len())],
                v.doc_size
            ))),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LengthConfig;

    fn tiny() -> ModelConfig {
        ModelConfig {
            layers: 1,
            d_model: 8,
            heads: 2,
            d_ff: 16,
            dropout: 0.1,
            code_vocab: 10,
            doc_vocab: 6,
            lengths: LengthConfig {
                local: 3,
                infile: 2,
                crossfile: 2,
                doc: 2,
                target: 3,
            },
        }
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let m = Gtnm::new(tiny(), 4).unwrap();
        let mut ck = Checkpoint::of_model(&m, None);
        ck.adam = Some(Adam::new(&m.params));
        ck.adam.as_mut().unwrap().m[0].data[0] = 0.25;
        ck.train = Some(TrainConfig::default());
        ck.step = 17;
        let bytes = ck.to_bytes().unwrap();
        assert_eq!(&bytes[..5], b"GTNM1");
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes().unwrap(), bytes);
        let model = back.into_model().unwrap();
        assert_eq!(model.params, m.params);
    }

    #[test]
    fn corruption_detected() {
        let m = Gtnm::new(tiny(), 4).unwrap();
        let bytes = Checkpoint::of_model(&m, None).to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Checkpoint::from_bytes(b"GTNM0xxxxxxxxxxxx").is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
    }

    #[test]
    fn vocab_mismatch_reported() {
        let m = Gtnm::new(tiny(), 4).unwrap();
        let r = |s: &str| VocabRef {
            code_sha256: s.repeat(64),
            code_size: 10,
            doc_sha256: s.repeat(64),
            doc_size: 6,
        };
        let ck = Checkpoint::of_model(&m, Some(r("a")));
        assert!(ck.check_vocab(&r("a")).is_ok());
        assert!(ck.check_vocab(&r("b")).is_err());
    }
}
