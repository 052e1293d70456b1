//! The encoder/decoder network: a code encoder over the concatenated local,
//! project and documentation contexts, a separate project encoder whose
//! outputs are reweighted by invocation, and a decoder that attends to the
//! target prefix, the weighted project states, and the code states.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{EncodedExample, LengthConfig};
use crate::error::{Error, Result};
use crate::nn::{
    ffn, multi_head_attention, sinusoidal_positions, AttentionParams, FfnParams, Graph,
    LayerNormParams, ParamId, ParamStore, Tensor, Var,
};
use crate::token::PAD;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub layers: usize,
    pub d_model: usize,
    pub heads: usize,
    pub d_ff: usize,
    pub dropout: f32,
    pub code_vocab: usize,
    pub doc_vocab: usize,
    pub lengths: LengthConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            layers: 6,
            d_model: 512,
            heads: 8,
            d_ff: 2048,
            dropout: 0.3,
            code_vocab: 20000,
            doc_vocab: 10000,
            lengths: LengthConfig::default(),
        }
    }
}

impl ModelConfig {
    /// Small enough to train on one CPU core.
    pub fn desk() -> Self {
        ModelConfig {
            layers: 2,
            d_model: 64,
            heads: 4,
            d_ff: 256,
            ..Default::default()
        }
    }

    /// Zero layers is accepted: the encoders then pass embeddings through.
    pub fn validate(&self) -> Result<()> {
        self.lengths.validate()?;
        let bad = |m: String| Err(Error::Config(m));
        if self.d_model == 0 || self.heads == 0 || self.d_ff == 0 {
            return bad(format!("model dimensions must be positive: {self:?}"));
        }
        if !self.d_model.is_multiple_of(self.heads) {
            return bad(format!("{} heads do not divide d_model {}", self.heads, self.d_model));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        // A corpus without Javadoc leaves only the specials in the doc vocabulary.
        if self.code_vocab <= 4 || self.doc_vocab < 4 {
            return bad(format!(
                "code vocabulary needs more than the four special tokens and doc vocabulary at least them: {} / {}",
                self.code_vocab, self.doc_vocab
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct EncoderLayer {
    attn: AttentionParams,
    ln1: LayerNormParams,
    ffn: FfnParams,
    ln2: LayerNormParams,
}

#[derive(Debug, Clone, Copy)]
struct DecoderLayer {
    self_attn: AttentionParams,
    ln1: LayerNormParams,
    pro_attn: AttentionParams,
    ln2: LayerNormParams,
    code_attn: AttentionParams,
    ln3: LayerNormParams,
    ffn: FfnParams,
    ln4: LayerNormParams,
}

/// Model configuration, parameters, and the layout mapping layers to
/// parameter ids.
#[derive(Debug, Clone)]
pub struct Gtnm {
    pub cfg: ModelConfig,
    pub params: ParamStore,
    code_emb: ParamId,
    doc_emb: ParamId,
    out_w: ParamId,
    out_b: ParamId,
    code_enc: Vec<EncoderLayer>,
    pro_enc: Vec<EncoderLayer>,
    dec: Vec<DecoderLayer>,
    positions: Tensor,
}

/// Encoder outputs for one example, reused across decoding steps.
#[derive(Debug, Clone)]
pub struct EncoderState {
    pub h: Tensor,
    /// Invocation-weighted project states; zero for project-free examples.
    pub h_pro: Tensor,
    pub code_mask: Vec<bool>,
    /// `None` lets every project position through (project-free examples).
    pub pro_mask: Option<Vec<bool>>,
}

/// Weights over project positions: softmax of `1 + M` restricted to
/// positions with `pad[i] != 0`, zero elsewhere. `None` when every position
/// is padding.
pub fn invoked_weights(m: &[f32], pad: &[u8]) -> Option<Vec<f32>> {
    let live: Vec<usize> = (0..m.len()).filter(|&i| pad.get(i).is_some_and(|&p| p != 0)).collect();
    if live.is_empty() {
        return None;
    }
    let max = live.iter().map(|&i| 1.0 + f64::from(m[i])).fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = live.iter().map(|&i| (1.0 + f64::from(m[i]) - max).exp()).sum();
    let mut w = vec![0.0f32; m.len()];
    for &i in &live {
        w[i] = ((1.0 + f64::from(m[i]) - max).exp() / z) as f32;
    }
    Some(w)
}

fn bools(pad: &[u8]) -> Vec<bool> {
    pad.iter().map(|&p| p != 0).collect()
}

impl Gtnm {
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ParamStore::new();
        let d = cfg.d_model;
        let emb_limit = (3.0 / d as f32).sqrt();
        let code_emb = s.add("embed.code", Tensor::uniform(&[cfg.code_vocab, d], emb_limit, &mut rng));
        let doc_emb = s.add("embed.doc", Tensor::uniform(&[cfg.doc_vocab, d], emb_limit, &mut rng));
        let encoder = |s: &mut ParamStore, name: &str, rng: &mut ChaCha8Rng| -> Result<Vec<EncoderLayer>> {
            (0..cfg.layers)
                .map(|l| {
                    let p = format!("{name}.{l}");
                    Ok(EncoderLayer {
                        attn: AttentionParams::new(s, &format!("{p}.attn"), d, cfg.heads, rng)?,
                        ln1: LayerNormParams::new(s, &format!("{p}.ln1"), d),
                        ffn: FfnParams::new(s, &format!("{p}.ffn"), d, cfg.d_ff, rng),
                        ln2: LayerNormParams::new(s, &format!("{p}.ln2"), d),
                    })
                })
                .collect()
        };
        let code_enc = encoder(&mut s, "code_enc", &mut rng)?;
        let pro_enc = encoder(&mut s, "pro_enc", &mut rng)?;
        let dec = (0..cfg.layers)
            .map(|l| {
                let p = format!("dec.{l}");
                Ok(DecoderLayer {
                    self_attn: AttentionParams::new(&mut s, &format!("{p}.self_attn"), d, cfg.heads, &mut rng)?,
                    ln1: LayerNormParams::new(&mut s, &format!("{p}.ln1"), d),
                    pro_attn: AttentionParams::new(&mut s, &format!("{p}.pro_attn"), d, cfg.heads, &mut rng)?,
                    ln2: LayerNormParams::new(&mut s, &format!("{p}.ln2"), d),
                    code_attn: AttentionParams::new(&mut s, &format!("{p}.code_attn"), d, cfg.heads, &mut rng)?,
                    ln3: LayerNormParams::new(&mut s, &format!("{p}.ln3"), d),
                    ffn: FfnParams::new(&mut s, &format!("{p}.ffn"), d, cfg.d_ff, &mut rng),
                    ln4: LayerNormParams::new(&mut s, &format!("{p}.ln4"), d),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let out_limit = (6.0 / (cfg.code_vocab + d) as f32).sqrt();
        let out_w = s.add("out.w", Tensor::uniform(&[cfg.code_vocab, d], out_limit, &mut rng));
        let out_b = s.add("out.b", Tensor::zeros(&[cfg.code_vocab]));
        let len = cfg.lengths.input().max(cfg.lengths.decoder());
        Ok(Gtnm {
            cfg,
            params: s,
            code_emb,
            doc_emb,
            out_w,
            out_b,
            code_enc,
            pro_enc,
            dec,
            positions: sinusoidal_positions(len, d),
        })
    }

    /// Rebuilds a model around loaded parameters, checking that names and
    /// shapes match the layout implied by `cfg`.
    pub fn from_params(cfg: ModelConfig, params: ParamStore) -> Result<Self> {
        let mut m = Gtnm::new(cfg, 0)?;
        if m.params.len() != params.len() {
            return Err(Error::Corrupt(format!(
                "expected {} parameter tensors, found {}",
                m.params.len(),
                params.len()
            )));
        }
        for ((name, want), (got_name, got)) in m.params.iter().zip(params.iter()) {
            if name != got_name || want.shape != got.shape {
                return Err(Error::Corrupt(format!(
                    "parameter `{got_name}` {:?} does not match `{name}` {:?}",
                    got.shape, want.shape
                )));
            }
        }
        m.params = params;
        Ok(m)
    }

    fn positions(&self, g: &mut Graph, n: usize) -> Var {
        let d = self.cfg.d_model;
        g.constant(Tensor {
            shape: vec![n, d],
            data: self.positions.data[..n * d].to_vec(),
        })
    }

    fn check(&self, ex: &EncodedExample) -> Result<()> {
        if !ex.matches(&self.cfg.lengths) {
            return Err(Error::InvalidInput(format!(
                "example {} was encoded with different context lengths",
                ex.id
            )));
        }
        Ok(())
    }

    /// Embeds the concatenated input `x` (code vocabulary for local and
    /// project segments, doc vocabulary for the doc segment) and, separately,
    /// the project segment `x_pro`. Embeddings are scaled by √d_model and
    /// positions are added over each sequence.
    pub fn embed_inputs(&self, g: &mut Graph, ex: &EncodedExample) -> Result<(Var, Var)> {
        self.check(ex)?;
        let scale = (self.cfg.d_model as f32).sqrt();
        let loc = g.embedding(self.code_emb, &ex.x_loc_ids)?;
        let pro = g.embedding(self.code_emb, &ex.x_pro_ids)?;
        let doc = g.embedding(self.doc_emb, &ex.x_doc_ids)?;
        let x = g.concat_rows(&[loc, pro, doc])?;
        let x = g.scale(x, scale);
        let pos = self.positions(g, self.cfg.lengths.input());
        let x = g.add(x, pos)?;
        let x = g.dropout(x, self.cfg.dropout)?;

        let xp = g.embedding(self.code_emb, &ex.x_pro_ids)?;
        let xp = g.scale(xp, scale);
        let pos = self.positions(g, self.cfg.lengths.project());
        let xp = g.add(xp, pos)?;
        let xp = g.dropout(xp, self.cfg.dropout)?;
        Ok((x, xp))
    }

    fn sublayer(&self, g: &mut Graph, x: Var, out: Var, ln: &LayerNormParams) -> Result<Var> {
        let out = g.dropout(out, self.cfg.dropout)?;
        let sum = g.add(x, out)?;
        ln.apply(g, sum)
    }

    fn encoder(&self, g: &mut Graph, layers: &[EncoderLayer], x: Var, pad: &[bool]) -> Result<Var> {
        // A sequence with no real token attends everywhere rather than nowhere.
        let mask = pad.iter().any(|&p| p).then_some(pad);
        let mut h = x;
        for l in layers {
            let a = multi_head_attention(g, h, h, &l.attn, mask, false)?;
            h = self.sublayer(g, h, a, &l.ln1)?;
            let f = ffn(g, h, &l.ffn)?;
            h = self.sublayer(g, h, f, &l.ln2)?;
        }
        Ok(h)
    }

    /// Code encoder over `x` with padding keys masked.
    pub fn encode_code(&self, g: &mut Graph, x: Var, pad: &[bool]) -> Result<Var> {
        self.encoder(g, &self.code_enc, x, pad)
    }

    /// Project encoder followed by invocation weighting. Returns the weighted
    /// states and whether the example has no project context, in which case
    /// the states are zero.
    pub fn encode_project(&self, g: &mut Graph, x_pro: Var, m: &[f32], pad: &[u8]) -> Result<(Var, bool)> {
        let h = self.encoder(g, &self.pro_enc, x_pro, &bools(pad))?;
        let (w, free) = match invoked_weights(m, pad) {
            Some(w) => (w, false),
            None => (vec![0.0; m.len()], true),
        };
        Ok((g.scale_rows(h, &w)?, free))
    }

    /// Decoder logits, one row per `y_in` position. `pro_mask` of `None`
    /// lets every project position through.
    pub fn decode(
        &self,
        g: &mut Graph,
        y_in: &[u32],
        h: Var,
        h_pro: Var,
        code_mask: &[bool],
        pro_mask: Option<&[bool]>,
    ) -> Result<Var> {
        let scale = (self.cfg.d_model as f32).sqrt();
        let y = g.embedding(self.code_emb, y_in)?;
        let y = g.scale(y, scale);
        let pos = self.positions(g, y_in.len());
        let y = g.add(y, pos)?;
        let mut s = g.dropout(y, self.cfg.dropout)?;
        let code_mask = code_mask.iter().any(|&c| c).then_some(code_mask);
        for l in &self.dec {
            let a = multi_head_attention(g, s, s, &l.self_attn, None, true)?;
            s = self.sublayer(g, s, a, &l.ln1)?;
            let a = multi_head_attention(g, s, h_pro, &l.pro_attn, pro_mask, false)?;
            s = self.sublayer(g, s, a, &l.ln2)?;
            let a = multi_head_attention(g, s, h, &l.code_attn, code_mask, false)?;
            s = self.sublayer(g, s, a, &l.ln3)?;
            let f = ffn(g, s, &l.ffn)?;
            s = self.sublayer(g, s, f, &l.ln4)?;
        }
        let w = g.param(self.out_w);
        let b = g.param(self.out_b);
        let logits = g.matmul_nt(s, w)?;
        g.add_bias(logits, b)
    }

    /// Mean negative log-likelihood over non-PAD targets.
    pub fn loss(&self, g: &mut Graph, logits: Var, y_out: &[u32]) -> Result<Var> {
        let targets: Vec<Option<u32>> = y_out.iter().map(|&t| (t != PAD).then_some(t)).collect();
        g.cross_entropy(logits, &targets)
    }

    fn masks(ex: &EncodedExample) -> (Vec<bool>, Option<Vec<bool>>) {
        let code: Vec<bool> = ex
            .loc_pad
            .iter()
            .chain(&ex.pro_pad)
            .chain(&ex.doc_pad)
            .map(|&p| p != 0)
            .collect();
        let pro = (!ex.project_free()).then(|| bools(&ex.pro_pad));
        (code, pro)
    }

    /// Teacher-forced loss for one example.
    pub fn forward_loss(&self, g: &mut Graph, ex: &EncodedExample) -> Result<Var> {
        let (x, xp) = self.embed_inputs(g, ex)?;
        let (code_mask, pro_mask) = Self::masks(ex);
        let h = self.encode_code(g, x, &code_mask)?;
        let (h_pro, _) = self.encode_project(g, xp, &ex.mask, &ex.pro_pad)?;
        let logits = self.decode(g, &ex.y_in_ids, h, h_pro, &code_mask, pro_mask.as_deref())?;
        self.loss(g, logits, &ex.y_out_ids)
    }

    /// Runs both encoders without dropout.
    pub fn encode_example(&self, ex: &EncodedExample) -> Result<EncoderState> {
        let mut g = Graph::new(&self.params);
        let (x, xp) = self.embed_inputs(&mut g, ex)?;
        let (code_mask, pro_mask) = Self::masks(ex);
        let h = self.encode_code(&mut g, x, &code_mask)?;
        let (h_pro, _) = self.encode_project(&mut g, xp, &ex.mask, &ex.pro_pad)?;
        Ok(EncoderState {
            h: g.value(h).clone(),
            h_pro: g.value(h_pro).clone(),
            code_mask,
            pro_mask,
        })
    }

    /// Logits for the token following `prefix`, which starts with BOS.
    pub fn next_logits(&self, state: &EncoderState, prefix: &[u32]) -> Result<Vec<f32>> {
        let mut g = Graph::new(&self.params);
        let h = g.constant(state.h.clone());
        let hp = g.constant(state.h_pro.clone());
        let logits = self.decode(&mut g, prefix, h, hp, &state.code_mask, state.pro_mask.as_deref())?;
        Ok(g.value(logits).row(prefix.len() - 1).to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::token::{BOS, EOS};

    fn tiny(layers: usize) -> ModelConfig {
        ModelConfig {
            layers,
            d_model: 8,
            heads: 2,
            d_ff: 16,
            dropout: 0.0,
            code_vocab: 12,
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

    fn example(cfg: &ModelConfig) -> EncodedExample {
        let ex = EncodedExample {
            id: "t".into(),
            target: vec!["a".into()],
            x_loc_ids: vec![5, 6, PAD],
            x_pro_ids: vec![7, PAD, 8, 9],
            x_doc_ids: vec![4, PAD],
            y_in_ids: vec![BOS, 5, 6, PAD],
            y_out_ids: vec![5, 6, EOS, PAD],
            mask: vec![1.0, 0.0, 0.0, 1.0],
            loc_pad: vec![1, 1, 0],
            pro_pad: vec![1, 0, 1, 1],
            doc_pad: vec![1, 0],
        };
        assert!(ex.matches(&cfg.lengths));
        ex
    }

    #[test]
    fn base_and_desk_configs_validate() {
        ModelConfig::default().validate().unwrap();
        let d = ModelConfig::desk();
        assert_eq!((d.layers, d.d_model, d.heads, d.d_ff), (2, 64, 4, 256));
        d.validate().unwrap();
        let bad = ModelConfig { heads: 3, ..ModelConfig::desk() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn invoked_weight_examples() {
        let w = invoked_weights(&[1.0, 0.0], &[1, 1]).unwrap();
        assert!((w[0] - 0.7311).abs() < 1e-4 && (w[1] - 0.2689).abs() < 1e-4);
        let u = invoked_weights(&[0.0; 4], &[1, 0, 1, 1]).unwrap();
        assert_eq!(u[1], 0.0);
        for i in [0, 2, 3] {
            assert!((u[i] - 1.0 / 3.0).abs() < 1e-7);
        }
        assert!(invoked_weights(&[1.0, 1.0], &[0, 0]).is_none());
    }

    #[test]
    fn shapes_follow_config() {
        let cfg = tiny(1);
        let m = Gtnm::new(cfg, 3).unwrap();
        let ex = example(&cfg);
        let mut g = Graph::new(&m.params);
        let (x, xp) = m.embed_inputs(&mut g, &ex).unwrap();
        assert_eq!(g.value(x).shape, [cfg.lengths.input(), 8]);
        assert_eq!(g.value(xp).shape, [4, 8]);
        let (cm, pm) = Gtnm::masks(&ex);
        let h = m.encode_code(&mut g, x, &cm).unwrap();
        assert_eq!(g.value(h).shape, [9, 8]);
        let (hp, free) = m.encode_project(&mut g, xp, &ex.mask, &ex.pro_pad).unwrap();
        assert!(!free);
        let logits = m.decode(&mut g, &ex.y_in_ids, h, hp, &cm, pm.as_deref()).unwrap();
        assert_eq!(g.value(logits).shape, [4, 12]);
    }

    #[test]
    fn zero_layers_is_identity() {
        let cfg = tiny(0);
        let m = Gtnm::new(cfg, 3).unwrap();
        let ex = example(&cfg);
        let mut g = Graph::new(&m.params);
        let (x, _) = m.embed_inputs(&mut g, &ex).unwrap();
        let h = m.encode_code(&mut g, x, &[true; 9]).unwrap();
        assert_eq!(g.value(h), g.value(x));
    }

    #[test]
    fn out_of_range_ids_rejected() {
        let cfg = tiny(1);
        let m = Gtnm::new(cfg, 3).unwrap();
        let mut ex = example(&cfg);
        ex.x_doc_ids[0] = 6;
        let mut g = Graph::new(&m.params);
        assert!(matches!(m.embed_inputs(&mut g, &ex), Err(Error::IdOutOfRange { id: 6, size: 6 })));
    }

    #[test]
    fn project_free_states_are_zero() {
        let cfg = tiny(1);
        let m = Gtnm::new(cfg, 3).unwrap();
        let ex = example(&cfg).without_project();
        let st = m.encode_example(&ex).unwrap();
        assert!(st.h_pro.data.iter().all(|&v| v == 0.0));
        assert!(st.pro_mask.is_none());
        let logits = m.next_logits(&st, &[BOS]).unwrap();
        assert!(logits.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn from_params_checks_layout() {
        let cfg = tiny(1);
        let m = Gtnm::new(cfg, 3).unwrap();
        assert!(Gtnm::from_params(cfg, m.params.clone()).is_ok());
        let other = Gtnm::new(tiny(2), 3).unwrap();
        assert!(Gtnm::from_params(cfg, other.params).is_err());
    }
}
