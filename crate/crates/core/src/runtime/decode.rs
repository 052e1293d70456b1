use serde::{Deserialize, Serialize};

use crate::corpus::EncodedExample;
use crate::error::{Error, Result};
use crate::gtnm::{EncoderState, Gtnm};
use crate::token::{BOS, EOS};

/// Anything that yields next-token log-probabilities for a BOS-led prefix.
pub trait StepModel {
    fn next_log_probs(&self, prefix: &[u32]) -> Result<Vec<f32>>;
}

/// A trained model bound to one example's encoder outputs.
pub struct GtnmSession<'m> {
    model: &'m Gtnm,
    state: EncoderState,
}

impl<'m> GtnmSession<'m> {
    pub fn new(model: &'m Gtnm, ex: &EncodedExample) -> Result<Self> {
        Ok(GtnmSession {
            model,
            state: model.encode_example(ex)?,
        })
    }
}

impl StepModel for GtnmSession<'_> {
    fn next_log_probs(&self, prefix: &[u32]) -> Result<Vec<f32>> {
        Ok(log_softmax(&self.model.next_logits(&self.state, prefix)?))
    }
}

pub fn log_softmax(logits: &[f32]) -> Vec<f32> {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let lz = logits.iter().map(|&l| f64::from(l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&l| (f64::from(l - max) - lz) as f32).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Emitted token ids, without BOS or EOS.
    pub ids: Vec<u32>,
    /// Filled in by callers that hold the vocabulary.
    #[serde(default)]
    pub subtokens: Vec<String>,
    /// Probability of the chosen token at each step, EOS included.
    pub step_probs: Vec<f32>,
    /// Top-1 minus top-2 probability at each step, EOS included.
    pub step_pcs: Vec<f32>,
    pub pcs: f64,
    /// Sum of log-probabilities of the chosen tokens, EOS included.
    pub score: f64,
}

/// Gap between the two largest probabilities of one distribution.
pub fn step_pcs(probs: &[f32]) -> Result<f32> {
    if probs.len() < 2 {
        return Err(Error::InvalidInput("confidence needs at least two classes".into()));
    }
    let (mut a, mut b) = (f32::NEG_INFINITY, f32::NEG_INFINITY);
    for &p in probs {
        if p > a {
            b = a;
            a = p;
        } else if p > b {
            b = p;
        }
    }
    Ok(a - b)
}

/// Mean per-step confidence over the distributions of emitted tokens.
pub fn pcs_confidence(per_step_probs: &[Vec<f32>]) -> Result<f64> {
    if per_step_probs.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for p in per_step_probs {
        total += f64::from(step_pcs(p)?);
    }
    Ok(total / per_step_probs.len() as f64)
}

/// Sequence confidence: mean over pre-EOS steps, or the EOS step alone when
/// nothing was emitted.
fn sequence_pcs(step_pcs: &[f32], emitted: usize) -> f64 {
    let used = if emitted == 0 { &step_pcs[..step_pcs.len().min(1)] } else { &step_pcs[..emitted] };
    if used.is_empty() {
        return 0.0;
    }
    used.iter().map(|&p| f64::from(p)).sum::<f64>() / used.len() as f64
}

/// Lowest-id argmax.
fn argmax(xs: &[f32]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn probs_of(logp: &[f32]) -> Vec<f32> {
    logp.iter().map(|l| l.exp()).collect()
}

/// Step-wise argmax until EOS or `max_len` emitted tokens.
pub fn greedy_decode(model: &impl StepModel, max_len: usize) -> Result<Prediction> {
    let mut prefix = vec![BOS];
    let mut pred = Prediction {
        ids: Vec::new(),
        subtokens: Vec::new(),
        step_probs: Vec::new(),
        step_pcs: Vec::new(),
        pcs: 0.0,
        score: 0.0,
    };
    while pred.ids.len() < max_len {
        let logp = model.next_log_probs(&prefix)?;
        let probs = probs_of(&logp);
        let tok = argmax(&logp);
        pred.step_probs.push(probs[tok]);
        pred.step_pcs.push(step_pcs(&probs)?);
        pred.score += f64::from(logp[tok]);
        if tok as u32 == EOS {
            break;
        }
        pred.ids.push(tok as u32);
        prefix.push(tok as u32);
    }
    pred.pcs = sequence_pcs(&pred.step_pcs, pred.ids.len());
    Ok(pred)
}

#[derive(Clone)]
struct Hyp {
    ids: Vec<u32>,
    step_probs: Vec<f32>,
    step_pcs: Vec<f32>,
    score: f64,
}

impl Hyp {
    fn finish(self) -> Prediction {
        let pcs = sequence_pcs(&self.step_pcs, self.ids.len());
        Prediction {
            ids: self.ids,
            subtokens: Vec::new(),
            step_probs: self.step_probs,
            step_pcs: self.step_pcs,
            pcs,
            score: self.score,
        }
    }
}

/// Higher score first; equal scores prefer the lexicographically smaller id
/// sequence.
fn rank(a: &(f64, Vec<u32>), b: &(f64, Vec<u32>)) -> std::cmp::Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1))
}

/// (score, ids with the candidate appended), parent, token, prob, pcs.
type Candidate = ((f64, Vec<u32>), usize, u32, f32, f32);

/// Width-bounded beam search scored by summed log-probabilities. At each step
/// the best `width` extensions are kept; those ending in EOS are finished.
/// Hypotheses still open after `max_len` tokens are finished as they stand.
/// Returns up to `width` predictions, best first.
pub fn beam_decode(model: &impl StepModel, width: usize, max_len: usize) -> Result<Vec<Prediction>> {
    if width == 0 {
        return Err(Error::Config("beam width must be at least 1".into()));
    }
    let mut live = vec![Hyp {
        ids: Vec::new(),
        step_probs: Vec::new(),
        step_pcs: Vec::new(),
        score: 0.0,
    }];
    let mut finished: Vec<Hyp> = Vec::new();
    while !live.is_empty() && live[0].ids.len() < max_len {
        let mut cands: Vec<Candidate> = Vec::new();
        for (pi, h) in live.iter().enumerate() {
            let mut prefix = vec![BOS];
            prefix.extend(&h.ids);
            let logp = model.next_log_probs(&prefix)?;
            let probs = probs_of(&logp);
            let pcs = step_pcs(&probs)?;
            // Only the top `width` tokens of each parent can survive.
            let mut order: Vec<usize> = (0..logp.len()).collect();
            order.sort_by(|&a, &b| logp[b].total_cmp(&logp[a]).then(a.cmp(&b)));
            for &t in order.iter().take(width) {
                let mut key = h.ids.clone();
                key.push(t as u32);
                cands.push(((h.score + f64::from(logp[t]), key), pi, t as u32, probs[t], pcs));
            }
        }
        cands.sort_by(|a, b| rank(&a.0, &b.0));
        cands.truncate(width);
        let mut next = Vec::with_capacity(width);
        for ((score, _), pi, tok, p, pcs) in cands {
            let mut h = live[pi].clone();
            h.step_probs.push(p);
            h.step_pcs.push(pcs);
            h.score = score;
            if tok == EOS {
                finished.push(h);
            } else {
                h.ids.push(tok);
                next.push(h);
            }
        }
        live = next;
    }
    finished.extend(live);
    let mut out: Vec<Hyp> = finished;
    out.sort_by(|a, b| rank(&(a.score, a.ids.clone()), &(b.score, b.ids.clone())));
    out.truncate(width);
    Ok(out.into_iter().map(Hyp::finish).collect())
}
