use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{beam_decode, clip_grads, greedy_decode, lr_at, Adam, Checkpoint, GtnmSession, Prediction, TrainConfig, VocabRef};
use crate::corpus::EncodedExample;
use crate::error::{Error, Result};
use crate::gtnm::Gtnm;
use crate::nn::Graph;
use crate::token::{EOS, PAD, UNK};

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub epoch: usize,
    pub step: u64,
    pub lr: f64,
    pub train_loss: f64,
    pub valid_loss: Option<f64>,
    pub valid_em: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// State after the last completed epoch, optimizer included.
    pub last: Checkpoint,
    /// Lowest validation loss seen in this run; the last epoch when there
    /// is no validation set. `None` if a resumed run never improved on the
    /// stored best.
    pub best: Option<Checkpoint>,
    pub log: Vec<LogEntry>,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn stream(parts: &[u64]) -> ChaCha8Rng {
    let seed = parts.iter().fold(0u64, |acc, &p| splitmix(acc ^ splitmix(p)));
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mean per-example loss without dropout.
pub fn evaluate_loss(model: &Gtnm, examples: &[EncodedExample]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::InvalidInput("no examples to evaluate".into()));
    }
    let losses: Vec<f64> = examples
        .par_iter()
        .map(|ex| {
            let mut g = Graph::new(&model.params);
            let l = model.forward_loss(&mut g, ex)?;
            Ok(f64::from(g.value(l).data[0]))
        })
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Decodes every example, in input order. Width 1 is greedy decoding.
pub fn predict_all(model: &Gtnm, examples: &[EncodedExample], beam_width: usize) -> Result<Vec<Prediction>> {
    let max_len = model.cfg.lengths.target;
    examples
        .par_iter()
        .map(|ex| {
            let session = GtnmSession::new(model, ex)?;
            if beam_width <= 1 {
                greedy_decode(&session, max_len)
            } else {
                Ok(beam_decode(&session, beam_width, max_len)?.swap_remove(0))
            }
        })
        .collect()
}

/// Target ids as emitted by a decoder: `y_out` up to EOS or padding.
fn target_ids(ex: &EncodedExample) -> Vec<u32> {
    ex.y_out_ids.iter().copied().take_while(|&t| t != EOS && t != PAD).collect()
}

fn exact_match_rate(model: &Gtnm, examples: &[EncodedExample]) -> Result<f64> {
    let preds = predict_all(model, examples, 1)?;
    let hits = preds
        .iter()
        .zip(examples)
        .filter(|(p, ex)| {
            let t = target_ids(ex);
            // An unknown target subtoken can never be reproduced.
            !t.contains(&UNK) && p.ids == t
        })
        .count();
    Ok(hits as f64 / examples.len() as f64)
}

/// Teacher-forced training with Adam.
///
/// Batch order comes from a ChaCha8 shuffle seeded by `(seed, epoch)`, and
/// the dropout stream of each example by `(seed, update, position in
/// batch)`, so a run resumed from `resume` ends with the same weights as an
/// uninterrupted one.
pub fn fit(
    model: &mut Gtnm,
    train: &[EncodedExample],
    valid: &[EncodedExample],
    cfg: &TrainConfig,
    resume: Option<Checkpoint>,
    vocab: Option<VocabRef>,
) -> Result<FitOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    if let Some(ex) = train.iter().chain(valid).find(|ex| !ex.matches(&model.cfg.lengths)) {
        return Err(Error::Config(format!(
            "example {} does not match the model's context lengths",
            ex.id
        )));
    }
    let (mut adam, mut step, start_epoch, mut best_loss) = match resume {
        Some(ck) => {
            if ck.model != model.cfg {
                return Err(Error::Config("checkpoint model configuration differs".into()));
            }
            let best = ck.best_valid_loss;
            let (epoch, step) = (ck.epoch, ck.step);
            let adam = ck.adam.clone().unwrap_or_else(|| Adam::new(&ck.params));
            *model = ck.into_model()?;
            (adam, step, epoch, best)
        }
        None => (Adam::new(&model.params), 0, 0, None),
    };

    let mut grads = model.params.zero_grads();
    let mut log = Vec::new();
    let mut best = None;
    for epoch in start_epoch..cfg.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut stream(&[cfg.seed, 0x5348_5546, epoch as u64]));
        let mut loss_sum = 0.0f64;
        let mut lr = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.zero();
            let scale = 1.0 / batch.len() as f32;
            for (j, &i) in batch.iter().enumerate() {
                let rng = stream(&[cfg.seed, 0x4452_4f50, step + 1, j as u64]);
                let mut g = Graph::training(&model.params, rng);
                let l = model.forward_loss(&mut g, &train[i])?;
                loss_sum += f64::from(g.value(l).data[0]);
                g.backward(l, &mut grads, scale)?;
            }
            if let Some(max) = cfg.clip_norm {
                clip_grads(&mut grads, max);
            }
            step += 1;
            lr = lr_at(step, cfg);
            adam.step(&mut model.params, &grads, lr)?;
        }

        let (valid_loss, valid_em) = if valid.is_empty() {
            (None, None)
        } else {
            (Some(evaluate_loss(model, valid)?), Some(exact_match_rate(model, valid)?))
        };
        log.push(LogEntry {
            epoch: epoch + 1,
            step,
            lr,
            train_loss: loss_sum / train.len() as f64,
            valid_loss,
            valid_em,
        });
        let improved = match (valid_loss, best_loss) {
            (None, _) => true,
            (Some(v), None) => v.is_finite(),
            (Some(v), Some(b)) => v < b,
        };
        if improved && valid_loss.is_some() {
            best_loss = valid_loss;
        }
        let snapshot = Checkpoint {
            model: model.cfg,
            train: Some(*cfg),
            vocab: vocab.clone(),
            epoch: epoch + 1,
            step,
            best_valid_loss: best_loss,
            params: model.params.clone(),
            adam: Some(adam.clone()),
        };
        if improved {
            best = Some(Checkpoint {
                adam: None,
                ..snapshot.clone()
            });
        }
        let done = cfg.target_em.is_some_and(|t| valid_em.is_some_and(|em| em >= t));
        if done || epoch + 1 == cfg.epochs {
            return Ok(FitOutcome {
                last: snapshot,
                best,
                log,
            });
        }
    }
    // Nothing left to train: the resumed state is final.
    Ok(FitOutcome {
        last: Checkpoint {
            model: model.cfg,
            train: Some(*cfg),
            vocab,
            epoch: start_epoch,
            step,
            best_valid_loss: best_loss,
            params: model.params.clone(),
            adam: Some(adam),
        },
        best,
        log,
    })
}
