mod common;

use common::grads::tiny_config;
use common::*;
use gtnm_core::corpus::EncodedExample;
use gtnm_core::gtnm::Gtnm;
use gtnm_core::nn::Graph;
use gtnm_core::runtime::{
    beam_decode, evaluate_loss, fit, greedy_decode, predict_all, Checkpoint, GtnmSession, TrainConfig,
    VocabRef,
};
use gtnm_core::token::BOS;

fn tiny_setup(n: usize, dropout: f32) -> (Gtnm, Vec<EncodedExample>, VocabRef) {
    let recs = project_task(n, 5);
    let (code, doc) = vocabs(&recs);
    let cfg = gtnm_core::gtnm::ModelConfig {
        dropout,
        ..tiny_config(code.len(), doc.len())
    };
    let ex = encode_all(&recs, &code, &doc, &cfg.lengths);
    (Gtnm::new(cfg, 11).unwrap(), ex, VocabRef::of(&code, &doc))
}

fn quick(epochs: usize) -> TrainConfig {
    TrainConfig {
        base_lr: 1e-3,
        warmup_steps: 5,
        epochs,
        batch_size: 4,
        seed: 21,
        ..Default::default()
    }
}

#[test]
fn loss_decreases_over_twenty_steps() {
    let (mut m, ex, _) = tiny_setup(8, 0.0);
    let cfg = TrainConfig {
        warmup_steps: 1,
        epochs: 20,
        batch_size: 8,
        ..quick(20)
    };
    let before = evaluate_loss(&m, &ex).unwrap();
    let out = fit(&mut m, &ex, &[], &cfg, None, None).unwrap();
    assert_eq!(out.last.step, 20);
    let after = evaluate_loss(&m, &ex).unwrap();
    assert!(after < before, "{before} -> {after}");
    assert!(out.log.last().unwrap().train_loss < out.log[0].train_loss);
}

#[test]
fn every_parameter_receives_gradient() {
    let (m, ex, _) = tiny_setup(8, 0.0);
    let mut grads = m.params.zero_grads();
    for e in &ex {
        let mut g = Graph::new(&m.params);
        let l = m.forward_loss(&mut g, e).unwrap();
        g.backward(l, &mut grads, 1.0).unwrap();
    }
    for id in m.params.ids() {
        let norm: f32 = grads.get(id).iter().map(|v| v * v).sum();
        assert!(norm > 0.0, "no gradient reaches `{}`", m.params.name(id));
    }
}

#[test]
fn decoder_is_causal() {
    let (m, ex, _) = tiny_setup(2, 0.0);
    let e = &ex[0];
    let state = m.encode_example(e).unwrap();
    let full = {
        let mut g = Graph::new(&m.params);
        let h = g.constant(state.h.clone());
        let hp = g.constant(state.h_pro.clone());
        let l = m.decode(&mut g, &e.y_in_ids, h, hp, &state.code_mask, state.pro_mask.as_deref()).unwrap();
        g.value(l).clone()
    };
    let mut changed = e.y_in_ids.clone();
    let last = changed.len() - 1;
    changed[last] = (changed[last] + 5) % m.cfg.code_vocab as u32;
    for t in 1..=e.y_in_ids.len() {
        let a = m.next_logits(&state, &e.y_in_ids[..t]).unwrap();
        assert_eq!(a.as_slice(), full.row(t - 1));
        if t <= last {
            assert_eq!(a, m.next_logits(&state, &changed[..t]).unwrap());
        }
    }
}

#[test]
fn ablated_examples_ignore_the_project_encoder() {
    let (m, ex, _) = tiny_setup(4, 0.0);
    let ablated: Vec<EncodedExample> = ex.iter().map(EncodedExample::without_project).collect();
    let base = evaluate_loss(&m, &ablated).unwrap();
    let mut perturbed = m.clone();
    let ids: Vec<_> = perturbed.params.ids().collect();
    for id in ids {
        if perturbed.params.name(id).starts_with("pro_enc.") {
            for v in &mut perturbed.params.get_mut(id).data {
                *v += 0.5;
            }
        }
    }
    assert_eq!(evaluate_loss(&perturbed, &ablated).unwrap(), base);
    // The full examples do depend on it.
    assert_ne!(evaluate_loss(&perturbed, &ex).unwrap(), evaluate_loss(&m, &ex).unwrap());
}

#[test]
fn seeded_runs_are_bit_identical() {
    let (m0, ex, vocab) = tiny_setup(12, 0.2);
    let run = || {
        let mut m = m0.clone();
        let out = fit(&mut m, &ex[..8], &ex[8..], &quick(3), None, Some(vocab.clone())).unwrap();
        (m, out)
    };
    let (a, out_a) = run();
    let (b, out_b) = run();
    assert_eq!(a.params, b.params);
    assert_eq!(out_a.log, out_b.log);
    assert_eq!(out_a.last.to_bytes().unwrap(), out_b.last.to_bytes().unwrap());
    let mut c = m0.clone();
    fit(&mut c, &ex[..8], &ex[8..], &TrainConfig { seed: 22, ..quick(3) }, None, None).unwrap();
    assert_ne!(c.params, a.params);
}

#[test]
fn resumed_training_matches_uninterrupted() {
    let (m0, ex, vocab) = tiny_setup(12, 0.2);
    let mut straight = m0.clone();
    let full = fit(&mut straight, &ex[..8], &ex[8..], &quick(4), None, Some(vocab.clone())).unwrap();

    let mut first = m0.clone();
    let half = fit(&mut first, &ex[..8], &ex[8..], &quick(2), None, Some(vocab.clone())).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("half.ckpt");
    half.last.save(&path).unwrap();
    let resumed_ck = Checkpoint::load(&path).unwrap();
    assert_eq!(resumed_ck, half.last);

    let mut second = m0.clone();
    let rest = fit(&mut second, &ex[..8], &ex[8..], &quick(4), Some(resumed_ck), Some(vocab)).unwrap();
    assert_eq!(second.params, straight.params);
    assert_eq!(rest.last.step, full.last.step);
    assert_eq!(rest.log.as_slice(), &full.log[2..]);
}

#[test]
fn best_checkpoint_tracks_validation_loss() {
    let (mut m, ex, _) = tiny_setup(12, 0.0);
    let out = fit(&mut m, &ex[..8], &ex[8..], &quick(4), None, None).unwrap();
    let best = out.best.unwrap();
    let min = out
        .log
        .iter()
        .filter_map(|l| l.valid_loss)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(best.best_valid_loss, Some(min));
    assert!(best.adam.is_none());
    let restored = best.into_model().unwrap();
    assert_eq!(evaluate_loss(&restored, &ex[8..]).unwrap(), min);
}

#[test]
fn target_em_stops_early() {
    let (mut m, ex, _) = tiny_setup(8, 0.0);
    let cfg = TrainConfig {
        target_em: Some(0.0),
        ..quick(10)
    };
    let out = fit(&mut m, &ex, &ex, &cfg, None, None).unwrap();
    assert_eq!(out.log.len(), 1);
}

#[test]
fn fit_rejects_bad_inputs() {
    let (mut m, ex, _) = tiny_setup(4, 0.0);
    assert!(fit(&mut m, &[], &ex, &quick(1), None, None).is_err());
    let mut short = ex[0].clone();
    short.x_loc_ids.pop();
    assert!(fit(&mut m, &[short], &[], &quick(1), None, None).is_err());
}

#[test]
fn checkpoint_file_round_trip_is_byte_identical() {
    let (m, _, vocab) = tiny_setup(2, 0.1);
    let dir = tempfile::tempdir().unwrap();
    let (p1, p2) = (dir.path().join("a.ckpt"), dir.path().join("b.ckpt"));
    Checkpoint::of_model(&m, Some(vocab)).save(&p1).unwrap();
    Checkpoint::load(&p1).unwrap().save(&p2).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
}

#[test]
fn width_one_beam_is_greedy_on_a_real_model() {
    let (m, ex, _) = tiny_setup(20, 0.0);
    let max_len = m.cfg.lengths.target;
    for e in &ex {
        let s = GtnmSession::new(&m, e).unwrap();
        let g = greedy_decode(&s, max_len).unwrap();
        let b = beam_decode(&s, 1, max_len).unwrap();
        assert_eq!(b[0].ids, g.ids);
        assert!((b[0].score - g.score).abs() < 1e-9);
    }
    let preds = predict_all(&m, &ex, 1).unwrap();
    for (p, e) in preds.iter().zip(&ex) {
        assert_eq!(p.ids, greedy_decode(&GtnmSession::new(&m, e).unwrap(), max_len).unwrap().ids);
    }
    assert_eq!(ex[0].y_in_ids[0], BOS);
}
