//! Synthetic corpora shared by the integration tests.
#![allow(dead_code)]

pub mod grads;
pub mod samples;

use gtnm_core::corpus::{build_vocabs, encode_record, EncodedExample, LengthConfig, MethodRecord};
use gtnm_core::gtnm::ModelConfig;
use gtnm_core::token::Vocab;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const WORDS: [&str; 24] = [
    "get", "set", "add", "remove", "size", "name", "value", "index", "path", "file", "read", "write",
    "open", "close", "list", "item", "count", "next", "load", "save", "check", "parse", "start", "stop",
];

pub const NOISE: [&str; 16] = [
    "tmp", "buf", "x", "y", "i", "j", "it", "obj", "ctx", "res", "arr", "str", "map", "key", "node", "flag",
];

/// Short contexts keep synthetic training within a few seconds per epoch.
pub fn small_lengths() -> LengthConfig {
    LengthConfig {
        local: 8,
        infile: 6,
        crossfile: 4,
        doc: 4,
        target: 5,
    }
}

pub fn desk_config(code: &Vocab, doc: &Vocab) -> ModelConfig {
    ModelConfig {
        code_vocab: code.len(),
        doc_vocab: doc.len(),
        lengths: small_lengths(),
        dropout: 0.0,
        ..ModelConfig::desk()
    }
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn record(i: usize, target: Vec<String>, local: Vec<String>, infile: Vec<String>, cross: Vec<String>, doc: Vec<String>) -> MethodRecord {
    let mut mask = vec![false; infile.len() + cross.len()];
    if let Some(m) = mask.first_mut() {
        *m = true;
    }
    let name_raw = target.join("_");
    MethodRecord {
        id: format!("synthetic/F{}.java#F.m{i}@1", i % 16),
        project: format!("p{}", i % 4),
        path: format!("F{}.java", i % 16),
        name_raw,
        target,
        local,
        pro_infile: infile,
        pro_crossfile: cross,
        doc,
        invoked_mask: mask,
        signature_len: 1,
    }
}

fn pick(rng: &mut ChaCha8Rng, pool: &[&str], n: usize) -> Vec<String> {
    (0..n).map(|_| pool.choose(rng).expect("pool").to_string()).collect()
}

/// Target is the first two local subtokens.
pub fn copy_task(n: usize, seed: u64) -> Vec<MethodRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let local = pick(&mut rng, &WORDS, 8);
            let target = local[..2].to_vec();
            let infile = pick(&mut rng, &WORDS, 4);
            let cross = pick(&mut rng, &WORDS, 2);
            let doc = pick(&mut rng, &NOISE, 3);
            record(i, target, local, infile, cross, doc)
        })
        .collect()
}

/// Twelve two-subtoken method names.
pub fn project_names() -> Vec<Vec<String>> {
    (0..12).map(|k| strings(&[WORDS[k], WORDS[12 + k]])).collect()
}

/// Target is the first in-file context method; local and doc contexts are
/// noise drawn independently of it.
pub fn project_task(n: usize, seed: u64) -> Vec<MethodRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = project_names();
    (0..n)
        .map(|i| {
            let mut order: Vec<usize> = (0..names.len()).collect();
            order.shuffle(&mut rng);
            let infile: Vec<String> = order[..3].iter().flat_map(|&k| names[k].clone()).collect();
            let cross = names[order[3]].clone();
            let target = names[order[0]].clone();
            let n_local = 2 + rng.random_range(0..6);
            let local = pick(&mut rng, &NOISE, n_local);
            let doc = pick(&mut rng, &NOISE, 3);
            record(i, target, local, infile, cross, doc)
        })
        .collect()
}

pub fn vocabs(records: &[MethodRecord]) -> (Vocab, Vocab) {
    build_vocabs(records, 20000, 10000).expect("vocabularies")
}

pub fn encode_all(records: &[MethodRecord], code: &Vocab, doc: &Vocab, lengths: &LengthConfig) -> Vec<EncodedExample> {
    records.iter().map(|r| encode_record(r, code, doc, lengths)).collect()
}
