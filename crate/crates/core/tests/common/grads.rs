//! Central-difference checks of every graph primitive and of the full model.

use gtnm_core::corpus::LengthConfig;
use gtnm_core::gtnm::{Gtnm, ModelConfig};
use gtnm_core::nn::{
    ffn, grad_check, grad_compare, multi_head_attention, relative_error, AttentionParams, FfnParams,
    Graph, ParamId, ParamStore, Tensor, Var,
};
use gtnm_core::Result;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{copy_task, encode_all, vocabs};

pub const PRIMITIVE_EPS: f32 = 1e-2;
/// Pinned step for the softmax plus cross-entropy check.
pub const SOFTMAX_CE_EPS: f32 = 1e-3;
pub const MODEL_EPS: f32 = 1e-3;
pub const PRIMITIVE_TOL: f64 = 1e-3;
pub const MODEL_TOL: f64 = 1e-2;
/// Gradients below this magnitude are compared in absolute terms only:
/// 32-bit rounding in the forward pass swamps their relative error.
pub const SIGNIFICANT: f64 = 1e-2;

/// Outcome of one primitive check.
#[derive(Debug, Clone, Copy)]
pub struct Report {
    /// Largest relative error over coordinates with a significant gradient.
    pub rel: f64,
    /// Largest absolute error over every coordinate.
    pub abs: f64,
    pub significant: usize,
    pub total: usize,
}

impl Report {
    pub fn of(pairs: &[(f64, f64)]) -> Self {
        let mut r = Report {
            rel: 0.0,
            abs: 0.0,
            significant: 0,
            total: pairs.len(),
        };
        for &(a, n) in pairs {
            r.abs = r.abs.max((a - n).abs());
            if a.abs().max(n.abs()) >= SIGNIFICANT {
                r.significant += 1;
                r.rel = r.rel.max(relative_error(a, n));
            }
        }
        r
    }

    pub fn passes(&self) -> bool {
        self.rel < PRIMITIVE_TOL && self.abs < PRIMITIVE_TOL && self.significant > 0
    }
}

/// Values bounded away from zero so ReLU kinks stay outside `±eps`.
fn away_from_zero(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let v: f32 = rng.random_range(0.1..1.0);
            if rng.random::<bool>() {
                v
            } else {
                -v
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("shape")
}

/// Scalar read-out `Σ c ⊙ y` with fixed random `c`, so every output element
/// gets a distinct gradient.
fn readout(g: &mut Graph, y: Var, seed: u64) -> Result<Var> {
    let shape = g.value(y).shape.clone();
    let c = Tensor::uniform(&shape, 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
    let c = g.constant(c);
    let p = g.mul(y, c)?;
    Ok(g.sum(p))
}

fn all_coords(store: &ParamStore) -> Vec<(ParamId, usize)> {
    store
        .ids()
        .flat_map(|id| (0..store.get(id).len()).map(move |i| (id, i)))
        .collect()
}

struct Case {
    store: ParamStore,
    ids: Vec<ParamId>,
    rng: ChaCha8Rng,
}

impl Case {
    fn new(seed: u64) -> Self {
        Case {
            store: ParamStore::new(),
            ids: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn input(mut self, shape: &[usize]) -> Self {
        let t = away_from_zero(shape, &mut self.rng);
        let name = format!("in{}", self.ids.len());
        self.ids.push(self.store.add(name, t));
        self
    }

    fn check<F>(&self, f: F) -> Result<Report>
    where
        F: Fn(&mut Graph, &[Var]) -> Result<Var>,
    {
        let ids = self.ids.clone();
        self.compare(PRIMITIVE_EPS, |g| {
            let vars: Vec<Var> = ids.iter().map(|&id| g.param(id)).collect();
            let y = f(g, &vars)?;
            readout(g, y, 99)
        })
    }

    /// `f` builds the scalar loss itself.
    fn compare<F>(&self, eps: f32, f: F) -> Result<Report>
    where
        F: Fn(&mut Graph) -> Result<Var>,
    {
        Ok(Report::of(&grad_compare(&self.store, &all_coords(&self.store), eps, f)?))
    }
}

/// Maximum relative error per primitive, in a fixed order.
pub fn primitive_errors() -> Result<Vec<(&'static str, Report)>> {
    let mut out = Vec::new();
    out.push(("matmul", Case::new(1).input(&[3, 4]).input(&[4, 5]).check(|g, v| g.matmul(v[0], v[1]))?));
    out.push(("matmul_nt", Case::new(2).input(&[3, 4]).input(&[5, 4]).check(|g, v| g.matmul_nt(v[0], v[1]))?));
    out.push(("add", Case::new(3).input(&[3, 4]).input(&[3, 4]).check(|g, v| g.add(v[0], v[1]))?));
    out.push(("add_bias", Case::new(4).input(&[3, 4]).input(&[4]).check(|g, v| g.add_bias(v[0], v[1]))?));
    out.push(("scale", Case::new(5).input(&[3, 4]).check(|g, v| Ok(g.scale(v[0], -1.7)))?));
    out.push(("mul", Case::new(6).input(&[3, 4]).input(&[3, 4]).check(|g, v| g.mul(v[0], v[1]))?));
    out.push(("relu", Case::new(7).input(&[4, 4]).check(|g, v| Ok(g.relu(v[0])))?));
    out.push((
        "concat_rows",
        Case::new(8).input(&[2, 3]).input(&[4, 3]).check(|g, v| g.concat_rows(&[v[0], v[1]]))?,
    ));
    out.push((
        "concat_cols",
        Case::new(9).input(&[3, 2]).input(&[3, 5]).check(|g, v| g.concat_cols(&[v[0], v[1]]))?,
    ));
    out.push(("slice_cols", Case::new(10).input(&[3, 6]).check(|g, v| g.slice_cols(v[0], 2, 3))?));
    {
        let c = Case::new(11).input(&[6, 4]);
        let table = c.ids[0];
        out.push((
            "embedding",
            c.compare(PRIMITIVE_EPS, |g| {
                let e = g.embedding(table, &[0, 3, 3, 5, 1])?;
                readout(g, e, 99)
            })?,
        ));
    }
    out.push((
        "layer_norm",
        Case::new(12)
            .input(&[3, 6])
            .input(&[6])
            .input(&[6])
            .check(|g, v| g.layer_norm(v[0], v[1], v[2]))?,
    ));
    out.push(("softmax", Case::new(13).input(&[3, 5]).check(|g, v| g.softmax(v[0], None))?));
    {
        let allowed = [true, false, true, true, false, false, true, true, true, true, true, false, true, false, false];
        out.push((
            "softmax_masked",
            Case::new(14).input(&[3, 5]).check(move |g, v| g.softmax(v[0], Some(&allowed)))?,
        ));
    }
    out.push((
        "scale_rows",
        Case::new(15).input(&[4, 3]).check(|g, v| g.scale_rows(v[0], &[0.5, 0.0, 2.0, 0.25]))?,
    ));
    {
        let c = Case::new(16).input(&[4, 6]);
        let x = c.ids[0];
        out.push((
            "cross_entropy",
            c.compare(PRIMITIVE_EPS, |g| {
                let l = g.param(x);
                g.cross_entropy(l, &[Some(2), None, Some(0), Some(5)])
            })?,
        ));
    }
    out.push(("sum", Case::new(17).input(&[3, 4]).check(|g, v| Ok(g.sum(v[0])))?));
    out.push(("dropout", dropout_error()?));
    {
        let mut c = Case::new(18).input(&[3, 8]).input(&[4, 8]);
        let p = AttentionParams::new(&mut c.store, "attn", 8, 2, &mut c.rng)?;
        let mask = [true, false, true, true];
        out.push((
            "multi_head_attention",
            c.check(|g, v| multi_head_attention(g, v[0], v[1], &p, Some(&mask), false))?,
        ));
        let mut c = Case::new(19).input(&[4, 8]);
        let p = AttentionParams::new(&mut c.store, "attn", 8, 4, &mut c.rng)?;
        out.push((
            "causal_self_attention",
            c.check(|g, v| multi_head_attention(g, v[0], v[0], &p, None, true))?,
        ));
    }
    {
        let mut c = Case::new(20).input(&[3, 6]);
        let p = FfnParams::new(&mut c.store, "ffn", 6, 12, &mut c.rng);
        out.push(("ffn", c.check(|g, v| ffn(g, v[0], &p))?));
    }
    out.push(("softmax_cross_entropy_dim7", softmax_ce_dim7()?));
    Ok(out)
}

/// Dropout under a fixed training mask: each evaluation replays the same
/// random stream.
fn dropout_error() -> Result<Report> {
    let c = Case::new(21).input(&[3, 5]);
    let x = c.ids[0];
    let loss = |s: &ParamStore, grads: Option<&mut gtnm_core::nn::Grads>| -> Result<f64> {
        let mut g = Graph::training(s, ChaCha8Rng::seed_from_u64(5));
        let v = g.param(x);
        let y = g.dropout(v, 0.4)?;
        let r = readout(&mut g, y, 99)?;
        if let Some(gr) = grads {
            g.backward(r, gr, 1.0)?;
        }
        Ok(f64::from(g.value(r).data[0]))
    };
    let mut grads = c.store.zero_grads();
    loss(&c.store, Some(&mut grads))?;
    let mut probe = c.store.clone();
    let mut pairs = Vec::new();
    for i in 0..probe.get(x).len() {
        let orig = probe.get(x).data[i];
        probe.get_mut(x).data[i] = orig + PRIMITIVE_EPS;
        let up = loss(&probe, None)?;
        probe.get_mut(x).data[i] = orig - PRIMITIVE_EPS;
        let down = loss(&probe, None)?;
        probe.get_mut(x).data[i] = orig;
        let numeric = (up - down) / (2.0 * f64::from(PRIMITIVE_EPS));
        pairs.push((f64::from(grads.get(x)[i]), numeric));
    }
    Ok(Report::of(&pairs))
}

/// Softmax followed by cross-entropy over seven classes.
fn softmax_ce_dim7() -> Result<Report> {
    let c = Case::new(22).input(&[2, 7]);
    let x = c.ids[0];
    c.compare(SOFTMAX_CE_EPS, |g| {
        let l = g.param(x);
        g.cross_entropy(l, &[Some(3), Some(6)])
    })
}

pub fn tiny_lengths() -> LengthConfig {
    LengthConfig {
        local: 5,
        infile: 4,
        crossfile: 2,
        doc: 3,
        target: 3,
    }
}

/// Desk architecture shrunk to dimensions of at most 16.
pub fn tiny_config(code_vocab: usize, doc_vocab: usize) -> ModelConfig {
    ModelConfig {
        layers: 2,
        d_model: 16,
        heads: 4,
        d_ff: 16,
        dropout: 0.0,
        code_vocab,
        doc_vocab,
        lengths: tiny_lengths(),
    }
}

/// Checks the full training loss on `samples` coordinates drawn from those
/// whose gradient magnitude is at least `min_grad`.
pub fn model_error(samples: usize, seed: u64) -> Result<f64> {
    let recs = copy_task(4, seed);
    let (code, doc) = vocabs(&recs);
    let cfg = tiny_config(code.len(), doc.len());
    let ex = encode_all(&recs, &code, &doc, &cfg.lengths).swap_remove(0);
    let model = Gtnm::new(cfg, seed)?;
    let mut grads = model.params.zero_grads();
    {
        let mut g = Graph::new(&model.params);
        let l = model.forward_loss(&mut g, &ex)?;
        g.backward(l, &mut grads, 1.0)?;
    }
    let min_grad = 0.02f32;
    let mut pool: Vec<(ParamId, usize)> = Vec::new();
    for id in model.params.ids() {
        for (i, v) in grads.get(id).iter().enumerate() {
            if v.abs() >= min_grad {
                pool.push((id, i));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
    let coords: Vec<(ParamId, usize)> = pool.choose_multiple(&mut rng, samples).copied().collect();
    if coords.len() < samples {
        return Err(gtnm_core::Error::InvalidInput(format!(
            "only {} coordinates with gradient ≥ {min_grad}",
            coords.len()
        )));
    }
    grad_check(&model.params, &coords, MODEL_EPS, |g| model.forward_loss(g, &ex))
}
