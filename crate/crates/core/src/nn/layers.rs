use rand::Rng;

use super::{Graph, ParamId, ParamStore, Tensor, Var};
use crate::error::{Error, Result};

fn xavier(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    let limit = (6.0 / (rows + cols) as f32).sqrt();
    Tensor::uniform(&[rows, cols], limit, rng)
}

/// Packed per-head projections: head `h` uses columns `h·d_k..(h+1)·d_k` of
/// `wq`, `wk` and `wv`. `wo` maps the concatenated heads back to `d_model`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttentionParams {
    pub wq: ParamId,
    pub wk: ParamId,
    pub wv: ParamId,
    pub wo: ParamId,
    pub heads: usize,
}

impl AttentionParams {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        d_model: usize,
        heads: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if heads == 0 || !d_model.is_multiple_of(heads) {
            return Err(Error::Config(format!("{heads} heads do not divide d_model {d_model}")));
        }
        Ok(AttentionParams {
            wq: store.add(format!("{prefix}.wq"), xavier(d_model, d_model, rng)),
            wk: store.add(format!("{prefix}.wk"), xavier(d_model, d_model, rng)),
            wv: store.add(format!("{prefix}.wv"), xavier(d_model, d_model, rng)),
            wo: store.add(format!("{prefix}.wo"), xavier(d_model, d_model, rng)),
            heads,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FfnParams {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

impl FfnParams {
    pub fn new(store: &mut ParamStore, prefix: &str, d_model: usize, d_ff: usize, rng: &mut impl Rng) -> Self {
        FfnParams {
            w1: store.add(format!("{prefix}.w1"), xavier(d_model, d_ff, rng)),
            b1: store.add(format!("{prefix}.b1"), Tensor::zeros(&[d_ff])),
            w2: store.add(format!("{prefix}.w2"), xavier(d_ff, d_model, rng)),
            b2: store.add(format!("{prefix}.b2"), Tensor::zeros(&[d_model])),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerNormParams {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNormParams {
    pub fn new(store: &mut ParamStore, prefix: &str, d_model: usize) -> Self {
        LayerNormParams {
            gamma: store.add(format!("{prefix}.gamma"), Tensor::filled(&[d_model], 1.0)),
            beta: store.add(format!("{prefix}.beta"), Tensor::zeros(&[d_model])),
        }
    }

    pub fn apply(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let (gm, bt) = (g.param(self.gamma), g.param(self.beta));
        g.layer_norm(x, gm, bt)
    }
}

/// Scaled dot-product attention over `heads` heads followed by the output
/// projection. `key_mask[j]` false removes key `j`; `causal` removes keys
/// after the query position.
pub fn multi_head_attention(
    g: &mut Graph,
    q_in: Var,
    kv_in: Var,
    p: &AttentionParams,
    key_mask: Option<&[bool]>,
    causal: bool,
) -> Result<Var> {
    let (nq, d) = g.value(q_in).dims2();
    let (nk, dk_in) = g.value(kv_in).dims2();
    if dk_in != d {
        return Err(Error::Shape {
            op: "attention",
            left: g.value(q_in).shape.clone(),
            right: g.value(kv_in).shape.clone(),
        });
    }
    if let Some(m) = key_mask {
        if m.len() != nk {
            return Err(Error::Shape {
                op: "attention mask",
                left: vec![nk],
                right: vec![m.len()],
            });
        }
    }
    let allowed: Option<Vec<bool>> = (key_mask.is_some() || causal).then(|| {
        (0..nq * nk)
            .map(|ij| {
                let (i, j) = (ij / nk, ij % nk);
                key_mask.is_none_or(|m| m[j]) && (!causal || j <= i)
            })
            .collect()
    });

    let dk = d / p.heads;
    let (wq, wk, wv, wo) = (g.param(p.wq), g.param(p.wk), g.param(p.wv), g.param(p.wo));
    let q = g.matmul(q_in, wq)?;
    let k = g.matmul(kv_in, wk)?;
    let v = g.matmul(kv_in, wv)?;
    let scale = 1.0 / (dk as f32).sqrt();
    let mut heads = Vec::with_capacity(p.heads);
    for h in 0..p.heads {
        let qh = g.slice_cols(q, h * dk, dk)?;
        let kh = g.slice_cols(k, h * dk, dk)?;
        let vh = g.slice_cols(v, h * dk, dk)?;
        let e = g.matmul_nt(qh, kh)?;
        let e = g.scale(e, scale);
        let a = g.softmax(e, allowed.as_deref())?;
        heads.push(g.matmul(a, vh)?);
    }
    let cat = if heads.len() == 1 { heads[0] } else { g.concat_cols(&heads)? };
    g.matmul(cat, wo)
}

/// `max(0, x·W1 + b1)·W2 + b2`.
pub fn ffn(g: &mut Graph, x: Var, p: &FfnParams) -> Result<Var> {
    let (w1, b1, w2, b2) = (g.param(p.w1), g.param(p.b1), g.param(p.w2), g.param(p.b2));
    let h = g.matmul(x, w1)?;
    let h = g.add_bias(h, b1)?;
    let h = g.relu(h);
    let o = g.matmul(h, w2)?;
    g.add_bias(o, b2)
}

/// Back-propagated gradient and central difference
/// `(f(θ+eps) − f(θ−eps)) / 2eps` at each of the given coordinates.
///
/// `f` builds a scalar loss on an inference graph, so dropout is off.
pub fn grad_compare<F>(store: &ParamStore, coords: &[(ParamId, usize)], eps: f32, f: F) -> Result<Vec<(f64, f64)>>
where
    F: Fn(&mut Graph) -> Result<Var>,
{
    let mut grads = store.zero_grads();
    {
        let mut g = Graph::new(store);
        let root = f(&mut g)?;
        g.backward(root, &mut grads, 1.0)?;
    }
    let eval = |s: &ParamStore| -> Result<f64> {
        let mut g = Graph::new(s);
        let root = f(&mut g)?;
        Ok(f64::from(g.value(root).data[0]))
    };
    let mut probe = store.clone();
    let mut out = Vec::with_capacity(coords.len());
    for &(id, i) in coords {
        let orig = probe.get(id).data[i];
        probe.get_mut(id).data[i] = orig + eps;
        let up = eval(&probe)?;
        probe.get_mut(id).data[i] = orig - eps;
        let down = eval(&probe)?;
        probe.get_mut(id).data[i] = orig;
        let numeric = (up - down) / (2.0 * f64::from(eps));
        out.push((f64::from(grads.get(id)[i]), numeric));
    }
    Ok(out)
}

/// `|a − n| / max(|a|, |n|)`, zero when both vanish.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs());
    if denom > 0.0 {
        (analytic - numeric).abs() / denom
    } else {
        0.0
    }
}

/// Largest relative error of [`grad_compare`] over `coords`.
pub fn grad_check<F>(store: &ParamStore, coords: &[(ParamId, usize)], eps: f32, f: F) -> Result<f64>
where
    F: Fn(&mut Graph) -> Result<Var>,
{
    Ok(grad_compare(store, coords, eps, f)?
        .into_iter()
        .map(|(a, n)| relative_error(a, n))
        .fold(0.0, f64::max))
}
