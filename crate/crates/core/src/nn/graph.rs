use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{matmul_acc, matmul_nt_acc, matmul_tn_acc, Grads, ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

const LN_EPS: f32 = 1e-5;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Const,
    Param(ParamId),
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Add(Var, Var),
    AddBias(Var, Var),
    Scale(Var, f32),
    Mul(Var, Var),
    Relu(Var),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    Embedding(ParamId, Vec<u32>),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f32>,
        rstd: Vec<f32>,
    },
    Dropout(Var, Vec<f32>),
    Softmax(Var),
    ScaleRows(Var, Vec<f32>),
    CrossEntropy {
        logits: Var,
        targets: Vec<Option<u32>>,
        probs: Vec<f32>,
        count: usize,
    },
    Sum(Var),
}

struct Node {
    /// `None` for parameters, which are read from the store.
    value: Option<Tensor>,
    op: Op,
}

/// Records a forward computation over parameters borrowed from a store so it
/// can be differentiated with [`Graph::backward`].
pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    rng: Option<ChaCha8Rng>,
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape {
        op,
        left: a.shape.clone(),
        right: b.shape.clone(),
    }
}

impl<'p> Graph<'p> {
    /// Inference graph: dropout is the identity.
    pub fn new(params: &'p ParamStore) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
            rng: None,
        }
    }

    /// Training graph: dropout masks are drawn from `rng`.
    pub fn training(params: &'p ParamStore, rng: ChaCha8Rng) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
            rng: Some(rng),
        }
    }

    pub fn is_training(&self) -> bool {
        self.rng.is_some()
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.params.get(*id),
            (None, _) => unreachable!("non-parameter node without a value"),
        }
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Const)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let ((m, k), (k2, n)) = (ta.dims2(), tb.dims2());
        if k != k2 {
            return Err(shape_err("matmul", ta, tb));
        }
        let mut out = vec![0.0; m * n];
        matmul_acc(&ta.data, &tb.data, &mut out, m, k, n);
        Ok(self.push(Tensor { shape: vec![m, n], data: out }, Op::MatMul(a, b)))
    }

    /// `a · bᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let ((m, k), (n, k2)) = (ta.dims2(), tb.dims2());
        if k != k2 {
            return Err(shape_err("matmul_nt", ta, tb));
        }
        let mut out = vec![0.0; m * n];
        matmul_nt_acc(&ta.data, &tb.data, &mut out, m, k, n);
        Ok(self.push(Tensor { shape: vec![m, n], data: out }, Op::MatMulNt(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape != tb.shape {
            return Err(shape_err("add", ta, tb));
        }
        let data = ta.data.iter().zip(&tb.data).map(|(x, y)| x + y).collect();
        let shape = ta.shape.clone();
        Ok(self.push(Tensor { shape, data }, Op::Add(a, b)))
    }

    /// Adds a length-`d` bias to every row of an `n×d` input.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(b));
        let (_, d) = tx.dims2();
        if tb.len() != d {
            return Err(shape_err("add_bias", tx, tb));
        }
        let mut data = tx.data.clone();
        for row in data.chunks_mut(d.max(1)) {
            for (v, bv) in row.iter_mut().zip(&tb.data) {
                *v += bv;
            }
        }
        let shape = tx.shape.clone();
        Ok(self.push(Tensor { shape, data }, Op::AddBias(x, b)))
    }

    pub fn scale(&mut self, x: Var, s: f32) -> Var {
        let t = self.value(x);
        let data = t.data.iter().map(|v| v * s).collect();
        let shape = t.shape.clone();
        self.push(Tensor { shape, data }, Op::Scale(x, s))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape != tb.shape {
            return Err(shape_err("mul", ta, tb));
        }
        let data = ta.data.iter().zip(&tb.data).map(|(x, y)| x * y).collect();
        let shape = ta.shape.clone();
        Ok(self.push(Tensor { shape, data }, Op::Mul(a, b)))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let data = t.data.iter().map(|v| v.max(0.0)).collect();
        let shape = t.shape.clone();
        self.push(Tensor { shape, data }, Op::Relu(x))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = self.value(parts[0]).shape.clone();
        let cols = self.value(parts[0]).dims2().1;
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            let (r, c) = t.dims2();
            if c != cols {
                return Err(Error::Shape {
                    op: "concat_rows",
                    left: first,
                    right: t.shape.clone(),
                });
            }
            rows += r;
            data.extend_from_slice(&t.data);
        }
        Ok(self.push(Tensor { shape: vec![rows, cols], data }, Op::ConcatRows(parts.to_vec())))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = self.value(parts[0]).shape.clone();
        let rows = self.value(parts[0]).dims2().0;
        let mut total = 0;
        for &p in parts {
            let t = self.value(p);
            if t.dims2().0 != rows {
                return Err(Error::Shape {
                    op: "concat_cols",
                    left: first,
                    right: t.shape.clone(),
                });
            }
            total += t.dims2().1;
        }
        let mut data = Vec::with_capacity(rows * total);
        for i in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(i));
            }
        }
        Ok(self.push(Tensor { shape: vec![rows, total], data }, Op::ConcatCols(parts.to_vec())))
    }

    /// Columns `start..start + width`.
    pub fn slice_cols(&mut self, x: Var, start: usize, width: usize) -> Result<Var> {
        let t = self.value(x);
        let (rows, cols) = t.dims2();
        if start + width > cols {
            return Err(Error::Shape {
                op: "slice_cols",
                left: t.shape.clone(),
                right: vec![start, width],
            });
        }
        let mut data = Vec::with_capacity(rows * width);
        for i in 0..rows {
            data.extend_from_slice(&t.row(i)[start..start + width]);
        }
        Ok(self.push(Tensor { shape: vec![rows, width], data }, Op::SliceCols(x, start)))
    }

    /// Gathers rows of the embedding table `table` for `ids`.
    pub fn embedding(&mut self, table: ParamId, ids: &[u32]) -> Result<Var> {
        let t = self.params.get(table);
        let (size, d) = t.dims2();
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id as usize >= size {
                return Err(Error::IdOutOfRange { id, size });
            }
            data.extend_from_slice(t.row(id as usize));
        }
        Ok(self.push(
            Tensor { shape: vec![ids.len(), d], data },
            Op::Embedding(table, ids.to_vec()),
        ))
    }

    /// Normalizes each row to zero mean and unit variance, then applies
    /// `gamma` and `beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let (tx, tg, tb) = (self.value(x), self.value(gamma), self.value(beta));
        let (rows, d) = tx.dims2();
        if tg.len() != d || tb.len() != d {
            return Err(shape_err("layer_norm", tx, tg));
        }
        let mut xhat = vec![0.0; rows * d];
        let mut rstd = vec![0.0; rows];
        let mut out = vec![0.0; rows * d];
        for i in 0..rows {
            let row = tx.row(i);
            let mean = row.iter().map(|&v| f64::from(v)).sum::<f64>() / d as f64;
            let var = row.iter().map(|&v| (f64::from(v) - mean).powi(2)).sum::<f64>() / d as f64;
            let r = 1.0 / (var + f64::from(LN_EPS)).sqrt();
            rstd[i] = r as f32;
            for j in 0..d {
                let h = ((f64::from(row[j]) - mean) * r) as f32;
                xhat[i * d + j] = h;
                out[i * d + j] = h * tg.data[j] + tb.data[j];
            }
        }
        let shape = tx.shape.clone();
        Ok(self.push(
            Tensor { shape, data: out },
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            },
        ))
    }

    /// Inverted dropout; the identity outside training or when `p == 0`.
    pub fn dropout(&mut self, x: Var, p: f32) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Config(format!("dropout probability {p} outside [0, 1)")));
        }
        if p == 0.0 || self.rng.is_none() {
            return Ok(x);
        }
        let n = self.value(x).len();
        let keep = 1.0 / (1.0 - p);
        let rng = self.rng.as_mut().expect("training graph");
        let mask: Vec<f32> = (0..n)
            .map(|_| if rng.random::<f32>() < p { 0.0 } else { keep })
            .collect();
        let t = self.value(x);
        let data = t.data.iter().zip(&mask).map(|(v, m)| v * m).collect();
        let shape = t.shape.clone();
        Ok(self.push(Tensor { shape, data }, Op::Dropout(x, mask)))
    }

    /// Row-wise softmax. `allowed`, when given, has one flag per element;
    /// disallowed positions get probability 0. A row with no allowed
    /// position is an error.
    pub fn softmax(&mut self, x: Var, allowed: Option<&[bool]>) -> Result<Var> {
        let t = self.value(x);
        if let Some(a) = allowed {
            if a.len() != t.len() {
                return Err(Error::Shape {
                    op: "softmax",
                    left: t.shape.clone(),
                    right: vec![a.len()],
                });
            }
        }
        let data = softmax_rows(t, allowed)?;
        let shape = t.shape.clone();
        Ok(self.push(Tensor { shape, data }, Op::Softmax(x)))
    }

    /// Multiplies row `i` by the constant `w[i]`.
    pub fn scale_rows(&mut self, x: Var, w: &[f32]) -> Result<Var> {
        let t = self.value(x);
        let (rows, d) = t.dims2();
        if w.len() != rows {
            return Err(Error::Shape {
                op: "scale_rows",
                left: t.shape.clone(),
                right: vec![w.len()],
            });
        }
        let mut data = t.data.clone();
        for (i, row) in data.chunks_mut(d.max(1)).enumerate() {
            for v in row {
                *v *= w[i];
            }
        }
        let shape = t.shape.clone();
        Ok(self.push(Tensor { shape, data }, Op::ScaleRows(x, w.to_vec())))
    }

    /// Mean negative log-likelihood of `targets` under row-wise softmax of
    /// `logits`; `None` targets are skipped.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[Option<u32>]) -> Result<Var> {
        let t = self.value(logits);
        let (rows, v) = t.dims2();
        if targets.len() != rows {
            return Err(Error::Shape {
                op: "cross_entropy",
                left: t.shape.clone(),
                right: vec![targets.len()],
            });
        }
        let count = targets.iter().flatten().count();
        if count == 0 {
            return Err(Error::InvalidInput("cross-entropy over no target positions".into()));
        }
        let mut probs = vec![0.0f32; rows * v];
        let mut total = 0.0f64;
        for (i, tgt) in targets.iter().enumerate() {
            let Some(y) = *tgt else { continue };
            if y as usize >= v {
                return Err(Error::IdOutOfRange { id: y, size: v });
            }
            let row = t.row(i);
            let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            let z: f64 = row.iter().map(|&l| f64::from(l - max).exp()).sum();
            for j in 0..v {
                probs[i * v + j] = (f64::from(row[j] - max).exp() / z) as f32;
            }
            total += z.ln() - f64::from(row[y as usize] - max);
        }
        let loss = (total / count as f64) as f32;
        Ok(self.push(
            Tensor {
                shape: vec![1],
                data: vec![loss],
            },
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
                count,
            },
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data.iter().map(|&v| f64::from(v)).sum::<f64>() as f32;
        self.push(
            Tensor {
                shape: vec![1],
                data: vec![s],
            },
            Op::Sum(x),
        )
    }

    /// Back-propagates from the scalar `root`, adding `scale · ∂root/∂θ` into
    /// `grads` for every parameter reached.
    pub fn backward(&self, root: Var, grads: &mut Grads, scale: f32) -> Result<()> {
        let rt = self.value(root);
        if rt.len() != 1 {
            return Err(Error::NonScalarRoot(rt.shape.clone()));
        }
        let mut gs: Vec<Option<Vec<f32>>> = Vec::with_capacity(root.0 + 1);
        gs.resize_with(root.0 + 1, || None);
        gs[root.0] = Some(vec![scale]);

        for i in (0..=root.0).rev() {
            let Some(g) = gs[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Const => {}
                Op::Param(id) => add_into(&mut grads.bufs[id.0], &g),
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let ((m, k), (_, n)) = (ta.dims2(), tb.dims2());
                    acc(&mut gs, *a, ta.len(), |ga| matmul_nt_acc(&g, &tb.data, ga, m, n, k));
                    acc(&mut gs, *b, tb.len(), |gb| matmul_tn_acc(&ta.data, &g, gb, m, k, n));
                }
                Op::MatMulNt(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let ((m, k), (n, _)) = (ta.dims2(), tb.dims2());
                    acc(&mut gs, *a, ta.len(), |ga| matmul_acc(&g, &tb.data, ga, m, n, k));
                    acc(&mut gs, *b, tb.len(), |gb| matmul_tn_acc(&g, &ta.data, gb, m, n, k));
                }
                Op::Add(a, b) => {
                    acc(&mut gs, *a, g.len(), |ga| add_into(ga, &g));
                    acc(&mut gs, *b, g.len(), |gb| add_into(gb, &g));
                }
                Op::AddBias(x, b) => {
                    let d = self.value(*b).len();
                    acc(&mut gs, *x, g.len(), |gx| add_into(gx, &g));
                    acc(&mut gs, *b, d, |gb| {
                        for row in g.chunks(d.max(1)) {
                            add_into(gb, row);
                        }
                    });
                }
                Op::Scale(x, s) => acc(&mut gs, *x, g.len(), |gx| {
                    for (o, v) in gx.iter_mut().zip(&g) {
                        *o += s * v;
                    }
                }),
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    acc(&mut gs, *a, g.len(), |ga| {
                        for ((o, v), y) in ga.iter_mut().zip(&g).zip(&tb.data) {
                            *o += v * y;
                        }
                    });
                    acc(&mut gs, *b, g.len(), |gb| {
                        for ((o, v), x) in gb.iter_mut().zip(&g).zip(&ta.data) {
                            *o += v * x;
                        }
                    });
                }
                Op::Relu(x) => {
                    let out = node.value.as_ref().expect("relu value");
                    acc(&mut gs, *x, g.len(), |gx| {
                        for ((o, v), y) in gx.iter_mut().zip(&g).zip(&out.data) {
                            if *y > 0.0 {
                                *o += v;
                            }
                        }
                    });
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let n = self.value(*p).len();
                        acc(&mut gs, *p, n, |gp| add_into(gp, &g[off..off + n]));
                        off += n;
                    }
                }
                Op::ConcatCols(parts) => {
                    let total = node.value.as_ref().expect("concat value").dims2().1;
                    let mut col = 0;
                    for p in parts {
                        let (rows, c) = self.value(*p).dims2();
                        acc(&mut gs, *p, rows * c, |gp| {
                            for r in 0..rows {
                                add_into(
                                    &mut gp[r * c..(r + 1) * c],
                                    &g[r * total + col..r * total + col + c],
                                );
                            }
                        });
                        col += c;
                    }
                }
                Op::SliceCols(x, start) => {
                    let (rows, cols) = self.value(*x).dims2();
                    let w = node.value.as_ref().expect("slice value").dims2().1;
                    acc(&mut gs, *x, rows * cols, |gx| {
                        for r in 0..rows {
                            add_into(
                                &mut gx[r * cols + start..r * cols + start + w],
                                &g[r * w..(r + 1) * w],
                            );
                        }
                    });
                }
                Op::Embedding(table, ids) => {
                    let d = self.params.get(*table).dims2().1;
                    let buf = &mut grads.bufs[table.0];
                    for (r, &id) in ids.iter().enumerate() {
                        let id = id as usize;
                        add_into(&mut buf[id * d..(id + 1) * d], &g[r * d..(r + 1) * d]);
                    }
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    rstd,
                } => {
                    let tg = self.value(*gamma);
                    let d = tg.len();
                    let rows = rstd.len();
                    acc(&mut gs, *gamma, d, |gg| {
                        for (k, (gv, h)) in g.iter().zip(xhat).enumerate() {
                            gg[k % d] += gv * h;
                        }
                    });
                    acc(&mut gs, *beta, d, |gb| {
                        for row in g.chunks(d) {
                            add_into(gb, row);
                        }
                    });
                    acc(&mut gs, *x, rows * d, |gx| {
                        for i in 0..rows {
                            let gr = &g[i * d..(i + 1) * d];
                            let hr = &xhat[i * d..(i + 1) * d];
                            let mut mean_dh = 0.0f32;
                            let mut mean_dh_h = 0.0f32;
                            for j in 0..d {
                                let dh = gr[j] * tg.data[j];
                                mean_dh += dh;
                                mean_dh_h += dh * hr[j];
                            }
                            mean_dh /= d as f32;
                            mean_dh_h /= d as f32;
                            for j in 0..d {
                                let dh = gr[j] * tg.data[j];
                                gx[i * d + j] += rstd[i] * (dh - mean_dh - hr[j] * mean_dh_h);
                            }
                        }
                    });
                }
                Op::Dropout(x, mask) => acc(&mut gs, *x, g.len(), |gx| {
                    for ((o, v), m) in gx.iter_mut().zip(&g).zip(mask) {
                        *o += v * m;
                    }
                }),
                Op::Softmax(x) => {
                    let p = node.value.as_ref().expect("softmax value");
                    let (rows, c) = p.dims2();
                    acc(&mut gs, *x, rows * c, |gx| {
                        for r in 0..rows {
                            let pr = p.row(r);
                            let gr = &g[r * c..(r + 1) * c];
                            let dotp: f32 = pr.iter().zip(gr).map(|(a, b)| a * b).sum();
                            for j in 0..c {
                                gx[r * c + j] += pr[j] * (gr[j] - dotp);
                            }
                        }
                    });
                }
                Op::ScaleRows(x, w) => {
                    let (rows, d) = self.value(*x).dims2();
                    acc(&mut gs, *x, rows * d, |gx| {
                        for r in 0..rows {
                            for j in 0..d {
                                gx[r * d + j] += w[r] * g[r * d + j];
                            }
                        }
                    });
                }
                Op::CrossEntropy {
                    logits,
                    targets,
                    probs,
                    count,
                } => {
                    let (rows, v) = self.value(*logits).dims2();
                    let s = g[0] / *count as f32;
                    acc(&mut gs, *logits, rows * v, |gl| {
                        for (r, t) in targets.iter().enumerate() {
                            let Some(y) = *t else { continue };
                            for j in 0..v {
                                gl[r * v + j] += s * probs[r * v + j];
                            }
                            gl[r * v + y as usize] -= s;
                        }
                    });
                }
                Op::Sum(x) => {
                    let n = self.value(*x).len();
                    acc(&mut gs, *x, n, |gx| {
                        for o in gx {
                            *o += g[0];
                        }
                    });
                }
            }
        }
        Ok(())
    }
}

fn add_into(dst: &mut [f32], src: &[f32]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn acc(gs: &mut [Option<Vec<f32>>], v: Var, len: usize, f: impl FnOnce(&mut [f32])) {
    let buf = gs[v.0].get_or_insert_with(|| vec![0.0; len]);
    f(buf);
}

/// Masked row-wise softmax over `t`.
pub(crate) fn softmax_rows(t: &Tensor, allowed: Option<&[bool]>) -> Result<Vec<f32>> {
    let (rows, c) = t.dims2();
    let mut out = vec![0.0f32; rows * c];
    for r in 0..rows {
        let row = t.row(r);
        let ok = |j: usize| allowed.is_none_or(|a| a[r * c + j]);
        let max = (0..c)
            .filter(|&j| ok(j))
            .map(|j| row[j])
            .fold(f32::NEG_INFINITY, f32::max);
        if max == f32::NEG_INFINITY {
            return Err(Error::FullyMaskedRow { row: r });
        }
        let mut z = 0.0f64;
        for j in (0..c).filter(|&j| ok(j)) {
            let e = f64::from(row[j] - max).exp();
            out[r * c + j] = e as f32;
            z += e;
        }
        for j in 0..c {
            out[r * c + j] = (f64::from(out[r * c + j]) / z) as f32;
        }
    }
    Ok(out)
}
