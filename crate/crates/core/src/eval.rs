//! Subtoken precision, recall, F1, exact match, and PCS correlation.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Set-based subtoken precision, recall, and F1 of `pred` against `target`.
pub fn prf1<S: AsRef<str>>(target: &[S], pred: &[S]) -> Result<(f64, f64, f64)> {
    if target.is_empty() {
        return Err(Error::InvalidInput("target name has no subtokens".into()));
    }
    let t: BTreeSet<&str> = target.iter().map(AsRef::as_ref).collect();
    let p: BTreeSet<&str> = pred.iter().map(AsRef::as_ref).collect();
    if p.is_empty() {
        return Ok((0.0, 0.0, 0.0));
    }
    let common = t.intersection(&p).count() as f64;
    if common == 0.0 {
        return Ok((0.0, 0.0, 0.0));
    }
    let precision = common / p.len() as f64;
    let recall = common / t.len() as f64;
    Ok((precision, recall, harmonic(precision, recall)))
}

fn harmonic(a: f64, b: f64) -> f64 {
    if a + b > 0.0 {
        2.0 * a * b / (a + b)
    } else {
        0.0
    }
}

/// Order-sensitive sequence equality.
pub fn exact_match<S: AsRef<str>>(target: &[S], pred: &[S]) -> bool {
    target.len() == pred.len() && target.iter().zip(pred).all(|(a, b)| a.as_ref() == b.as_ref())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExampleScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub em: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub per_example: Vec<ExampleScore>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Harmonic mean of the corpus precision and recall.
    pub f1_aggregate: f64,
    pub em: f64,
    pub n: usize,
}

/// Macro-averages over `(target, prediction)` pairs.
pub fn evaluate_corpus<S: AsRef<str>>(pairs: &[(Vec<S>, Vec<S>)]) -> Result<EvalResult> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no examples to evaluate".into()));
    }
    let per_example = pairs
        .iter()
        .map(|(t, p)| {
            let (precision, recall, f1) = prf1(t, p)?;
            Ok(ExampleScore {
                precision,
                recall,
                f1,
                em: exact_match(t, p),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = per_example.len();
    let mean = |f: fn(&ExampleScore) -> f64| per_example.iter().map(f).sum::<f64>() / n as f64;
    let precision = mean(|s| s.precision);
    let recall = mean(|s| s.recall);
    Ok(EvalResult {
        precision,
        recall,
        f1: mean(|s| s.f1),
        f1_aggregate: harmonic(precision, recall),
        em: mean(|s| if s.em { 1.0 } else { 0.0 }),
        n,
        per_example,
    })
}

/// Sample Pearson correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput(format!("pearson: {} vs {} values", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(Error::InvalidInput("pearson needs at least two points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InvalidInput("pearson: zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Summary written by the `eval` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub f1_aggregate: f64,
    pub em: f64,
    pub n: usize,
    /// `None` when PCS or F1 has no variance.
    pub pearson_pcs_f1: Option<f64>,
}

impl EvalReport {
    /// `pcs`, when given, holds one confidence per example.
    pub fn new(result: &EvalResult, pcs: Option<&[f64]>) -> Result<Self> {
        let pearson_pcs_f1 = match pcs {
            Some(c) if c.len() != result.n => {
                return Err(Error::InvalidInput(format!("{} confidences for {} examples", c.len(), result.n)))
            }
            Some(c) => {
                let f1: Vec<f64> = result.per_example.iter().map(|s| s.f1).collect();
                pearson(c, &f1).ok()
            }
            None => None,
        };
        Ok(EvalReport {
            precision: result.precision,
            recall: result.recall,
            f1: result.f1,
            f1_aggregate: result.f1_aggregate,
            em: result.em,
            n: result.n,
            pearson_pcs_f1,
        })
    }

    pub fn summary(&self) -> String {
        let r = self
            .pearson_pcs_f1
            .map(|r| format!(" pearson(pcs,f1)={r:.3}"))
            .unwrap_or_default();
        format!(
            "n={} P={:.2}% R={:.2}% F1={:.2}% (aggregate {:.2}%) EM={:.2}%{r}",
            self.n,
            100.0 * self.precision,
            100.0 * self.recall,
            100.0 * self.f1,
            100.0 * self.f1_aggregate,
            100.0 * self.em
        )
    }
}
