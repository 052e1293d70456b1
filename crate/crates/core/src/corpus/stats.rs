use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::MethodRecord;
use crate::error::{Error, Result};

/// Share of a population whose target subtokens appear in one context level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    /// Percentage with at least one target subtoken present; `None` when the
    /// population is empty.
    pub pct_any: Option<f64>,
    /// Percentage with every target subtoken present.
    pub pct_all: Option<f64>,
    pub population: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub identifiers: LevelStats,
    pub return_params: LevelStats,
    pub in_file: LevelStats,
    pub cross_file: LevelStats,
    /// Over documented methods only.
    pub doc: LevelStats,
    /// No target subtoken in the local context but at least one in the
    /// project context. Only `pct_any` is meaningful here.
    pub project_only: LevelStats,
}

#[derive(Default, Clone, Copy)]
struct Counter {
    any: usize,
    all: usize,
    population: usize,
}

impl Counter {
    fn add(&mut self, any: bool, all: bool) {
        self.population += 1;
        self.any += usize::from(any);
        self.all += usize::from(all);
    }

    fn finish(self, with_all: bool) -> LevelStats {
        let pct = |k: usize| (self.population > 0).then(|| 100.0 * k as f64 / self.population as f64);
        LevelStats {
            pct_any: pct(self.any),
            pct_all: if with_all { pct(self.all) } else { None },
            population: self.population,
        }
    }
}

fn overlap(target: &[String], ctx: &[String]) -> (bool, bool) {
    let set: HashSet<&str> = ctx.iter().map(String::as_str).collect();
    let any = target.iter().any(|t| set.contains(t.as_str()));
    let all = target.iter().all(|t| set.contains(t.as_str()));
    (any, all)
}

/// Token-sharing percentages between method names and each context level.
/// Identifiers are the body part of the local context; return type and
/// parameters are its signature part.
pub fn stats_overlap(records: &[MethodRecord]) -> Result<OverlapReport> {
    if records.is_empty() {
        return Err(Error::InvalidInput("no records to analyse".into()));
    }
    let [mut ids, mut sig, mut infile, mut cross, mut doc, mut proj] = [Counter::default(); 6];
    for r in records {
        let split = r.signature_len.min(r.local.len());
        let (body_any, body_all) = overlap(&r.target, &r.local[split..]);
        ids.add(body_any, body_all);
        let (a, b) = overlap(&r.target, &r.local[..split]);
        sig.add(a, b);
        let (a, b) = overlap(&r.target, &r.pro_infile);
        infile.add(a, b);
        let (a, b) = overlap(&r.target, &r.pro_crossfile);
        cross.add(a, b);
        if !r.doc.is_empty() {
            let (a, b) = overlap(&r.target, &r.doc);
            doc.add(a, b);
        }
        let (local_any, _) = overlap(&r.target, &r.local);
        let project: Vec<String> = r.pro_infile.iter().chain(&r.pro_crossfile).cloned().collect();
        let (pro_any, _) = overlap(&r.target, &project);
        proj.add(!local_any && pro_any, false);
    }
    Ok(OverlapReport {
        identifiers: ids.finish(true),
        return_params: sig.finish(true),
        in_file: infile.finish(true),
        cross_file: cross.finish(true),
        doc: doc.finish(true),
        project_only: proj.finish(false),
    })
}

impl OverlapReport {
    pub fn levels(&self) -> [(&'static str, &LevelStats); 6] {
        [
            ("identifiers", &self.identifiers),
            ("return_params", &self.return_params),
            ("in_file", &self.in_file),
            ("cross_file", &self.cross_file),
            ("doc", &self.doc),
            ("project_only", &self.project_only),
        ]
    }

    /// `{level: {pct_any, pct_all, population}}`.
    pub fn to_json(&self) -> serde_json::Value {
        let map: BTreeMap<&str, &LevelStats> = self.levels().into_iter().collect();
        serde_json::to_value(map).unwrap_or_default()
    }

    pub fn to_table(&self) -> String {
        let fmt = |p: Option<f64>| p.map_or_else(|| "-".to_owned(), |v| format!("{v:.2}"));
        let mut s = format!("{:<14} {:>8} {:>8} {:>10}\n", "level", "any%", "all%", "methods");
        for (name, l) in self.levels() {
            let _ = writeln!(
                s,
                "{:<14} {:>8} {:>8} {:>10}",
                name,
                fmt(l.pct_any),
                fmt(l.pct_all),
                l.population
            );
        }
        s
    }
}
