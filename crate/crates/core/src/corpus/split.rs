use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MethodRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Whole files are shuffled across all projects.
    #[default]
    InProjectFileShuffle,
    /// Whole projects are assigned to one split.
    CrossProject,
}

impl std::str::FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "in_project_file_shuffle" | "file" | "file_shuffle" => Ok(SplitMode::InProjectFileShuffle),
            "cross_project" | "project" => Ok(SplitMode::CrossProject),
            _ => Err(Error::Config(format!("unknown split mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<MethodRecord>,
    pub valid: Vec<MethodRecord>,
    pub test: Vec<MethodRecord>,
}

/// Partitions records by file or by project. Units are sorted, shuffled with
/// a seeded ChaCha8 stream, and cut at rounded ratio boundaries, so the
/// result depends only on the record set and the seed. Records keep their
/// input order within each split.
pub fn split_dataset(
    records: Vec<MethodRecord>,
    mode: SplitMode,
    ratios: [f64; 3],
    seed: u64,
) -> Result<DatasetSplit> {
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return Err(Error::Config(format!("split ratios must be non-negative and sum to 1, got {ratios:?}")));
    }
    let key = |r: &MethodRecord| match mode {
        SplitMode::InProjectFileShuffle => r.file_key(),
        SplitMode::CrossProject => r.project.clone(),
    };
    let mut units: Vec<String> = records
        .iter()
        .map(key)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let wanted = ratios.iter().filter(|r| **r > 0.0).count();
    if mode == SplitMode::CrossProject && units.len() < wanted {
        return Err(Error::InvalidInput(format!(
            "cross-project split needs at least {wanted} projects, found {}",
            units.len()
        )));
    }
    units.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let counts = split_counts(units.len(), ratios);
    let mut assign: HashMap<String, usize> = HashMap::with_capacity(units.len());
    let mut start = 0;
    for (part, &n) in counts.iter().enumerate() {
        for u in &units[start..start + n] {
            assign.insert(u.clone(), part);
        }
        start += n;
    }

    let mut out = DatasetSplit::default();
    for r in records {
        match assign[&key(&r)] {
            0 => out.train.push(r),
            1 => out.valid.push(r),
            _ => out.test.push(r),
        }
    }
    Ok(out)
}

/// Rounded unit counts per split; test takes the remainder. When there are
/// enough units, every split with a positive ratio gets at least one,
/// borrowed from the largest split.
fn split_counts(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let train = (((n as f64) * ratios[0]).round() as usize).min(n);
    let valid = (((n as f64) * ratios[1]).round() as usize).min(n - train);
    let mut counts = [train, valid, n - train - valid];
    if n >= ratios.iter().filter(|r| **r > 0.0).count() {
        for i in 0..3 {
            if ratios[i] > 0.0 && counts[i] == 0 {
                let donor = (0..3).max_by_key(|&j| (counts[j], std::cmp::Reverse(j))).unwrap_or(0);
                counts[donor] -= 1;
                counts[i] += 1;
            }
        }
    }
    counts
}

/// Number of distinct partition units in each split, for reporting.
pub fn unit_counts(split: &DatasetSplit, mode: SplitMode) -> [usize; 3] {
    let count = |rs: &[MethodRecord]| {
        rs.iter()
            .map(|r| match mode {
                SplitMode::InProjectFileShuffle => r.file_key(),
                SplitMode::CrossProject => r.project.clone(),
            })
            .collect::<BTreeSet<_>>()
            .len()
    };
    [count(&split.train), count(&split.valid), count(&split.test)]
}
