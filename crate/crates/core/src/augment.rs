//! Two-stage recency-bin data augmentation.
//!
//! Stage 1 copies a fraction `alpha` of each title's rows into the next
//! recency bin (last-bin rows stay put). Stage 2 tops up every bin whose
//! share of the stage-1 output is below `beta` with rows sampled from the
//! whole set and rewritten into that bin. Stage-2 copies are flagged so the
//! per-arm variance update skips them.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;

use crate::features::{FeatureRow, NUM_BINS};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub alpha: f64,
    pub beta: f64,
    pub rng_seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            alpha: 0.15,
            beta: 0.10,
            rng_seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Organic,
    AlphaCopy,
    BetaCopy,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Organic => "organic",
            Origin::AlphaCopy => "alpha_copy",
            Origin::BetaCopy => "beta_copy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub row: FeatureRow,
    pub reward: bool,
    pub variance_excluded: bool,
    pub origin: Origin,
}

impl TrainingExample {
    pub fn organic(row: FeatureRow, reward: bool) -> Self {
        Self {
            row,
            reward,
            variance_excluded: false,
            origin: Origin::Organic,
        }
    }
}

/// Number of alpha-copies for a title with `n` rows (round half away from zero).
pub fn alpha_copies(alpha: f64, n: usize) -> usize {
    (alpha * n as f64).round() as usize
}

/// Minimum per-bin count stage 2 guarantees for an input of `n` rows.
pub fn beta_target(beta: f64, n: usize) -> usize {
    (beta * n as f64).ceil() as usize
}

pub fn augment_stage1(
    examples: &[TrainingExample],
    alpha: f64,
    rng: &mut impl Rng,
) -> Vec<TrainingExample> {
    let mut out = examples.to_vec();
    if alpha <= 0.0 {
        return out;
    }
    let mut by_title: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, e) in examples.iter().enumerate() {
        by_title.entry(e.row.title_id.as_str()).or_default().push(i);
    }
    for rows in by_title.values() {
        let k = alpha_copies(alpha, rows.len()).min(rows.len());
        let mut picked = index::sample(rng, rows.len(), k).into_vec();
        picked.sort_unstable();
        for j in picked {
            let mut copy = examples[rows[j]].clone();
            copy.row.recency_bin = (copy.row.recency_bin + 1).min(NUM_BINS - 1);
            copy.origin = Origin::AlphaCopy;
            copy.variance_excluded = false;
            out.push(copy);
        }
    }
    out
}

pub fn augment_stage2(
    examples: &[TrainingExample],
    beta: f64,
    rng: &mut impl Rng,
) -> Vec<TrainingExample> {
    let mut out = examples.to_vec();
    let n = examples.len();
    if beta <= 0.0 || n == 0 {
        return out;
    }
    let target = beta_target(beta, n);
    let mut counts = [0usize; NUM_BINS];
    for e in examples {
        counts[e.row.recency_bin] += 1;
    }
    for (bin, &have) in counts.iter().enumerate() {
        for _ in have..target {
            let mut copy = examples[rng.random_range(0..n)].clone();
            copy.row.recency_bin = bin;
            copy.origin = Origin::BetaCopy;
            copy.variance_excluded = true;
            out.push(copy);
        }
    }
    out
}

/// Stage 1 followed by stage 2, deterministic in `config.rng_seed`.
pub fn augment(examples: &[TrainingExample], config: &AugmentConfig) -> Vec<TrainingExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let stage1 = augment_stage1(examples, config.alpha, &mut rng);
    augment_stage2(&stage1, config.beta, &mut rng)
}

/// Audit export of an (augmented) training set.
pub fn write_csv<W: Write>(examples: &[TrainingExample], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "title_id",
        "bin",
        "marketing_class",
        "content_category",
        "nds1",
        "nds2",
        "nds3",
        "reward",
        "origin",
        "variance_excluded",
    ])?;
    for e in examples {
        let r = &e.row;
        w.write_record([
            r.title_id.clone(),
            r.recency_bin.to_string(),
            r.marketing_class.clone(),
            r.content_category.clone(),
            r.nds[0].to_string(),
            r.nds[1].to_string(),
            r.nds[2].to_string(),
            u8::from(e.reward).to_string(),
            e.origin.as_str().to_string(),
            e.variance_excluded.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
