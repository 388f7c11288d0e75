//! Weight history and the L2 smoothing penalty that pulls the mean weights
//! toward the average of the previous `q` training runs.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use crate::features::FeatureGroup;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub lambda: f64,
    pub q: usize,
    pub groups: Vec<FeatureGroup>,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            lambda: 0.25,
            q: 5,
            groups: FeatureGroup::SMOOTHED.to_vec(),
        }
    }
}

impl SmoothingConfig {
    pub fn disabled() -> Self {
        Self {
            lambda: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.q == 0 {
            return Err(Error::InvalidConfig("q must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub run_index: u32,
    pub weights: Vec<f64>,
}

/// Ring of the most recent mean-weight vectors, contiguous in run index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightHistory {
    pub depth: usize,
    pub entries: VecDeque<HistoryEntry>,
}

impl WeightHistory {
    pub fn new(depth: usize) -> Self {
        Self {
            depth: depth.max(1),
            entries: VecDeque::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last_run(&self) -> Option<u32> {
        self.entries.back().map(|e| e.run_index)
    }

    pub fn push(&mut self, run_index: u32, weights: Vec<f64>) -> Result<()> {
        if let Some(last) = self.last_run() {
            if run_index != last + 1 {
                return Err(Error::Misaligned(format!(
                    "weight history at run {last} cannot accept run {run_index}"
                )));
            }
        }
        self.entries.push_back(HistoryEntry { run_index, weights });
        while self.entries.len() > self.depth {
            self.entries.pop_front();
        }
        Ok(())
    }

    pub fn weights(&self) -> impl DoubleEndedIterator<Item = &[f64]> + ExactSizeIterator {
        self.entries.iter().map(|e| e.weights.as_slice())
    }
}

/// Elementwise mean of the last `min(q, len)` weight vectors; `None` when
/// the history is empty.
pub fn smooth_reference<'a, I>(history: I, q: usize) -> Option<Vec<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
    I::IntoIter: DoubleEndedIterator,
{
    let mut n = 0usize;
    let mut sum: Option<Vec<f64>> = None;
    for w in history.into_iter().rev().take(q) {
        match &mut sum {
            None => sum = Some(w.to_vec()),
            Some(s) => s.iter_mut().zip(w).for_each(|(a, b)| *a += b),
        }
        n += 1;
    }
    sum.map(|mut s| {
        s.iter_mut().for_each(|v| *v /= n as f64);
        s
    })
}

fn masked_diff(w: &[f64], reference: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    if w.len() != reference.len() {
        return Err(Error::LengthMismatch {
            left: w.len(),
            right: reference.len(),
        });
    }
    if w.len() != mask.len() {
        return Err(Error::LengthMismatch {
            left: w.len(),
            right: mask.len(),
        });
    }
    Ok(w.iter()
        .zip(reference)
        .zip(mask)
        .map(|((a, b), &m)| if m { a - b } else { 0.0 })
        .collect())
}

/// `lambda * ||mask(w - reference)||_2` (unsquared norm).
pub fn l2_smoothing_loss(w: &[f64], reference: &[f64], lambda: f64, mask: &[bool]) -> Result<f64> {
    let d = masked_diff(w, reference, mask)?;
    Ok(lambda * d.iter().map(|x| x * x).sum::<f64>().sqrt())
}

/// Subgradient of [`l2_smoothing_loss`]; the zero vector at `w == reference`.
pub fn l2_smoothing_subgradient(
    w: &[f64],
    reference: &[f64],
    lambda: f64,
    mask: &[bool],
) -> Result<Vec<f64>> {
    let mut d = masked_diff(w, reference, mask)?;
    let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || lambda == 0.0 {
        d.iter_mut().for_each(|x| *x = 0.0);
    } else {
        d.iter_mut().for_each(|x| *x *= lambda / norm);
    }
    Ok(d)
}
