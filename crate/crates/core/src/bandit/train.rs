//! Incremental training: Adam on mean binary cross-entropy plus the L2
//! smoothing penalty, followed by the per-arm diagonal precision update.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::smoothing::{l2_smoothing_loss, l2_smoothing_subgradient, smooth_reference, SmoothingConfig};
use super::{dot, sigmoid, ModelState};
use crate::augment::TrainingExample;
use crate::features::{FeatureGroup, FeatureSchema, NdsStats, NDS_COLUMNS};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// `None` trains on the full batch.
    pub batch_size: Option<usize>,
    /// Keep Adam moments across incremental runs instead of resetting them.
    pub carry_optimizer_state: bool,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 3,
            learning_rate: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: None,
            carry_optimizer_state: false,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidConfig("Adam moment decays must lie in [0, 1)".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    fn new(dim: usize) -> Self {
        Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    fn step(&mut self, w: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        for i in 0..w.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grad[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            w[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

/// Training rows encoded against one schema.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedBatch {
    pub schema_fingerprint: String,
    pub rows: Vec<Vec<f64>>,
    pub rewards: Vec<bool>,
    pub title_ids: Vec<String>,
    pub variance_excluded: Vec<bool>,
}

impl EncodedBatch {
    pub fn encode(schema: &FeatureSchema, examples: &[TrainingExample]) -> Result<Self> {
        let rows = examples
            .iter()
            .map(|e| schema.encode(&e.row))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            schema_fingerprint: schema.fingerprint(),
            rows,
            rewards: examples.iter().map(|e| e.reward).collect(),
            title_ids: examples.iter().map(|e| e.row.title_id.clone()).collect(),
            variance_excluded: examples.iter().map(|e| e.variance_excluded).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub run_index: u32,
    pub rows: usize,
    /// Mean BCE over the whole batch after each epoch.
    pub epoch_bce: Vec<f64>,
    /// Smoothing penalty after each epoch (0 when no reference exists).
    pub epoch_penalty: Vec<f64>,
    pub regularized: bool,
}

fn bce(p: f64, y: bool) -> f64 {
    let p = p.clamp(1e-15, 1.0 - 1e-15);
    if y {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

fn mean_bce(w: &[f64], batch: &EncodedBatch) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    batch
        .rows
        .iter()
        .zip(&batch.rewards)
        .map(|(x, &y)| bce(sigmoid(dot(w, x)), y))
        .sum::<f64>()
        / batch.len() as f64
}

impl ModelState {
    /// Precision update for one arm from its included rows:
    /// `1/var_i += sum x_i^2 p (1 - p)` with `p = sigmoid(mean · x)`.
    pub fn update_variance<'a>(
        &self,
        title_id: &str,
        rows: impl IntoIterator<Item = &'a [f64]>,
    ) -> Result<Vec<f64>> {
        let arm = self
            .arms
            .get(title_id)
            .ok_or_else(|| Error::UnknownArm(title_id.to_string()))?;
        let mut precision: Vec<f64> = arm.variance.iter().map(|v| 1.0 / v).collect();
        for x in rows {
            if x.len() != self.dim() {
                return Err(Error::LengthMismatch {
                    left: x.len(),
                    right: self.dim(),
                });
            }
            let p = sigmoid(dot(&self.weights, x));
            let h = p * (1.0 - p);
            for (prec, xi) in precision.iter_mut().zip(x) {
                *prec += xi * xi * h;
            }
        }
        Ok(precision
            .iter()
            .zip(&arm.variance)
            .map(|(prec, old)| (1.0 / prec).min(*old))
            .collect())
    }

    /// One incremental run: fit the shared mean from the current weights,
    /// then update each arm's variance from its non-excluded rows, and append
    /// the new weights to the history as run `run_index`.
    pub fn train_incremental(
        &self,
        run_index: u32,
        batch: &EncodedBatch,
        cfg: &TrainConfig,
        smoothing: &SmoothingConfig,
    ) -> Result<(ModelState, TrainReport)> {
        cfg.validate()?;
        smoothing.validate()?;
        if batch.schema_fingerprint != self.schema_fingerprint {
            return Err(Error::SchemaMismatch {
                expected: self.schema_fingerprint.clone(),
                found: batch.schema_fingerprint.clone(),
            });
        }
        for (id, x) in batch.title_ids.iter().zip(&batch.rows) {
            if !self.is_active(id) {
                return Err(Error::InactiveArm(id.clone()));
            }
            if x.len() != self.dim() {
                return Err(Error::LengthMismatch {
                    left: x.len(),
                    right: self.dim(),
                });
            }
        }

        let mut next = self.clone();
        let mask = self.schema.mask(&smoothing.groups);
        let reference = if smoothing.lambda > 0.0 {
            smooth_reference(self.history.weights(), smoothing.q)
        } else {
            None
        };
        let mut report = TrainReport {
            run_index,
            rows: batch.len(),
            epoch_bce: Vec::with_capacity(cfg.epochs),
            epoch_penalty: Vec::with_capacity(cfg.epochs),
            regularized: reference.is_some(),
        };

        if !batch.is_empty() {
            let mut adam = match (&self.optimizer, cfg.carry_optimizer_state) {
                (Some(s), true) if s.m.len() == self.dim() => s.clone(),
                _ => AdamState::new(self.dim()),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed ^ (u64::from(run_index) << 32));
            let mut order: Vec<usize> = (0..batch.len()).collect();
            let bs = cfg.batch_size.unwrap_or(batch.len()).min(batch.len());
            let mut grad = vec![0.0; self.dim()];

            for epoch in 0..cfg.epochs {
                if bs < batch.len() {
                    order.shuffle(&mut rng);
                }
                for chunk in order.chunks(bs) {
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    for &i in chunk {
                        let x = &batch.rows[i];
                        let err = sigmoid(dot(&next.weights, x)) - f64::from(u8::from(batch.rewards[i]));
                        for (g, xi) in grad.iter_mut().zip(x) {
                            *g += err * xi;
                        }
                    }
                    let n = chunk.len() as f64;
                    grad.iter_mut().for_each(|g| *g /= n);
                    if let Some(r) = &reference {
                        let sub = l2_smoothing_subgradient(&next.weights, r, smoothing.lambda, &mask)?;
                        grad.iter_mut().zip(&sub).for_each(|(g, s)| *g += s);
                    }
                    adam.step(&mut next.weights, &grad, cfg);
                }
                let loss = mean_bce(&next.weights, batch);
                let penalty = match &reference {
                    Some(r) => l2_smoothing_loss(&next.weights, r, smoothing.lambda, &mask)?,
                    None => 0.0,
                };
                if !loss.is_finite() || !penalty.is_finite() || next.weights.iter().any(|w| !w.is_finite()) {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        detail: format!("bce={loss} penalty={penalty}"),
                    });
                }
                report.epoch_bce.push(loss);
                report.epoch_penalty.push(penalty);
            }
            next.optimizer = cfg.carry_optimizer_state.then_some(adam);

            let mut per_arm: BTreeMap<&str, Vec<&[f64]>> = BTreeMap::new();
            for ((id, x), &excluded) in batch.title_ids.iter().zip(&batch.rows).zip(&batch.variance_excluded) {
                if !excluded {
                    per_arm.entry(id.as_str()).or_default().push(x.as_slice());
                }
            }
            for (id, rows) in per_arm {
                let var = next.update_variance(id, rows)?;
                next.arms.get_mut(id).expect("validated above").variance = var;
            }

            if self.schema.temporal_signals {
                let groups = self.schema.groups();
                let start = groups.iter().position(|g| *g == FeatureGroup::Nds).expect("nds block");
                let blocks: Vec<[f64; NDS_COLUMNS]> = batch
                    .rows
                    .iter()
                    .map(|x| std::array::from_fn(|c| x[start + c] / self.schema.nds_scale))
                    .collect();
                next.nds_stats = Some(NdsStats::from_rows(blocks.iter()));
            }
        }

        next.history.push(run_index, next.weights.clone())?;
        next.run_index = Some(run_index);
        Ok((next, report))
    }
}
