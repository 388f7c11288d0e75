//! Bayesian logistic Thompson-sampling bandit.
//!
//! One mean weight vector is shared by every arm; each arm keeps its own
//! diagonal posterior variance. Scores are `sigmoid(w · x)` with `w` drawn
//! from `Normal(mean, diag(variance_arm))`.

mod smoothing;
mod train;

pub use smoothing::{
    l2_smoothing_loss, l2_smoothing_subgradient, smooth_reference, HistoryEntry, SmoothingConfig,
    WeightHistory,
};
pub use train::{AdamState, EncodedBatch, TrainConfig, TrainReport};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::catalog::{Catalog, TitleArm};
use crate::features::{FeatureSchema, NdsStats, NdsTable, NUM_BINS};
use crate::{Error, Result};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmPosterior {
    pub variance: Vec<f64>,
    pub active: bool,
}

/// How scores are produced at ranking time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringMode {
    Thompson,
    PosteriorMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    /// Index of the last completed training run.
    pub run_index: Option<u32>,
    pub schema: FeatureSchema,
    pub schema_fingerprint: String,
    pub weights: Vec<f64>,
    pub prior_variance: f64,
    pub arms: BTreeMap<String, ArmPosterior>,
    pub history: WeightHistory,
    /// NDS column statistics of the most recent training set.
    pub nds_stats: Option<NdsStats>,
    pub optimizer: Option<AdamState>,
}

/// On-disk checkpoint: the model plus an optional echo of the run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub model: ModelState,
    #[serde(default)]
    pub config: Option<serde_json::Value>,
}

impl ModelState {
    pub fn new(schema: FeatureSchema, prior_variance: f64, history_depth: usize) -> Result<Self> {
        if !(prior_variance > 0.0 && prior_variance.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "prior variance must be positive, got {prior_variance}"
            )));
        }
        schema.validate()?;
        Ok(Self {
            run_index: None,
            schema_fingerprint: schema.fingerprint(),
            weights: vec![0.0; schema.dim()],
            schema,
            prior_variance,
            arms: BTreeMap::new(),
            history: WeightHistory::new(history_depth),
            nds_stats: None,
            optimizer: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn is_active(&self, title_id: &str) -> bool {
        self.arms.get(title_id).is_some_and(|a| a.active)
    }

    pub fn variance(&self, title_id: &str) -> Option<&[f64]> {
        self.arms.get(title_id).map(|a| a.variance.as_slice())
    }

    /// Activates `title_id` with a fresh prior-variance vector.
    pub fn provision_arm(&mut self, title_id: &str) -> Result<()> {
        if self.is_active(title_id) {
            return Err(Error::DuplicateArm(title_id.to_string()));
        }
        self.arms.insert(
            title_id.to_string(),
            ArmPosterior {
                variance: vec![self.prior_variance; self.dim()],
                active: true,
            },
        );
        Ok(())
    }

    /// Marks the arm exited; its variance stays in the state for audit.
    pub fn retire_arm(&mut self, title_id: &str) -> Result<()> {
        match self.arms.get_mut(title_id) {
            Some(a) if a.active => {
                a.active = false;
                Ok(())
            }
            Some(_) => Err(Error::InactiveArm(title_id.to_string())),
            None => Err(Error::UnknownArm(title_id.to_string())),
        }
    }

    /// Makes the set of active arms equal to the catalog's active arms.
    pub fn sync_catalog(&mut self, catalog: &Catalog) -> Result<()> {
        let active: Vec<String> = self
            .arms
            .iter()
            .filter(|(_, a)| a.active)
            .map(|(id, _)| id.clone())
            .collect();
        for id in active {
            if !catalog.get(&id).is_some_and(TitleArm::is_active) {
                self.retire_arm(&id)?;
            }
        }
        for arm in catalog.active() {
            if !self.is_active(&arm.title_id) {
                self.provision_arm(&arm.title_id)?;
            }
        }
        Ok(())
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: self.dim(),
            });
        }
        Ok(())
    }

    /// `sigmoid(mean · x)`.
    pub fn mean_score(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(sigmoid(dot(&self.weights, x)))
    }

    /// Mean and standard deviation of the sampled logit `w · x` for `title_id`.
    pub fn logit_moments(&self, title_id: &str, x: &[f64]) -> Result<(f64, f64)> {
        self.check_dim(x)?;
        let arm = match self.arms.get(title_id) {
            Some(a) if a.active => a,
            Some(_) => return Err(Error::InactiveArm(title_id.to_string())),
            None => return Err(Error::UnknownArm(title_id.to_string())),
        };
        let var: f64 = arm.variance.iter().zip(x).map(|(v, xi)| v * xi * xi).sum();
        Ok((dot(&self.weights, x), var.sqrt()))
    }

    /// One Thompson draw for `title_id`.
    ///
    /// With a diagonal Gaussian posterior, `w · x` is itself Gaussian with
    /// mean `mean · x` and variance `sum_i var_i x_i^2`, so a single normal
    /// draw per arm reproduces the full weight-vector sample exactly.
    pub fn thompson_score(&self, title_id: &str, x: &[f64], rng: &mut impl Rng) -> Result<f64> {
        let (mean, sd) = self.logit_moments(title_id, x)?;
        let z: f64 = rng.sample(StandardNormal);
        Ok(sigmoid(mean + sd * z))
    }

    /// Per-arm scoring table for one serving period.
    pub fn snapshot(&self, catalog: &Catalog, nds: &NdsTable) -> Result<ScoringSnapshot> {
        let b = self.schema.binning.boundaries;
        let ages = [0.0, b[0], b[1], b[2]];
        let arms = catalog
            .active()
            .map(|arm| {
                let mut per_bin = [(0.0, 0.0); NUM_BINS];
                for (bin, age) in ages.iter().enumerate() {
                    let row = self.schema.describe(arm, arm.launch_time + age, nds)?;
                    per_bin[bin] = self.logit_moments(&arm.title_id, &self.schema.encode(&row)?)?;
                }
                Ok(ArmScorer {
                    title_id: arm.title_id.clone(),
                    launch_time: arm.launch_time,
                    per_bin,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ScoringSnapshot {
            arms,
            binning: self.schema.binning,
        })
    }

    /// Active titles ordered by score, highest first; ties by title id.
    pub fn rank_titles(
        &self,
        catalog: &Catalog,
        nds: &NdsTable,
        now: f64,
        rng: &mut impl Rng,
        mode: ScoringMode,
    ) -> Result<Vec<(String, f64)>> {
        let snap = self.snapshot(catalog, nds)?;
        Ok(snap
            .rank(now, rng, mode)?
            .into_iter()
            .map(|(i, s)| (snap.arms[i].title_id.clone(), s))
            .collect())
    }

    pub fn to_checkpoint(&self, config: Option<serde_json::Value>) -> Result<String> {
        let doc = Checkpoint {
            model: self.clone(),
            config,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Parses a checkpoint, verifying its schema fingerprint and, when
    /// `expected` is given, that it belongs to that schema.
    pub fn restore(doc: &str, expected: Option<&FeatureSchema>) -> Result<Checkpoint> {
        let cp: Checkpoint = serde_json::from_str(doc)?;
        let m = &cp.model;
        let actual = m.schema.fingerprint();
        if actual != m.schema_fingerprint {
            return Err(Error::SchemaMismatch {
                expected: m.schema_fingerprint.clone(),
                found: actual,
            });
        }
        if let Some(s) = expected {
            let fp = s.fingerprint();
            if fp != m.schema_fingerprint {
                return Err(Error::SchemaMismatch {
                    expected: fp,
                    found: m.schema_fingerprint.clone(),
                });
            }
        }
        if m.weights.len() != m.schema.dim() {
            return Err(Error::LengthMismatch {
                left: m.weights.len(),
                right: m.schema.dim(),
            });
        }
        if let Some((id, _)) = m
            .arms
            .iter()
            .find(|(_, a)| a.variance.len() != m.weights.len() || a.variance.iter().any(|v| !(*v > 0.0)))
        {
            return Err(Error::InvalidConfig(format!("arm `{id}` has a malformed variance vector")));
        }
        Ok(cp)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmScorer {
    pub title_id: String,
    pub launch_time: f64,
    /// `(mean, sd)` of the logit for each recency bin.
    pub per_bin: [(f64, f64); NUM_BINS],
}

/// Precomputed logit moments for every active arm. Features depend on time
/// only through the recency bin, so four entries per arm cover every request.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoringSnapshot {
    pub arms: Vec<ArmScorer>,
    pub binning: crate::features::RecencyBinning,
}

impl ScoringSnapshot {
    /// Indices into `arms` with their scores, best first; ties by title id.
    pub fn rank(&self, now: f64, rng: &mut impl Rng, mode: ScoringMode) -> Result<Vec<(usize, f64)>> {
        if self.arms.is_empty() {
            return Err(Error::EmptyCatalog);
        }
        let mut scored = Vec::with_capacity(self.arms.len());
        for (i, a) in self.arms.iter().enumerate() {
            let bin = self.binning.bin(now - a.launch_time)?;
            let (mean, sd) = a.per_bin[bin];
            let logit = match mode {
                ScoringMode::Thompson => {
                    let z: f64 = rng.sample(StandardNormal);
                    mean + sd * z
                }
                ScoringMode::PosteriorMean => mean,
            };
            scored.push((i, sigmoid(logit)));
        }
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(Ordering::Equal)
                .then_with(|| self.arms[a.0].title_id.cmp(&self.arms[b.0].title_id))
        });
        Ok(scored)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{RecencyBinning, FeatureGroup};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn schema() -> FeatureSchema {
        FeatureSchema {
            marketing_classes: vec!["standard".into()],
            content_categories: vec!["drama".into(), "comedy".into()],
            binning: RecencyBinning::default(),
            temporal_signals: true,
            high_priority_class: None,
            nds_scale: 1.0,
        }
    }

    fn catalog(ids: &[(&str, &str)]) -> Catalog {
        let mut c = Catalog::new(0.0);
        for (id, cat) in ids {
            c = c.register_arm(TitleArm::new(*id, 0.0, "standard", *cat)).unwrap();
        }
        c
    }

    #[test]
    fn provisioning_follows_catalog() {
        let mut m = ModelState::new(schema(), 1.0, 5).unwrap();
        let c = catalog(&[("A", "drama")]);
        m.sync_catalog(&c).unwrap();
        assert_eq!(m.variance("A").unwrap(), vec![1.0; m.dim()].as_slice());
        assert!(matches!(m.provision_arm("A"), Err(Error::DuplicateArm(_))));

        let c = c.register_arm(TitleArm::new("B", 0.0, "standard", "comedy")).unwrap();
        m.sync_catalog(&c).unwrap();
        assert!(m.is_active("B"));

        let c = c.retire_arm("B").unwrap();
        m.sync_catalog(&c).unwrap();
        assert!(!m.is_active("B"));
        assert!(m.variance("B").is_some());
        let x = vec![0.0; m.dim()];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(m.thompson_score("B", &x, &mut rng), Err(Error::InactiveArm(_))));
    }

    #[test]
    fn degenerate_posterior_is_deterministic() {
        let mut m = ModelState::new(schema(), 1.0, 5).unwrap();
        m.provision_arm("A").unwrap();
        m.arms.get_mut("A").unwrap().variance.iter_mut().for_each(|v| *v = 1e-300);
        m.weights = (0..m.dim()).map(|i| 0.1 * i as f64 - 0.3).collect();
        let x: Vec<f64> = (0..m.dim()).map(|i| (i % 2) as f64).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let expected = sigmoid(dot(&m.weights, &x));
        for _ in 0..10 {
            assert!((m.thompson_score("A", &x, &mut rng).unwrap() - expected).abs() < 1e-12);
        }
        m.weights.iter_mut().for_each(|w| *w = 0.0);
        assert_eq!(m.thompson_score("A", &x, &mut rng).unwrap(), 0.5);
    }

    #[test]
    fn thompson_matches_sigmoid_of_standard_normal() {
        let mut m = ModelState::new(schema(), 1.0, 5).unwrap();
        m.provision_arm("A").unwrap();
        let mut x = vec![0.0; m.dim()];
        x[0] = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| m.thompson_score("A", &x, &mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn ranking_orders_by_mean_when_certain() {
        let mut m = ModelState::new(schema(), 1e-30, 5).unwrap();
        let c = catalog(&[("A", "drama"), ("B", "comedy")]);
        m.sync_catalog(&c).unwrap();
        let comedy = m.schema.feature_names().iter().position(|n| n == "content_category=comedy").unwrap();
        m.weights[comedy] = 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = m.rank_titles(&c, &NdsTable::default(), 500.0, &mut rng, ScoringMode::Thompson).unwrap();
        assert_eq!(r[0].0, "B");
        assert_eq!(r[1].0, "A");

        let one = catalog(&[("A", "drama")]);
        let r = m.rank_titles(&one, &NdsTable::default(), 5.0, &mut rng, ScoringMode::Thompson).unwrap();
        assert_eq!(r.len(), 1);
        assert!(m
            .rank_titles(&Catalog::new(0.0), &NdsTable::default(), 5.0, &mut rng, ScoringMode::Thompson)
            .is_err());
    }

    #[test]
    fn ranking_ties_break_by_id_and_seed_is_reproducible() {
        let mut m = ModelState::new(schema(), 1.0, 5).unwrap();
        let c = catalog(&[("C", "drama"), ("A", "drama"), ("B", "drama")]);
        m.sync_catalog(&c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = m
            .rank_titles(&c, &NdsTable::default(), 10.0, &mut rng, ScoringMode::PosteriorMean)
            .unwrap();
        let ids: Vec<_> = r.iter().map(|(t, _)| t.as_str()).collect();
        assert_eq!(ids, ["A", "B", "C"]);

        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            m.rank_titles(&c, &NdsTable::default(), 10.0, &mut rng, ScoringMode::Thompson).unwrap()
        };
        assert_eq!(run(9), run(9));
    }

    #[test]
    fn snapshot_agrees_with_direct_featurization() {
        let mut m = ModelState::new(schema(), 0.5, 5).unwrap();
        let c = catalog(&[("A", "drama"), ("B", "comedy")]);
        m.sync_catalog(&c).unwrap();
        m.weights = (0..m.dim()).map(|i| (i as f64).sin()).collect();
        let snap = m.snapshot(&c, &NdsTable::default()).unwrap();
        for now in [1.0, 30.0, 100.0, 1000.0] {
            for (i, arm) in c.active().enumerate() {
                let x = crate::features::featurize(arm, now, &NdsTable::default(), &m.schema).unwrap();
                let bin = m.schema.binning.bin(now).unwrap();
                let (mean, sd) = m.logit_moments(&arm.title_id, &x).unwrap();
                assert!((snap.arms[i].per_bin[bin].0 - mean).abs() < 1e-12);
                assert!((snap.arms[i].per_bin[bin].1 - sd).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn checkpoint_round_trip_is_byte_identical() {
        let mut m = ModelState::new(schema(), 1.0, 3).unwrap();
        m.provision_arm("A").unwrap();
        m.weights = vec![0.1, 1.0 / 3.0, -2.5e-7, std::f64::consts::PI, 0.0, 0.0, 0.0, 0.0, 1e-300, 0.7, 0.0];
        for k in 0..5 {
            m.history.push(k, m.weights.iter().map(|w| w * f64::from(k)).collect()).unwrap();
        }
        let doc = m.to_checkpoint(Some(serde_json::json!({"lambda": 0.25}))).unwrap();
        let back = ModelState::restore(&doc, Some(&schema())).unwrap();
        assert_eq!(back.model, m);
        assert_eq!(back.model.history.len(), 3);
        assert_eq!(back.model.to_checkpoint(back.config.clone()).unwrap(), doc);
    }

    #[test]
    fn checkpoint_rejects_foreign_or_altered_schema() {
        let m = ModelState::new(schema(), 1.0, 3).unwrap();
        let doc = m.to_checkpoint(None).unwrap();
        let mut other = schema();
        other.temporal_signals = false;
        assert!(matches!(ModelState::restore(&doc, Some(&other)), Err(Error::SchemaMismatch { .. })));

        let tampered = doc.replace("\"comedy\"", "\"horror\"");
        assert!(matches!(ModelState::restore(&tampered, None), Err(Error::SchemaMismatch { .. })));
    }

    #[test]
    fn mask_covers_smoothed_groups() {
        let s = schema();
        let mask = s.mask(&FeatureGroup::SMOOTHED);
        assert_eq!(mask.len(), s.dim());
        assert_eq!(mask.iter().filter(|b| !**b).count(), 1);
    }
}
