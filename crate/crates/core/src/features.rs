//! Title featurization: one-hot categorical blocks, the recency bin, and the
//! three normalized-distinct-stream (NDS) columns.
//!
//! Vector layout is fixed by [`FeatureSchema`]:
//! `marketing_class | content_category | recency_bin (4) | nds (3, optional) | bias`.

use log::warn;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

use crate::catalog::TitleArm;
use crate::{Error, Result};

pub const NUM_BINS: usize = 4;
pub const NDS_COLUMNS: usize = 3;

/// Hours-since-launch boundaries `[hr1, hr2, hr3]`; bins are half-open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecencyBinning {
    pub boundaries: [f64; 3],
}

impl Default for RecencyBinning {
    fn default() -> Self {
        Self {
            boundaries: [24.0, 72.0, 168.0],
        }
    }
}

impl RecencyBinning {
    pub fn new(boundaries: [f64; 3]) -> Result<Self> {
        let b = Self { boundaries };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let [a, b, c] = self.boundaries;
        if !(0.0 < a && a < b && b < c && c.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "recency boundaries must satisfy 0 < hr1 < hr2 < hr3, got {:?}",
                self.boundaries
            )));
        }
        Ok(())
    }

    pub fn first_boundary(&self) -> f64 {
        self.boundaries[0]
    }

    /// Bin index in `0..4` for the given age.
    pub fn bin(&self, hours_since_launch: f64) -> Result<usize> {
        if !(hours_since_launch >= 0.0) {
            return Err(Error::EventBeforeLaunch {
                event: hours_since_launch,
                launch: 0.0,
            });
        }
        Ok(self
            .boundaries
            .iter()
            .take_while(|&&b| hours_since_launch >= b)
            .count())
    }
}

/// Per-title share of distinct streams within one time slot.
///
/// Returns `None` when the slot has no streams at all, in which case every
/// title falls back to the cold-start fill.
pub fn compute_nds(distinct_streams: &BTreeMap<String, u64>) -> Option<BTreeMap<String, f64>> {
    let total: u64 = distinct_streams.values().sum();
    if total == 0 {
        return None;
    }
    let total = total as f64;
    Some(
        distinct_streams
            .iter()
            .map(|(t, &c)| (t.clone(), c as f64 / total))
            .collect(),
    )
}

/// Training-time NDS statistics used for cold-start fills.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NdsStats {
    pub column_avg: [f64; NDS_COLUMNS],
    /// Global maximum across all three columns.
    pub train_max: f64,
}

impl NdsStats {
    /// Column means and global maximum over the NDS block of training rows.
    pub fn from_rows<'a>(rows: impl IntoIterator<Item = &'a [f64; NDS_COLUMNS]>) -> Self {
        let mut sum = [0.0; NDS_COLUMNS];
        let mut max = 0.0f64;
        let mut n = 0usize;
        for r in rows {
            for (s, v) in sum.iter_mut().zip(r) {
                *s += v;
                max = max.max(*v);
            }
            n += 1;
        }
        if n == 0 {
            return Self::default();
        }
        Self {
            column_avg: sum.map(|s| s / n as f64),
            train_max: max,
        }
    }
}

/// NDS values per title for the three most recent `p`-hour slots, newest first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NdsTable {
    pub slots: [BTreeMap<String, f64>; NDS_COLUMNS],
    /// `None` when no training statistics exist yet; fills then default to 0.
    pub stats: Option<NdsStats>,
}

impl NdsTable {
    pub fn from_slot_counts(
        counts: &[BTreeMap<String, u64>; NDS_COLUMNS],
        stats: Option<NdsStats>,
    ) -> Self {
        Self {
            slots: counts.each_ref().map(|c| compute_nds(c).unwrap_or_default()),
            stats,
        }
    }

    pub fn value(&self, title_id: &str, column: usize) -> Option<f64> {
        self.slots[column].get(title_id).copied()
    }

    fn stats_or_warn(&self) -> NdsStats {
        match self.stats {
            Some(s) => s,
            None => {
                warn!("no training NDS statistics available, cold-start fills default to 0");
                NdsStats::default()
            }
        }
    }
}

/// The arm's three NDS column values at `now`, with cold-start fills applied.
///
/// Missing columns take the training average of that column. A high-priority
/// title inside its first `hr1` hours gets the training maximum in all three
/// columns.
pub fn fill_cold_start(
    nds: &NdsTable,
    arm: &TitleArm,
    now: f64,
    binning: &RecencyBinning,
    high_priority_class: Option<&str>,
) -> Result<[f64; NDS_COLUMNS]> {
    let age = arm.hours_since_launch(now)?;
    let observed: [Option<f64>; NDS_COLUMNS] =
        std::array::from_fn(|c| nds.value(&arm.title_id, c));

    let high_priority = high_priority_class.is_some_and(|hp| hp == arm.marketing_class);
    if high_priority && age < binning.first_boundary() {
        let max = nds.stats_or_warn().train_max;
        return Ok([max; NDS_COLUMNS]);
    }
    if observed.iter().all(Option::is_some) {
        return Ok(observed.map(|v| v.unwrap_or_default()));
    }
    let stats = nds.stats_or_warn();
    Ok(std::array::from_fn(|c| {
        observed[c].unwrap_or(stats.column_avg[c])
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    MarketingClass,
    ContentCategory,
    RecencyBin,
    Nds,
    Bias,
}

impl FeatureGroup {
    /// Groups pulled toward the weight history by the smoothing loss.
    pub const SMOOTHED: [FeatureGroup; 4] = [
        FeatureGroup::MarketingClass,
        FeatureGroup::ContentCategory,
        FeatureGroup::RecencyBin,
        FeatureGroup::Nds,
    ];
}

/// Pre-encoding description of one (request, title) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub title_id: String,
    pub marketing_class: String,
    pub content_category: String,
    pub recency_bin: usize,
    pub nds: [f64; NDS_COLUMNS],
}

/// Closed vocabulary and layout of the feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub marketing_classes: Vec<String>,
    pub content_categories: Vec<String>,
    pub binning: RecencyBinning,
    pub temporal_signals: bool,
    pub high_priority_class: Option<String>,
    /// Multiplier applied to NDS shares when encoding; shares of a large
    /// catalog are tiny, so a scale near the catalog size keeps the NDS
    /// weights on the same footing as the one-hot weights.
    #[serde(default = "unit_scale")]
    pub nds_scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl FeatureSchema {
    pub fn validate(&self) -> Result<()> {
        self.binning.validate()?;
        if !(self.nds_scale > 0.0 && self.nds_scale.is_finite()) {
            return Err(Error::InvalidConfig(format!("nds_scale must be positive, got {}", self.nds_scale)));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.marketing_classes.len()
            + self.content_categories.len()
            + NUM_BINS
            + if self.temporal_signals { NDS_COLUMNS } else { 0 }
            + 1
    }

    fn offsets(&self) -> (usize, usize, usize, usize) {
        let cat = self.marketing_classes.len();
        let bin = cat + self.content_categories.len();
        let nds = bin + NUM_BINS;
        let bias = nds + if self.temporal_signals { NDS_COLUMNS } else { 0 };
        (cat, bin, nds, bias)
    }

    pub fn groups(&self) -> Vec<FeatureGroup> {
        let mut g = Vec::with_capacity(self.dim());
        g.extend(std::iter::repeat_n(FeatureGroup::MarketingClass, self.marketing_classes.len()));
        g.extend(std::iter::repeat_n(FeatureGroup::ContentCategory, self.content_categories.len()));
        g.extend(std::iter::repeat_n(FeatureGroup::RecencyBin, NUM_BINS));
        if self.temporal_signals {
            g.extend(std::iter::repeat_n(FeatureGroup::Nds, NDS_COLUMNS));
        }
        g.push(FeatureGroup::Bias);
        g
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::with_capacity(self.dim());
        names.extend(self.marketing_classes.iter().map(|m| format!("marketing_class={m}")));
        names.extend(self.content_categories.iter().map(|c| format!("content_category={c}")));
        names.extend((0..NUM_BINS).map(|b| format!("recency_bin={b}")));
        if self.temporal_signals {
            names.extend((0..NDS_COLUMNS).map(|c| format!("nds_{c}")));
        }
        names.push("bias".to_string());
        names
    }

    /// Coordinates belonging to any of `groups`.
    pub fn mask(&self, groups: &[FeatureGroup]) -> Vec<bool> {
        self.groups().iter().map(|g| groups.contains(g)).collect()
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("schema serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn encode(&self, row: &FeatureRow) -> Result<Vec<f64>> {
        let (cat, bin, nds, bias) = self.offsets();
        let m = self
            .marketing_classes
            .iter()
            .position(|c| *c == row.marketing_class)
            .ok_or_else(|| Error::UnknownLabel {
                group: "marketing_class",
                label: row.marketing_class.clone(),
            })?;
        let c = self
            .content_categories
            .iter()
            .position(|c| *c == row.content_category)
            .ok_or_else(|| Error::UnknownLabel {
                group: "content_category",
                label: row.content_category.clone(),
            })?;
        if row.recency_bin >= NUM_BINS {
            return Err(Error::InvalidConfig(format!(
                "recency bin {} out of range",
                row.recency_bin
            )));
        }
        let mut x = vec![0.0; self.dim()];
        x[m] = 1.0;
        x[cat + c] = 1.0;
        x[bin + row.recency_bin] = 1.0;
        if self.temporal_signals {
            for (xi, v) in x[nds..nds + NDS_COLUMNS].iter_mut().zip(&row.nds) {
                *xi = v * self.nds_scale;
            }
        }
        x[bias] = 1.0;
        Ok(x)
    }

    /// Pre-encoding fields of `arm` observed at `now`.
    pub fn describe(&self, arm: &TitleArm, now: f64, nds: &NdsTable) -> Result<FeatureRow> {
        if !arm.is_active() {
            return Err(Error::InactiveArm(arm.title_id.clone()));
        }
        let age = arm.hours_since_launch(now)?;
        let nds_values = if self.temporal_signals {
            fill_cold_start(nds, arm, now, &self.binning, self.high_priority_class.as_deref())?
        } else {
            [0.0; NDS_COLUMNS]
        };
        Ok(FeatureRow {
            title_id: arm.title_id.clone(),
            marketing_class: arm.marketing_class.clone(),
            content_category: arm.content_category.clone(),
            recency_bin: self.binning.bin(age)?,
            nds: nds_values,
        })
    }
}

/// Encoded feature vector for `arm` at `now`.
pub fn featurize(
    arm: &TitleArm,
    now: f64,
    nds: &NdsTable,
    schema: &FeatureSchema,
) -> Result<Vec<f64>> {
    schema.encode(&schema.describe(arm, now, nds)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counts(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
        pairs.iter().map(|(t, c)| (t.to_string(), *c)).collect()
    }

    fn schema() -> FeatureSchema {
        FeatureSchema {
            marketing_classes: vec!["standard".into(), "high_priority".into()],
            content_categories: vec!["drama".into(), "comedy".into(), "kids".into()],
            binning: RecencyBinning::default(),
            temporal_signals: true,
            high_priority_class: Some("high_priority".into()),
            nds_scale: 1.0,
        }
    }

    fn table_with_stats(stats: NdsStats) -> NdsTable {
        NdsTable {
            stats: Some(stats),
            ..Default::default()
        }
    }

    #[test]
    fn nds_direct_ratio() {
        let n = compute_nds(&counts(&[("A", 30), ("B", 70)])).unwrap();
        assert!((n["A"] - 0.30).abs() < 1e-12);
        assert!((n["B"] - 0.70).abs() < 1e-12);
        let n = compute_nds(&counts(&[("A", 5)])).unwrap();
        assert_eq!(n["A"], 1.0);
        assert!(compute_nds(&counts(&[("A", 0), ("B", 0)])).is_none());
    }

    #[test]
    fn bins_half_open() {
        let b = RecencyBinning::default();
        assert_eq!(b.bin(10.0).unwrap(), 0);
        assert_eq!(b.bin(24.0).unwrap(), 1);
        assert_eq!(b.bin(72.0).unwrap(), 2);
        assert_eq!(b.bin(167.999).unwrap(), 2);
        assert_eq!(b.bin(10000.0).unwrap(), 3);
        assert!(b.bin(-1.0).is_err());
        assert!(RecencyBinning::new([24.0, 24.0, 100.0]).is_err());
        assert!(RecencyBinning::new([0.0, 1.0, 2.0]).is_err());
    }

    #[test]
    fn cold_start_uses_column_averages() {
        let t = table_with_stats(NdsStats {
            column_avg: [0.02, 0.03, 0.04],
            train_max: 0.4,
        });
        let arm = TitleArm::new("A", 0.0, "standard", "drama");
        assert_eq!(
            fill_cold_start(&t, &arm, 5.0, &RecencyBinning::default(), Some("high_priority")).unwrap(),
            [0.02, 0.03, 0.04]
        );
    }

    #[test]
    fn cold_start_high_priority_gets_max() {
        let t = table_with_stats(NdsStats {
            column_avg: [0.02, 0.03, 0.04],
            train_max: 0.4,
        });
        let b = RecencyBinning::default();
        let arm = TitleArm::new("A", 0.0, "high_priority", "drama");
        assert_eq!(fill_cold_start(&t, &arm, 5.0, &b, Some("high_priority")).unwrap(), [0.4; 3]);
        // rule only applies during the first hr1 hours
        assert_eq!(
            fill_cold_start(&t, &arm, 25.0, &b, Some("high_priority")).unwrap(),
            [0.02, 0.03, 0.04]
        );
    }

    #[test]
    fn partially_observed_title_fills_only_missing() {
        let mut t = table_with_stats(NdsStats {
            column_avg: [0.1, 0.2, 0.3],
            train_max: 0.9,
        });
        t.slots[0].insert("A".into(), 0.5);
        let arm = TitleArm::new("A", 0.0, "standard", "drama");
        assert_eq!(
            fill_cold_start(&t, &arm, 100.0, &RecencyBinning::default(), None).unwrap(),
            [0.5, 0.2, 0.3]
        );
    }

    #[test]
    fn missing_stats_default_to_zero() {
        let arm = TitleArm::new("A", 0.0, "standard", "drama");
        assert_eq!(
            fill_cold_start(&NdsTable::default(), &arm, 1.0, &RecencyBinning::default(), None).unwrap(),
            [0.0; 3]
        );
    }

    #[test]
    fn stats_from_rows() {
        let rows = [[0.1, 0.2, 0.3], [0.3, 0.0, 0.5]];
        let s = NdsStats::from_rows(rows.iter());
        assert!((s.column_avg[0] - 0.2).abs() < 1e-15);
        assert!((s.column_avg[1] - 0.1).abs() < 1e-15);
        assert!((s.column_avg[2] - 0.4).abs() < 1e-15);
        assert_eq!(s.train_max, 0.5);
        assert_eq!(NdsStats::from_rows(std::iter::empty()), NdsStats::default());
    }

    #[test]
    fn featurize_shape() {
        let s = schema();
        let mut t = table_with_stats(NdsStats::default());
        for c in 0..3 {
            t.slots[c].insert("A".into(), 0.25);
        }
        let arm = TitleArm::new("A", 0.0, "standard", "comedy");
        let x = featurize(&arm, 30.0, &t, &s).unwrap();
        assert_eq!(x.len(), s.dim());
        assert_eq!(x, vec![1., 0., 0., 1., 0., 0., 1., 0., 0., 0.25, 0.25, 0.25, 1.]);
    }

    #[test]
    fn only_recency_block_changes_across_hr1() {
        let s = schema();
        let t = table_with_stats(NdsStats {
            column_avg: [0.1, 0.1, 0.1],
            train_max: 0.5,
        });
        let arm = TitleArm::new("A", 0.0, "standard", "kids");
        let before = featurize(&arm, 23.0, &t, &s).unwrap();
        let after = featurize(&arm, 25.0, &t, &s).unwrap();
        let diff: Vec<_> = s
            .groups()
            .into_iter()
            .zip(before.iter().zip(&after))
            .filter(|(_, (a, b))| a != b)
            .map(|(g, _)| g)
            .collect();
        assert_eq!(diff, vec![FeatureGroup::RecencyBin, FeatureGroup::RecencyBin]);
    }

    #[test]
    fn zero_count_slots_use_fill() {
        let s = schema();
        let z = counts(&[("A", 0), ("B", 0)]);
        let stats = NdsStats {
            column_avg: [0.05, 0.06, 0.07],
            train_max: 0.3,
        };
        let t = NdsTable::from_slot_counts(&[z.clone(), z.clone(), z], Some(stats));
        let arm = TitleArm::new("A", 0.0, "standard", "drama");
        let x = featurize(&arm, 200.0, &t, &s).unwrap();
        let fill = fill_cold_start(&t, &arm, 200.0, &s.binning, Some("high_priority")).unwrap();
        assert_eq!(&x[9..12], &fill);
    }

    #[test]
    fn unknown_label_and_exited_arm_rejected() {
        let s = schema();
        let t = NdsTable::default();
        let arm = TitleArm::new("A", 0.0, "standard", "horror");
        assert!(matches!(featurize(&arm, 1.0, &t, &s), Err(Error::UnknownLabel { .. })));
        let mut arm = TitleArm::new("A", 0.0, "standard", "drama");
        arm.state = crate::catalog::ArmState::Exited;
        assert!(matches!(featurize(&arm, 1.0, &t, &s), Err(Error::InactiveArm(_))));
    }

    #[test]
    fn schema_without_signals_and_mask() {
        let mut s = schema();
        s.temporal_signals = false;
        assert_eq!(s.dim(), 2 + 3 + 4 + 1);
        let mask = s.mask(&FeatureGroup::SMOOTHED);
        assert_eq!(mask.iter().filter(|m| **m).count(), s.dim() - 1);
        assert!(!mask[s.dim() - 1]);
        assert_ne!(s.fingerprint(), schema().fingerprint());
        assert_eq!(s.feature_names().len(), s.dim());
    }

    proptest! {
        #[test]
        fn nds_sums_to_one(v in proptest::collection::vec(0u64..1000, 1..60)) {
            let m: BTreeMap<String, u64> =
                v.iter().enumerate().map(|(i, c)| (format!("t{i}"), *c)).collect();
            match compute_nds(&m) {
                Some(n) => {
                    let s: f64 = n.values().sum();
                    prop_assert!((s - 1.0).abs() <= 1e-12);
                    prop_assert!(n.values().all(|x| (0.0..=1.0).contains(x)));
                }
                None => prop_assert_eq!(v.iter().sum::<u64>(), 0),
            }
        }

        #[test]
        fn recency_bin_monotone(a in 0.0f64..1000.0, b in 0.0f64..1000.0) {
            let bins = RecencyBinning::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(bins.bin(lo).unwrap() <= bins.bin(hi).unwrap());
        }

        #[test]
        fn encoded_blocks_are_one_hot(
            m in 0usize..2, c in 0usize..3, age in 0.0f64..500.0,
            nds in proptest::array::uniform3(0.0f64..=1.0),
        ) {
            let s = schema();
            let mut t = table_with_stats(NdsStats::default());
            for (col, v) in nds.iter().enumerate() {
                t.slots[col].insert("A".into(), *v);
            }
            let arm = TitleArm::new("A", 0.0, s.marketing_classes[m].clone(), s.content_categories[c].clone());
            let x = featurize(&arm, age, &t, &s).unwrap();
            prop_assert_eq!(x.len(), s.dim());
            let groups = s.groups();
            for g in [FeatureGroup::MarketingClass, FeatureGroup::ContentCategory, FeatureGroup::RecencyBin, FeatureGroup::Bias] {
                let sum: f64 = groups.iter().zip(&x).filter(|(gg, _)| **gg == g).map(|(_, v)| v).sum();
                prop_assert_eq!(sum, 1.0);
            }
            for (g, v) in groups.iter().zip(&x) {
                if *g == FeatureGroup::Nds {
                    prop_assert!((0.0..=1.0).contains(v));
                }
            }
            prop_assert_eq!(featurize(&arm, age, &t, &s).unwrap(), x);
        }
    }
}
