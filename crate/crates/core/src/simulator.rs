//! Synthetic production logs with known per-title conversion dynamics.
//!
//! Each window simulates a batch of training users and a disjoint batch of
//! evaluation users. Every request is ranked by a [`RankingPolicy`]; the top
//! `slate_size` titles (the whole ranking by default) are shown and each
//! streams independently with
//! probability `conversion(title, age, window) * examination(rank)`.

use log::warn;
use rand::seq::{index, SliceRandom};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use crate::bandit::{ScoringMode, ScoringSnapshot};
use crate::catalog::{ArmState, Catalog, RunClock, TitleArm};
use crate::features::{RecencyBinning, NDS_COLUMNS, NUM_BINS};
use crate::{Error, Result};

/// Stable 64-bit mix of a seed and a sequence of stream identifiers.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    parts.iter().fold(splitmix(seed), |acc, p| splitmix(acc ^ splitmix(*p)))
}

pub fn seeded_rng(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, parts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TitleDynamics {
    pub base_conversion: f64,
    /// Multiplier per recency bin.
    pub launch_decay: [f64; NUM_BINS],
    pub category_effect: f64,
    /// Log-normal sigma of the per-window popularity multiplier.
    pub popularity_drift: f64,
}

impl Default for TitleDynamics {
    fn default() -> Self {
        Self {
            base_conversion: 0.1,
            launch_decay: [1.0, 0.7, 0.5, 0.35],
            category_effect: 1.0,
            popularity_drift: 0.0,
        }
    }
}

impl TitleDynamics {
    pub fn conversion(&self, bin: usize, drift: f64) -> f64 {
        (self.base_conversion * self.launch_decay[bin] * self.category_effect * drift).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TitleScript {
    pub title_id: String,
    pub launch_time: f64,
    #[serde(default)]
    pub exit_time: Option<f64>,
    pub marketing_class: String,
    pub content_category: String,
    pub dynamics: TitleDynamics,
}

impl TitleScript {
    pub fn arm(&self) -> TitleArm {
        TitleArm::new(
            self.title_id.clone(),
            self.launch_time,
            self.marketing_class.clone(),
            self.content_category.clone(),
        )
    }

    fn live_at(&self, hour: f64) -> bool {
        self.launch_time <= hour && self.exit_time.is_none_or(|e| hour < e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Stationary,
    RecencySparsity,
    CategoryCannibalization,
    OverExposure,
    UnderExposure,
    Mixed,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Stationary => "stationary",
            ScenarioKind::RecencySparsity => "recency_sparsity",
            ScenarioKind::CategoryCannibalization => "category_cannibalization",
            ScenarioKind::OverExposure => "over_exposure",
            ScenarioKind::UnderExposure => "under_exposure",
            ScenarioKind::Mixed => "mixed",
        }
    }
}

/// Deterministic script of a synthetic catalog and its audience.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub titles: Vec<TitleScript>,
    pub users_per_window: usize,
    pub eval_users_per_window: usize,
    pub slate_size: usize,
    /// Hour at which window 0 opens.
    pub start_hour: f64,
    pub period: f64,
    pub binning: RecencyBinning,
    /// Titles singled out for exposure case studies, e.g. `popular`.
    #[serde(default)]
    pub focus: BTreeMap<String, String>,
    /// Window index at which the case-study transition happens.
    #[serde(default)]
    pub transition_run: Option<u32>,
}

impl SimScenario {
    pub fn validate(&self) -> Result<()> {
        self.binning.validate()?;
        if self.titles.is_empty() {
            return Err(Error::InvalidConfig("scenario has no titles".into()));
        }
        if self.slate_size == 0 || self.users_per_window == 0 {
            return Err(Error::InvalidConfig("slate size and users per window must be positive".into()));
        }
        if !(self.period > 0.0) {
            return Err(Error::InvalidConfig("period must be positive".into()));
        }
        let mut seen = BTreeSet::new();
        for t in &self.titles {
            if !seen.insert(&t.title_id) {
                return Err(Error::DuplicateArm(t.title_id.clone()));
            }
            if !(0.0..=1.0).contains(&t.dynamics.base_conversion) || t.dynamics.popularity_drift < 0.0 {
                return Err(Error::InvalidConfig(format!("bad dynamics for `{}`", t.title_id)));
            }
        }
        Ok(())
    }

    pub fn marketing_classes(&self) -> Vec<String> {
        let s: BTreeSet<_> = self.titles.iter().map(|t| t.marketing_class.clone()).collect();
        s.into_iter().collect()
    }

    pub fn content_categories(&self) -> Vec<String> {
        let s: BTreeSet<_> = self.titles.iter().map(|t| t.content_category.clone()).collect();
        s.into_iter().collect()
    }

    pub fn title(&self, id: &str) -> Option<&TitleScript> {
        self.titles.iter().find(|t| t.title_id == id)
    }

    /// Clock of run `k`; run `k` closes window `k`.
    pub fn clock(&self, k: u32) -> Result<RunClock> {
        RunClock::at(self.start_hour + self.period, self.period, k)
    }

    /// Applies the script's entries and exits up to `hour` to `previous`.
    pub fn catalog_at(&self, hour: f64, previous: &Catalog) -> Result<Catalog> {
        let mut c = previous.with_as_of(hour);
        for t in &self.titles {
            let live = t.live_at(hour);
            match c.get(&t.title_id).map(|a| a.state) {
                Some(ArmState::Active) if !live => c = c.retire_arm(&t.title_id)?,
                None if live => c = c.register_arm(t.arm())?,
                _ => {}
            }
        }
        Ok(c)
    }

    /// Per-window popularity multiplier of every title.
    pub fn drift(&self, run_index: u32) -> BTreeMap<String, f64> {
        self.titles
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let s = t.dynamics.popularity_drift;
                let m = if s > 0.0 {
                    let z: f64 = seeded_rng(self.seed, &[0xD81F, u64::from(run_index), i as u64])
                        .sample(StandardNormal);
                    (s * z - 0.5 * s * s).exp()
                } else {
                    1.0
                };
                (t.title_id.clone(), m)
            })
            .collect()
    }

    /// Ground-truth stream probability of a title shown at rank 1.
    pub fn conversion(&self, title_id: &str, now: f64, drift: f64) -> Result<f64> {
        let t = self.title(title_id).ok_or_else(|| Error::UnknownArm(title_id.to_string()))?;
        let bin = self.binning.bin(now - t.launch_time)?;
        Ok(t.dynamics.conversion(bin, drift))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sc: SimScenario = serde_json::from_str(s)?;
        sc.validate()?;
        Ok(sc)
    }
}

/// Attention paid to slate position `rank` (1-based).
pub fn examination(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

/// A title ranking for one request; indices refer to `catalog.active()` order.
pub trait RankingPolicy {
    fn rank(&self, now: f64, rng: &mut dyn RngCore) -> Result<Vec<usize>>;
}

/// Uniformly random ordering, used to bootstrap window 0.
pub struct UniformPolicy {
    pub n_arms: usize,
}

impl RankingPolicy for UniformPolicy {
    fn rank(&self, _now: f64, rng: &mut dyn RngCore) -> Result<Vec<usize>> {
        if self.n_arms == 0 {
            return Err(Error::EmptyCatalog);
        }
        let mut v: Vec<usize> = (0..self.n_arms).collect();
        v.shuffle(rng);
        Ok(v)
    }
}

/// Thompson-sampled ranking from a model snapshot.
pub struct ThompsonPolicy<'a> {
    pub snapshot: &'a ScoringSnapshot,
    pub mode: ScoringMode,
}

impl RankingPolicy for ThompsonPolicy<'_> {
    fn rank(&self, now: f64, mut rng: &mut dyn RngCore) -> Result<Vec<usize>> {
        Ok(self
            .snapshot
            .rank(now, &mut rng, self.mode)?
            .into_iter()
            .map(|(i, _)| i)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub timestamp: f64,
    pub request_id: u64,
    pub title_id: String,
    pub rank: u32,
    pub streamed: bool,
}

/// Impressions of one window, sorted by request id then rank.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InteractionLog {
    pub window: (f64, f64),
    pub rows: Vec<LogRow>,
}

impl InteractionLog {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["timestamp", "request_id", "title_id", "rank", "streamed"])?;
        for r in &self.rows {
            w.write_record([
                r.timestamp.to_string(),
                r.request_id.to_string(),
                r.title_id.clone(),
                r.rank.to_string(),
                u8::from(r.streamed).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, window: (f64, f64)) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let bad = |f: &str| Error::InvalidConfig(format!("bad log field `{f}`"));
            rows.push(LogRow {
                timestamp: rec[0].parse().map_err(|_| bad(&rec[0]))?,
                request_id: rec[1].parse().map_err(|_| bad(&rec[1]))?,
                title_id: rec[2].to_string(),
                rank: rec[3].parse().map_err(|_| bad(&rec[3]))?,
                streamed: match &rec[4] {
                    "1" => true,
                    "0" => false,
                    other => return Err(bad(other)),
                },
            });
        }
        Ok(Self { window, rows })
    }

    /// Distinct requests per title, impressions and streams.
    pub fn title_totals(&self) -> BTreeMap<String, (u64, u64)> {
        let mut m: BTreeMap<String, (u64, u64)> = BTreeMap::new();
        for r in &self.rows {
            let e = m.entry(r.title_id.clone()).or_default();
            e.0 += 1;
            e.1 += u64::from(r.streamed);
        }
        m
    }

    /// Impressions grouped per request, in rank order.
    pub fn requests(&self) -> impl Iterator<Item = &[LogRow]> {
        self.rows.chunk_by(|a, b| a.request_id == b.request_id)
    }
}

/// Training-user and evaluation-user logs of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowLogs {
    pub train: InteractionLog,
    pub eval: InteractionLog,
}

fn simulate_requests(
    scenario: &SimScenario,
    clock: &RunClock,
    arms: &[&TitleArm],
    policy: &dyn RankingPolicy,
    policy_seed: u64,
    drift: &BTreeMap<String, f64>,
    users: std::ops::Range<usize>,
) -> Result<InteractionLog> {
    let (lo, hi) = clock.window();
    let mut rows = Vec::with_capacity(users.len() * scenario.slate_size.min(scenario.titles.len()));
    for u in users {
        let k = u64::from(clock.run_index);
        let mut user_rng = seeded_rng(scenario.seed, &[0x05E7, k, u as u64]);
        let mut policy_rng = seeded_rng(policy_seed, &[0x9011, k, u as u64]);
        let frac: f64 = user_rng.random();
        let now = hi - frac * (hi - lo);
        let request_id = (k << 32) | u as u64;
        let ranking = policy.rank(now, &mut policy_rng)?;
        for (pos, &i) in ranking.iter().take(scenario.slate_size).enumerate() {
            let arm = arms[i];
            let p = scenario.conversion(&arm.title_id, now, drift[&arm.title_id])? * examination(pos + 1);
            let streamed = user_rng.random::<f64>() < p;
            rows.push(LogRow {
                timestamp: now,
                request_id,
                title_id: arm.title_id.clone(),
                rank: (pos + 1) as u32,
                streamed,
            });
        }
    }
    Ok(InteractionLog {
        window: (lo, hi),
        rows,
    })
}

/// Simulates window `clock.run_index` under `policy`.
///
/// Training users and evaluation users are drawn from disjoint id ranges.
pub fn generate_window(
    scenario: &SimScenario,
    clock: &RunClock,
    catalog: &Catalog,
    policy: &dyn RankingPolicy,
    policy_seed: u64,
) -> Result<WindowLogs> {
    let arms: Vec<&TitleArm> = catalog.active().collect();
    if arms.is_empty() {
        return Err(Error::EmptyCatalog);
    }
    let drift = scenario.drift(clock.run_index);
    let n = scenario.users_per_window;
    let m = scenario.eval_users_per_window;
    Ok(WindowLogs {
        train: simulate_requests(scenario, clock, &arms, policy, policy_seed, &drift, 0..n)?,
        eval: simulate_requests(scenario, clock, &arms, policy, policy_seed, &drift, n..n + m)?,
    })
}

/// Keeps every streamed impression and up to `negatives_per_positive`
/// uniformly sampled non-streamed impressions per positive.
pub fn downsample(log: &InteractionLog, negatives_per_positive: usize, rng: &mut impl Rng) -> Result<Vec<LogRow>> {
    if negatives_per_positive == 0 {
        return Err(Error::InvalidConfig("negatives per positive must be at least 1".into()));
    }
    let positives: Vec<usize> = (0..log.rows.len()).filter(|&i| log.rows[i].streamed).collect();
    if positives.is_empty() {
        warn!("window {:?} has no positive impressions; downsampled set is empty", log.window);
        return Ok(Vec::new());
    }
    let negatives: Vec<usize> = (0..log.rows.len()).filter(|&i| !log.rows[i].streamed).collect();
    let want = negatives_per_positive.saturating_mul(positives.len());
    let mut keep = positives;
    if want >= negatives.len() {
        keep.extend(&negatives);
    } else {
        keep.extend(index::sample(rng, negatives.len(), want).into_iter().map(|j| negatives[j]));
    }
    keep.sort_unstable();
    Ok(keep.into_iter().map(|i| log.rows[i].clone()).collect())
}

/// Distinct requests that streamed `title_id` with timestamp in `(lo, hi]`.
pub fn distinct_streams<'a>(rows: impl IntoIterator<Item = &'a LogRow>, title_id: &str, window: (f64, f64)) -> u64 {
    let (lo, hi) = window;
    rows.into_iter()
        .filter(|r| r.streamed && r.title_id == title_id && lo < r.timestamp && r.timestamp <= hi)
        .map(|r| r.request_id)
        .collect::<BTreeSet<_>>()
        .len() as u64
}

/// Distinct-stream counts for the three `p`-hour slots ending at `run_hour`,
/// newest first. Titles launched after a slot opened are left out of it.
pub fn slot_counts<'a>(
    logs: &[&'a InteractionLog],
    titles: &[&TitleArm],
    run_hour: f64,
    p: f64,
) -> [BTreeMap<String, u64>; NDS_COLUMNS] {
    std::array::from_fn(|c| {
        let hi = run_hour - c as f64 * p;
        let lo = hi - p;
        let mut streams: BTreeMap<&str, BTreeSet<u64>> = BTreeMap::new();
        for log in logs {
            for r in &log.rows {
                if r.streamed && lo < r.timestamp && r.timestamp <= hi {
                    streams.entry(r.title_id.as_str()).or_default().insert(r.request_id);
                }
            }
        }
        titles
            .iter()
            .filter(|t| t.launch_time <= lo)
            .map(|t| {
                let n = streams.get(t.title_id.as_str()).map_or(0, |s| s.len() as u64);
                (t.title_id.clone(), n)
            })
            .collect()
    })
}

fn title(
    id: impl Into<String>,
    launch_time: f64,
    marketing: &str,
    category: &str,
    base_conversion: f64,
    drift: f64,
) -> TitleScript {
    TitleScript {
        title_id: id.into(),
        launch_time,
        exit_time: None,
        marketing_class: marketing.into(),
        content_category: category.into(),
        dynamics: TitleDynamics {
            base_conversion,
            popularity_drift: drift,
            ..TitleDynamics::default()
        },
    }
}

const MARKETING: [&str; 3] = ["standard", "premium", "high_priority"];
const CATEGORIES: [&str; 5] = ["drama", "comedy", "action", "kids", "documentary"];

impl SimScenario {
    fn base(kind: ScenarioKind, seed: u64, titles: Vec<TitleScript>) -> Self {
        Self {
            slate_size: titles.len(),
            kind,
            seed,
            titles,
            users_per_window: 10_000,
            eval_users_per_window: 2_000,
            start_hour: 0.0,
            period: 24.0,
            binning: RecencyBinning::default(),
            focus: BTreeMap::new(),
            transition_run: None,
        }
    }

    /// Canned script for `kind`; every random choice derives from `seed`.
    pub fn canned(kind: ScenarioKind, seed: u64) -> Self {
        match kind {
            ScenarioKind::Stationary => Self::stationary(seed),
            ScenarioKind::RecencySparsity => Self::recency_sparsity(seed),
            ScenarioKind::CategoryCannibalization => Self::category_cannibalization(seed),
            ScenarioKind::OverExposure => Self::over_exposure(seed),
            ScenarioKind::UnderExposure => Self::under_exposure(seed),
            ScenarioKind::Mixed => Self::mixed(seed),
        }
    }

    /// All titles live from the start, long past launch; no drift.
    pub fn stationary(seed: u64) -> Self {
        let mut rng = seeded_rng(seed, &[1]);
        let titles = (0..50)
            .map(|i| {
                let conv = 0.02 + 0.28 * rng.random::<f64>();
                title(
                    format!("t{i:02}"),
                    -1000.0,
                    MARKETING[i % 2],
                    CATEGORIES[i % CATEGORIES.len()],
                    conv,
                    0.0,
                )
            })
            .collect();
        Self::base(ScenarioKind::Stationary, seed, titles)
    }

    /// Two always-live titles with identical labels and fixed stream rates.
    pub fn two_arm(seed: u64, rates: (f64, f64)) -> Self {
        let mk = |id: &str, r: f64| {
            let mut t = title(id, -1000.0, "standard", "drama", r, 0.0);
            t.dynamics.launch_decay = [1.0; NUM_BINS];
            t
        };
        let mut s = Self::base(
            ScenarioKind::Stationary,
            seed,
            vec![mk("best", rates.0), mk("worst", rates.1)],
        );
        s.users_per_window = 400;
        s.eval_users_per_window = 200;
        s.slate_size = 2;
        s
    }

    /// Staggered launches into a mostly old catalog so that the young
    /// recency bins are thin or empty in many windows.
    pub fn recency_sparsity(seed: u64) -> Self {
        let mut rng = seeded_rng(seed, &[2]);
        let mut titles: Vec<TitleScript> = (0..40)
            .map(|i| {
                let conv = 0.03 + 0.2 * rng.random::<f64>();
                title(
                    format!("old{i:02}"),
                    -1000.0,
                    MARKETING[i % 2],
                    CATEGORIES[i % CATEGORIES.len()],
                    conv,
                    0.15,
                )
            })
            .collect();
        for j in 0..10u32 {
            let launch = 24.0 * f64::from(3 + 4 * j);
            let conv = 0.1 + 0.3 * rng.random::<f64>();
            titles.push(title(
                format!("new{j:02}"),
                launch,
                MARKETING[(j as usize) % 3],
                CATEGORIES[(j as usize) % CATEGORIES.len()],
                conv,
                0.15,
            ));
        }
        Self::base(ScenarioKind::RecencySparsity, seed, titles)
    }

    /// Strong and weak titles share categories; within-category spread is large.
    pub fn category_cannibalization(seed: u64) -> Self {
        let mut rng = seeded_rng(seed, &[3]);
        let titles = (0..50)
            .map(|i| {
                let star = i % 10 == 0;
                let conv = if star { 0.3 + 0.1 * rng.random::<f64>() } else { 0.02 + 0.06 * rng.random::<f64>() };
                title(
                    format!("t{i:02}"),
                    -1000.0,
                    MARKETING[i % 2],
                    CATEGORIES[i % CATEGORIES.len()],
                    conv,
                    0.1,
                )
            })
            .collect();
        Self::base(ScenarioKind::CategoryCannibalization, seed, titles)
    }

    /// A popular title moves into a recency bin no other title occupies,
    /// while a mediocre newcomer sharing its labels enters the bin it left.
    pub fn over_exposure(seed: u64) -> Self {
        let mut rng = seeded_rng(seed, &[4]);
        let transition = 6u32;
        let popular_launch = 24.0 * f64::from(transition - 1);
        let mut titles: Vec<TitleScript> = (0..20)
            .map(|i| {
                let conv = 0.03 + 0.1 * rng.random::<f64>();
                title(
                    format!("old{i:02}"),
                    -1000.0,
                    MARKETING[i % 2],
                    CATEGORIES[i % CATEGORIES.len()],
                    conv,
                    0.1,
                )
            })
            .collect();
        titles.push(title("popular", popular_launch, "premium", "action", 0.45, 0.05));
        titles.push(title("over_exposed", popular_launch + 24.0, "premium", "action", 0.08, 0.05));
        let mut s = Self::base(ScenarioKind::OverExposure, seed, titles);
        s.focus.insert("popular".into(), "popular".into());
        s.focus.insert("study".into(), "over_exposed".into());
        s.transition_run = Some(transition);
        s
    }

    /// A strong title sits in a category of weak titles.
    pub fn under_exposure(seed: u64) -> Self {
        let mut rng = seeded_rng(seed, &[5]);
        let mut titles: Vec<TitleScript> = (0..20)
            .map(|i| {
                let (cat, conv) = if i < 8 {
                    ("documentary", 0.02 + 0.03 * rng.random::<f64>())
                } else {
                    (CATEGORIES[i % 4], 0.06 + 0.08 * rng.random::<f64>())
                };
                title(format!("old{i:02}"), -1000.0, MARKETING[i % 2], cat, conv, 0.1)
            })
            .collect();
        titles.push(title("popular", -1000.0, "premium", "action", 0.3, 0.05));
        titles.push(title("under_exposed", -1000.0, "standard", "documentary", 0.4, 0.05));
        let mut s = Self::base(ScenarioKind::UnderExposure, seed, titles);
        s.focus.insert("popular".into(), "popular".into());
        s.focus.insert("study".into(), "under_exposed".into());
        s.transition_run = Some(3);
        s
    }

    /// Cannibalization, staggered launches, exits and drift together.
    ///
    /// Titles share a handful of label cells with similar averages, while
    /// conversion inside a cell is spread log-normally.
    pub fn mixed(seed: u64) -> Self {
        let mut rng = seeded_rng(seed, &[6]);
        let draw = |rng: &mut ChaCha8Rng| {
            let z: f64 = rng.sample(StandardNormal);
            (0.05 * (0.8 * z).exp()).min(0.5)
        };
        // Shuffled ids so that the id order carries no information.
        let mut ids: Vec<usize> = (0..50).collect();
        ids.shuffle(&mut rng);
        let mut titles = Vec::new();
        for i in 0..40usize {
            let conv = draw(&mut rng);
            let mut t = title(
                format!("t{:02}", ids[i]),
                -1000.0,
                MARKETING[i % 2],
                CATEGORIES[(i / 2) % CATEGORIES.len()],
                conv,
                0.1,
            );
            if i % 8 == 7 {
                t.exit_time = Some(24.0 * f64::from(10 + (i as u32 % 25)));
            }
            titles.push(t);
        }
        for j in 0..10u32 {
            let conv = draw(&mut rng);
            titles.push(title(
                format!("t{:02}", ids[40 + j as usize]),
                24.0 * f64::from(3 + 4 * j),
                MARKETING[(j as usize) % 3],
                CATEGORIES[(j as usize) % CATEGORIES.len()],
                conv,
                0.1,
            ));
        }
        Self::base(ScenarioKind::Mixed, seed, titles)
    }
}
