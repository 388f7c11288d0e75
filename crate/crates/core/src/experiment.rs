//! Closed-loop experiment runner.
//!
//! Each run `k` simulates window `k` with the model of run `k - 1` (window 0
//! uses a uniform random policy shared by all variants), featurizes and
//! optionally augments the downsampled training pairs, trains incrementally,
//! evaluates on the window's held-out users and persists everything needed
//! to resume or to recompute the reports.

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::augment::{augment, AugmentConfig, TrainingExample};
use crate::bandit::{EncodedBatch, ModelState, ScoringMode, SmoothingConfig, TrainConfig, TrainReport};
use crate::catalog::{Catalog, TitleArm};
use crate::eval::{self, Metric, RunReport, TitleExposure};
use crate::features::{FeatureGroup, FeatureSchema, NdsTable, RecencyBinning};
use crate::simulator::{
    derive_seed, downsample, generate_window, slot_counts, InteractionLog, LogRow, RankingPolicy, ScenarioKind,
    SimScenario, ThompsonPolicy, UniformPolicy,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Baseline,
    BaselineWithReg,
    Proposed,
    ProposedNoReg,
    ProposedNoBeta,
}

/// Which mechanisms a variant switches on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariantFlags {
    pub augmentation: bool,
    pub beta_stage: bool,
    pub temporal_signals: bool,
    pub regularization: bool,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Baseline,
        Variant::BaselineWithReg,
        Variant::Proposed,
        Variant::ProposedNoReg,
        Variant::ProposedNoBeta,
    ];

    pub fn flags(self) -> VariantFlags {
        let (augmentation, beta_stage, temporal_signals, regularization) = match self {
            Variant::Baseline => (false, false, false, false),
            Variant::BaselineWithReg => (false, false, false, true),
            Variant::Proposed => (true, true, true, true),
            Variant::ProposedNoReg => (true, true, true, false),
            Variant::ProposedNoBeta => (true, false, true, true),
        };
        VariantFlags {
            augmentation,
            beta_stage,
            temporal_signals,
            regularization,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::BaselineWithReg => "baseline_with_reg",
            Variant::Proposed => "proposed",
            Variant::ProposedNoReg => "proposed_no_reg",
            Variant::ProposedNoBeta => "proposed_no_beta",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    /// Inline script; when absent the canned script for `kind` is used.
    #[serde(default)]
    pub script: Option<SimScenario>,
    #[serde(default)]
    pub users_per_window: Option<usize>,
    #[serde(default)]
    pub eval_users_per_window: Option<usize>,
}

impl ScenarioSpec {
    pub fn canned(kind: ScenarioKind) -> Self {
        Self {
            kind,
            script: None,
            users_per_window: None,
            eval_users_per_window: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    /// Catalog script and user behaviour.
    pub scenario: u64,
    /// Ranking draws when serving.
    pub policy: u64,
    /// Downsampling, augmentation, mini-batch order and evaluation draws.
    pub model: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            scenario: 1,
            policy: 2,
            model: 3,
        }
    }
}

fn default_nds_scale() -> f64 {
    50.0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSpec,
    pub n_runs: u32,
    /// Training cadence in hours.
    pub period: f64,
    pub binning: RecencyBinning,
    /// NDS slot length in hours.
    pub slot_hours: f64,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub q: usize,
    pub train: TrainConfig,
    pub negatives_per_positive: usize,
    pub prior_variance: f64,
    pub high_priority_class: Option<String>,
    /// Multiplier applied to NDS shares in the encoded feature vector.
    #[serde(default = "default_nds_scale")]
    pub nds_scale: f64,
    pub variant: Variant,
    pub seeds: Seeds,
    pub output_dir: PathBuf,
    /// Persist full impression logs of every window.
    #[serde(default = "default_true")]
    pub write_logs: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioSpec::canned(ScenarioKind::Mixed),
            n_runs: 40,
            period: 24.0,
            binning: RecencyBinning::default(),
            slot_hours: 8.0,
            alpha: 0.15,
            beta: 0.10,
            lambda: 0.25,
            q: 5,
            train: TrainConfig::default(),
            negatives_per_positive: 3,
            prior_variance: 1.0,
            high_priority_class: Some("high_priority".into()),
            nds_scale: default_nds_scale(),
            variant: Variant::Proposed,
            seeds: Seeds::default(),
            output_dir: PathBuf::from("experiment"),
            write_logs: true,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(&fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::InvalidConfig("n_runs must be at least 1".into()));
        }
        if !(self.period > 0.0) || !(self.slot_hours > 0.0) {
            return Err(Error::InvalidConfig("period and slot_hours must be positive".into()));
        }
        if self.negatives_per_positive == 0 {
            return Err(Error::InvalidConfig("negatives_per_positive must be at least 1".into()));
        }
        self.binning.validate()?;
        self.augment_config(0).validate()?;
        self.smoothing().validate()?;
        self.train.validate()?;
        self.scenario()?.validate()
    }

    /// The scenario script with config-level overrides applied.
    pub fn scenario(&self) -> Result<SimScenario> {
        let mut s = match &self.scenario.script {
            Some(s) => s.clone(),
            None => SimScenario::canned(self.scenario.kind, self.seeds.scenario),
        };
        if s.kind != self.scenario.kind {
            return Err(Error::InvalidConfig(format!(
                "scenario script is `{}` but config names `{}`",
                s.kind.as_str(),
                self.scenario.kind.as_str()
            )));
        }
        s.period = self.period;
        s.binning = self.binning;
        if let Some(n) = self.scenario.users_per_window {
            s.users_per_window = n;
        }
        if let Some(n) = self.scenario.eval_users_per_window {
            s.eval_users_per_window = n;
        }
        Ok(s)
    }

    pub fn flags(&self) -> VariantFlags {
        self.variant.flags()
    }

    pub fn schema(&self, scenario: &SimScenario) -> FeatureSchema {
        FeatureSchema {
            marketing_classes: scenario.marketing_classes(),
            content_categories: scenario.content_categories(),
            binning: self.binning,
            temporal_signals: self.flags().temporal_signals,
            high_priority_class: self.high_priority_class.clone(),
            nds_scale: self.nds_scale,
        }
    }

    pub fn smoothing(&self) -> SmoothingConfig {
        SmoothingConfig {
            lambda: if self.flags().regularization { self.lambda } else { 0.0 },
            q: self.q,
            groups: FeatureGroup::SMOOTHED.to_vec(),
        }
    }

    pub fn augment_config(&self, run_index: u32) -> AugmentConfig {
        let f = self.flags();
        AugmentConfig {
            alpha: if f.augmentation { self.alpha } else { 0.0 },
            beta: if f.augmentation && f.beta_stage { self.beta } else { 0.0 },
            rng_seed: derive_seed(self.seeds.model, &[0xA06, u64::from(run_index)]),
        }
    }

    pub fn with_variant(&self, variant: Variant, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            variant,
            output_dir: output_dir.into(),
            ..self.clone()
        }
    }

    /// Number of past windows whose streams feed the NDS slots.
    fn archive_depth(&self) -> usize {
        ((3.0 * self.slot_hours) / self.period).ceil() as usize + 1
    }
}

/// Per-run outputs kept in memory and on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub report: RunReport,
    pub train: TrainReport,
    pub weights: Vec<f64>,
    pub bin_counts: BinCounts,
}

/// Recency-bin histogram of a training set before and after augmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinCounts {
    pub organic: [usize; 4],
    pub augmented: [usize; 4],
}

#[derive(Debug, Clone)]
pub struct ExperimentArtifacts {
    pub dir: PathBuf,
    pub feature_names: Vec<String>,
    pub runs: Vec<RunRecord>,
}

impl ExperimentArtifacts {
    pub fn reports(&self) -> Vec<RunReport> {
        self.runs.iter().map(|r| r.report.clone()).collect()
    }

    pub fn metric_series(&self, m: Metric) -> Vec<(u32, Option<f64>)> {
        self.runs.iter().map(|r| (r.report.run_index, r.report.metric(m))).collect()
    }

    pub fn mask(&self, groups: &[FeatureGroup]) -> Vec<bool> {
        self.feature_names
            .iter()
            .map(|n| {
                let g = if n.starts_with("marketing_class=") {
                    FeatureGroup::MarketingClass
                } else if n.starts_with("content_category=") {
                    FeatureGroup::ContentCategory
                } else if n.starts_with("recency_bin=") {
                    FeatureGroup::RecencyBin
                } else if n.starts_with("nds_") {
                    FeatureGroup::Nds
                } else {
                    FeatureGroup::Bias
                };
                groups.contains(&g)
            })
            .collect()
    }

    /// Mean over consecutive runs of the mean absolute change of the masked weights.
    pub fn mean_abs_weight_delta(&self, groups: &[FeatureGroup]) -> Option<f64> {
        mean_abs_weight_delta(
            &self.runs.iter().map(|r| r.weights.clone()).collect::<Vec<_>>(),
            &self.mask(groups),
        )
    }
}

pub fn mean_abs_weight_delta(weights: &[Vec<f64>], mask: &[bool]) -> Option<f64> {
    let k = mask.iter().filter(|m| **m).count();
    if weights.len() < 2 || k == 0 {
        return None;
    }
    let total: f64 = weights
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .zip(mask)
                .filter(|(_, m)| **m)
                .map(|((a, b), _)| (b - a).abs())
                .sum::<f64>()
                / k as f64
        })
        .sum();
    Some(total / (weights.len() - 1) as f64)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LoopState {
    next_run: u32,
    catalog: Catalog,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FailureMarker {
    run_index: u32,
    kind: String,
    message: String,
}

struct Layout {
    root: PathBuf,
}

impl Layout {
    fn run_dir(&self, k: u32) -> PathBuf {
        self.root.join("runs").join(format!("run_{k:03}"))
    }
    fn checkpoint(&self, k: u32) -> PathBuf {
        self.run_dir(k).join("checkpoint.json")
    }
    fn record(&self, k: u32) -> PathBuf {
        self.run_dir(k).join("record.json")
    }
    fn streams(&self, k: u32) -> PathBuf {
        self.root.join("archive").join(format!("streams_{k:03}.csv"))
    }
    fn logs(&self, k: u32) -> (PathBuf, PathBuf) {
        let d = self.root.join("logs");
        (d.join(format!("window_{k:03}_train.csv")), d.join(format!("window_{k:03}_eval.csv")))
    }
    fn state(&self) -> PathBuf {
        self.root.join("state.json")
    }
    fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }
    fn scenario(&self) -> PathBuf {
        self.root.join("scenario.json")
    }
    fn failure(&self) -> PathBuf {
        self.root.join("FAILED.json")
    }
    fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// NDS table at `hour` from the streams archive, with the model's training stats.
pub fn serving_nds(
    archive: &[InteractionLog],
    catalog: &Catalog,
    hour: f64,
    slot_hours: f64,
    model: &ModelState,
) -> NdsTable {
    let logs: Vec<&InteractionLog> = archive.iter().collect();
    let titles: Vec<&TitleArm> = catalog.active().collect();
    NdsTable::from_slot_counts(&slot_counts(&logs, &titles, hour, slot_hours), model.nds_stats)
}

fn to_examples(
    pairs: &[LogRow],
    catalog: &Catalog,
    schema: &FeatureSchema,
    nds: &NdsTable,
) -> Result<Vec<TrainingExample>> {
    pairs
        .iter()
        .map(|r| {
            let arm = catalog.get(&r.title_id).ok_or_else(|| Error::UnknownArm(r.title_id.clone()))?;
            Ok(TrainingExample::organic(schema.describe(arm, r.timestamp, nds)?, r.streamed))
        })
        .collect()
}

fn bin_histogram(examples: &[TrainingExample]) -> [usize; 4] {
    let mut h = [0; 4];
    for e in examples {
        h[e.row.recency_bin] += 1;
    }
    h
}

fn evaluate(
    cfg: &ExperimentConfig,
    run_index: u32,
    model: &ModelState,
    catalog: &Catalog,
    nds: &NdsTable,
    eval_log: &InteractionLog,
) -> Result<RunReport> {
    let schema = &model.schema;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seeds.model, &[0xE7A1, u64::from(run_index)]));
    let pairs = downsample(eval_log, cfg.negatives_per_positive, &mut rng)?;
    let examples = to_examples(&pairs, catalog, schema, nds)?;
    let mut scores = Vec::with_capacity(examples.len());
    for e in &examples {
        scores.push(model.mean_score(&schema.encode(&e.row)?)?);
    }
    let labels: Vec<bool> = examples.iter().map(|e| e.reward).collect();
    let roc = eval::roc_auc(&scores, &labels).ok();
    let pr = eval::pr_auc(&scores, &labels).ok();

    let snapshot = model.snapshot(catalog, nds)?;
    let mut rankings: Vec<Vec<String>> = Vec::new();
    for (j, req) in eval_log.requests().enumerate() {
        let mut r = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seeds.model, &[0x5A1E, u64::from(run_index), j as u64]));
        let order = snapshot.rank(req[0].timestamp, &mut r, ScoringMode::Thompson)?;
        rankings.push(order.into_iter().map(|(i, _)| snapshot.arms[i].title_id.clone()).collect());
    }

    let totals = eval_log.title_totals();
    let mut conversion = BTreeMap::new();
    let mut rewards = BTreeMap::new();
    for id in catalog.active_ids() {
        let (imp, st) = totals.get(&id).copied().unwrap_or((0, 0));
        conversion.insert(id.clone(), if imp > 0 { st as f64 / imp as f64 } else { 0.0 });
        rewards.insert(id, st as f64);
    }
    let mut per_title = BTreeMap::new();
    let (ndcg_conv, ndcg_pos) = if rankings.is_empty() {
        (None, None)
    } else {
        let sov = eval::top1_sov(&rankings);
        for (t, s) in &sov {
            per_title.insert(
                t.clone(),
                TitleExposure {
                    top1_sov: *s,
                    avg_rank: eval::avg_rank(&rankings, t)?,
                },
            );
        }
        (
            eval::ndcg_sov_alignment(&sov, &conversion).ok(),
            eval::ndcg_sov_alignment(&sov, &rewards).ok(),
        )
    };
    Ok(RunReport {
        run_index,
        config_id: cfg.variant.as_str().to_string(),
        roc_auc: roc,
        pr_auc: pr,
        ndcg_conversion: ndcg_conv,
        ndcg_positive_rewards: ndcg_pos,
        per_title,
    })
}

fn streams_only(log: &InteractionLog) -> InteractionLog {
    InteractionLog {
        window: log.window,
        rows: log.rows.iter().filter(|r| r.streamed).cloned().collect(),
    }
}

fn config_echo(cfg: &ExperimentConfig) -> Result<serde_json::Value> {
    let mut v = serde_json::to_value(cfg)?;
    // The output location does not affect results.
    if let Some(o) = v.as_object_mut() {
        o.remove("output_dir");
    }
    Ok(v)
}

/// Runs (or resumes) the experiment to completion.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentArtifacts> {
    run_experiment_until(cfg, None)
}

/// Runs until `stop_after` runs have completed (or all of them), leaving a
/// resumable directory behind.
pub fn run_experiment_until(cfg: &ExperimentConfig, stop_after: Option<u32>) -> Result<ExperimentArtifacts> {
    cfg.validate()?;
    let scenario = cfg.scenario()?;
    let schema = cfg.schema(&scenario);
    let layout = Layout {
        root: cfg.output_dir.clone(),
    };
    fs::create_dir_all(&layout.root)?;
    let echo = config_echo(cfg)?;

    let (mut loop_state, mut model) = if layout.state().exists() {
        let stored: serde_json::Value = serde_json::from_str(&fs::read_to_string(layout.config())?)?;
        if stored != echo {
            return Err(Error::InvalidConfig(format!(
                "{} holds a different experiment; refusing to resume",
                layout.root.display()
            )));
        }
        let st: LoopState = serde_json::from_str(&fs::read_to_string(layout.state())?)?;
        let model = if st.next_run == 0 {
            ModelState::new(schema.clone(), cfg.prior_variance, cfg.q)?
        } else {
            ModelState::restore(&fs::read_to_string(layout.checkpoint(st.next_run - 1))?, Some(&schema))?.model
        };
        info!("resuming {} at run {}", layout.root.display(), st.next_run);
        (st, model)
    } else {
        write_atomic(&layout.config(), serde_json::to_string_pretty(&echo)?.as_bytes())?;
        write_atomic(&layout.scenario(), scenario.to_json()?.as_bytes())?;
        let st = LoopState {
            next_run: 0,
            catalog: Catalog::new(scenario.start_hour),
        };
        write_atomic(&layout.state(), serde_json::to_string_pretty(&st)?.as_bytes())?;
        (st, ModelState::new(schema.clone(), cfg.prior_variance, cfg.q)?)
    };
    let _ = fs::remove_file(layout.failure());

    let depth = cfg.archive_depth() as u32;
    let mut archive: Vec<InteractionLog> = Vec::new();
    for k in loop_state.next_run.saturating_sub(depth)..loop_state.next_run {
        let clock = scenario.clock(k)?;
        let f = fs::File::open(layout.streams(k))?;
        archive.push(InteractionLog::read_csv(f, clock.window())?);
    }

    let end = stop_after.map_or(cfg.n_runs, |s| s.min(cfg.n_runs));
    while loop_state.next_run < end {
        let k = loop_state.next_run;
        let outcome = run_once(cfg, &scenario, &schema, &layout, k, &loop_state.catalog, &model, &archive, &echo);
        let (catalog, next_model, window_streams) = match outcome {
            Ok(v) => v,
            Err(e) => {
                let marker = FailureMarker {
                    run_index: k,
                    kind: e.kind().to_string(),
                    message: e.to_string(),
                };
                write_atomic(&layout.failure(), serde_json::to_string_pretty(&marker)?.as_bytes())?;
                return Err(e);
            }
        };
        model = next_model;
        archive.push(window_streams);
        if archive.len() > depth as usize {
            archive.remove(0);
        }
        loop_state = LoopState {
            next_run: k + 1,
            catalog,
        };
        write_atomic(&layout.state(), serde_json::to_string_pretty(&loop_state)?.as_bytes())?;
    }

    let artifacts = load_artifacts(&layout.root, loop_state.next_run)?;
    write_reports(&artifacts)?;
    Ok(artifacts)
}

#[allow(clippy::too_many_arguments)]
fn run_once(
    cfg: &ExperimentConfig,
    scenario: &SimScenario,
    schema: &FeatureSchema,
    layout: &Layout,
    k: u32,
    previous_catalog: &Catalog,
    model: &ModelState,
    archive: &[InteractionLog],
    echo: &serde_json::Value,
) -> Result<(Catalog, ModelState, InteractionLog)> {
    let clock = scenario.clock(k)?;
    let (window_start, _) = clock.window();
    let catalog = scenario.catalog_at(window_start, previous_catalog)?;
    let mut serving = model.clone();
    serving.sync_catalog(&catalog)?;
    let nds = serving_nds(archive, &catalog, window_start, cfg.slot_hours, &serving);

    let logs = if k == 0 {
        let policy = UniformPolicy {
            n_arms: catalog.len_active(),
        };
        generate_window(scenario, &clock, &catalog, &policy, cfg.seeds.policy)?
    } else {
        let snapshot = serving.snapshot(&catalog, &nds)?;
        let policy = ThompsonPolicy {
            snapshot: &snapshot,
            mode: ScoringMode::Thompson,
        };
        generate_window(scenario, &clock, &catalog, &policy as &dyn RankingPolicy, cfg.seeds.policy)?
    };

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seeds.model, &[0xD05A, u64::from(k)]));
    let pairs = downsample(&logs.train, cfg.negatives_per_positive, &mut rng)?;
    let organic = to_examples(&pairs, &catalog, schema, &nds)?;
    let examples = augment(&organic, &cfg.augment_config(k));
    let bin_counts = BinCounts {
        organic: bin_histogram(&organic),
        augmented: bin_histogram(&examples),
    };
    let batch = EncodedBatch::encode(schema, &examples)?;
    let mut train_cfg = cfg.train.clone();
    train_cfg.rng_seed = derive_seed(cfg.seeds.model, &[0x7EA1, cfg.train.rng_seed]);
    let (trained, train_report) = serving.train_incremental(k, &batch, &train_cfg, &cfg.smoothing())?;
    let report = evaluate(cfg, k, &trained, &catalog, &nds, &logs.eval)?;

    let record = RunRecord {
        report,
        train: train_report,
        weights: trained.weights.clone(),
        bin_counts,
    };
    write_atomic(&layout.checkpoint(k), trained.to_checkpoint(Some(echo.clone()))?.as_bytes())?;
    write_atomic(&layout.record(k), serde_json::to_string_pretty(&record)?.as_bytes())?;
    let window_streams = streams_only(&logs.train);
    let mut all_streams = window_streams.clone();
    all_streams.rows.extend(streams_only(&logs.eval).rows);
    let mut buf = Vec::new();
    all_streams.write_csv(&mut buf)?;
    write_atomic(&layout.streams(k), &buf)?;
    if cfg.write_logs {
        let (tp, ep) = layout.logs(k);
        for (path, log) in [(tp, &logs.train), (ep, &logs.eval)] {
            let mut buf = Vec::new();
            log.write_csv(&mut buf)?;
            write_atomic(&path, &buf)?;
        }
    }
    info!(
        "{} run {k}: rows={} roc_auc={:?}",
        cfg.variant.as_str(),
        examples.len(),
        record.report.roc_auc
    );
    Ok((catalog, trained, all_streams))
}

/// Loads per-run records `0..n_runs` of an experiment directory.
pub fn load_artifacts(dir: &Path, n_runs: u32) -> Result<ExperimentArtifacts> {
    let layout = Layout { root: dir.to_path_buf() };
    let mut runs = Vec::new();
    for k in 0..n_runs {
        runs.push(serde_json::from_str::<RunRecord>(&fs::read_to_string(layout.record(k))?)?);
    }
    let feature_names = if n_runs > 0 {
        ModelState::restore(&fs::read_to_string(layout.checkpoint(0))?, None)?
            .model
            .schema
            .feature_names()
    } else {
        Vec::new()
    };
    Ok(ExperimentArtifacts {
        dir: dir.to_path_buf(),
        feature_names,
        runs,
    })
}

/// Opens a completed (or partial) experiment directory.
pub fn open_experiment(dir: &Path) -> Result<(ExperimentConfig, ExperimentArtifacts)> {
    let layout = Layout { root: dir.to_path_buf() };
    let mut echo: serde_json::Value = serde_json::from_str(&fs::read_to_string(layout.config())?)?;
    if let Some(o) = echo.as_object_mut() {
        o.insert("output_dir".into(), serde_json::Value::String(dir.display().to_string()));
    }
    let cfg: ExperimentConfig = serde_json::from_value(echo)?;
    let st: LoopState = serde_json::from_str(&fs::read_to_string(layout.state())?)?;
    Ok((cfg, load_artifacts(dir, st.next_run)?))
}

fn write_reports(a: &ExperimentArtifacts) -> Result<()> {
    let dir = Layout { root: a.dir.clone() }.reports();
    fs::create_dir_all(&dir)?;
    let reports = a.reports();
    let mut buf = Vec::new();
    eval::write_metrics_csv(&reports, &mut buf)?;
    write_atomic(&dir.join("metrics.csv"), &buf)?;
    let mut buf = Vec::new();
    eval::write_exposure_csv(&reports, &mut buf)?;
    write_atomic(&dir.join("exposure.csv"), &buf)?;
    let mut buf = Vec::new();
    write_weights_csv(a, &mut buf)?;
    write_atomic(&dir.join("weights.csv"), &buf)?;

    let mut summary = serde_json::Map::new();
    summary.insert("runs".into(), reports.len().into());
    for m in Metric::ALL {
        let vals: Vec<f64> = reports.iter().filter_map(|r| r.metric(m)).collect();
        let mean = if vals.is_empty() { None } else { Some(vals.iter().sum::<f64>() / vals.len() as f64) };
        summary.insert(format!("mean_{}", m.as_str()), serde_json::to_value(mean)?);
    }
    summary.insert(
        "mean_abs_weight_delta".into(),
        serde_json::to_value(a.mean_abs_weight_delta(&FeatureGroup::SMOOTHED))?,
    );
    write_atomic(&dir.join("summary.json"), serde_json::to_string_pretty(&summary)?.as_bytes())?;
    Ok(())
}

/// `run_index,feature_name,weight` rows for every run.
pub fn write_weights_csv<W: std::io::Write>(a: &ExperimentArtifacts, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["run_index", "feature_name", "weight"])?;
    for r in &a.runs {
        for (name, v) in a.feature_names.iter().zip(&r.weights) {
            w.write_record([r.report.run_index.to_string(), name.clone(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `weights.csv` for an experiment directory and returns its path.
pub fn export_weights(dir: &Path, out: Option<&Path>) -> Result<PathBuf> {
    let (_, a) = open_experiment(dir)?;
    let path = out.map_or_else(|| dir.join("reports").join("weights.csv"), Path::to_path_buf);
    let mut buf = Vec::new();
    write_weights_csv(&a, &mut buf)?;
    write_atomic(&path, &buf)?;
    Ok(path)
}

/// Relative gain of a focus title's exposure over the baseline in one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureGain {
    pub role: String,
    pub title_id: String,
    pub run_index: u32,
    pub avg_rank_gain: Option<f64>,
    pub top1_sov_gain: Option<f64>,
    pub top1_sov_candidate: f64,
    pub top1_sov_baseline: f64,
}

/// Gain files written by [`compare`].
#[derive(Debug, Clone, Default)]
pub struct ComparisonOutput {
    pub files: Vec<PathBuf>,
    pub gains: BTreeMap<(String, Metric), Vec<eval::GainPoint>>,
    pub exposure: BTreeMap<String, Vec<ExposureGain>>,
}

fn rel(a: f64, b: f64) -> Option<f64> {
    (b > 0.0).then(|| (a - b) / b)
}

/// Focus-title exposure gains for the three runs starting at the scenario's
/// transition run.
pub fn exposure_gains(
    scenario: &SimScenario,
    candidate: &ExperimentArtifacts,
    baseline: &ExperimentArtifacts,
) -> Vec<ExposureGain> {
    let Some(start) = scenario.transition_run else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for (role, title) in &scenario.focus {
        for k in start..start + 3 {
            let (Some(c), Some(b)) = (candidate.runs.get(k as usize), baseline.runs.get(k as usize)) else {
                continue;
            };
            let (Some(ce), Some(be)) = (c.report.per_title.get(title), b.report.per_title.get(title)) else {
                continue;
            };
            out.push(ExposureGain {
                role: role.clone(),
                title_id: title.clone(),
                run_index: k,
                avg_rank_gain: rel(ce.avg_rank, be.avg_rank),
                top1_sov_gain: rel(ce.top1_sov, be.top1_sov),
                top1_sov_candidate: ce.top1_sov,
                top1_sov_baseline: be.top1_sov,
            });
        }
    }
    out
}

/// Relative-gain series of each candidate directory over `baseline`, plus
/// the focus-title exposure table. Files go to `out_dir`.
pub fn compare(baseline: &Path, candidates: &[PathBuf], out_dir: &Path) -> Result<ComparisonOutput> {
    let (base_cfg, base) = open_experiment(baseline)?;
    let scenario = base_cfg.scenario()?;
    fs::create_dir_all(out_dir)?;
    let mut out = ComparisonOutput::default();
    for dir in candidates {
        let (cfg, cand) = open_experiment(dir)?;
        if cfg.scenario()? != scenario {
            return Err(Error::Misaligned(format!(
                "{} uses a different scenario than the baseline",
                dir.display()
            )));
        }
        if cfg.seeds != base_cfg.seeds {
            return Err(Error::Misaligned(format!("{} uses different seeds", dir.display())));
        }
        if cand.runs.len() != base.runs.len() {
            return Err(Error::Misaligned(format!(
                "{} has {} runs, baseline has {}",
                dir.display(),
                cand.runs.len(),
                base.runs.len()
            )));
        }
        let name = cfg.variant.as_str();
        let tag = dir.file_name().map_or_else(|| name.to_string(), |s| s.to_string_lossy().into_owned());
        for m in Metric::ALL {
            let a = cand.metric_series(m);
            let b = base.metric_series(m);
            let mut buf = Vec::new();
            eval::write_gain_csv(m, base_cfg.variant.as_str(), name, &a, &b, &mut buf)?;
            let path = out_dir.join(format!("gain_{tag}_{}.csv", m.as_str()));
            write_atomic(&path, &buf)?;
            out.files.push(path);
            out.gains.insert((tag.clone(), m), eval::relative_gain(&a, &b)?);
        }
        let table = exposure_gains(&scenario, &cand, &base);
        if !table.is_empty() {
            let path = out_dir.join(format!("exposure_{tag}.csv"));
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["role", "title_id", "run_index", "avg_rank_gain", "top1_sov_gain"])?;
            for g in &table {
                w.write_record([
                    g.role.clone(),
                    g.title_id.clone(),
                    g.run_index.to_string(),
                    g.avg_rank_gain.map(|v| v.to_string()).unwrap_or_default(),
                    g.top1_sov_gain.map(|v| v.to_string()).unwrap_or_default(),
                ])?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            write_atomic(&path, &bytes)?;
            out.files.push(path);
        }
        out.exposure.insert(tag, table);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_flags_match_ablations() {
        let f = Variant::Baseline.flags();
        assert!(!f.augmentation && !f.temporal_signals && !f.regularization);
        let f = Variant::BaselineWithReg.flags();
        assert!(!f.augmentation && !f.temporal_signals && f.regularization);
        let f = Variant::Proposed.flags();
        assert!(f.augmentation && f.beta_stage && f.temporal_signals && f.regularization);
        let f = Variant::ProposedNoReg.flags();
        assert!(f.augmentation && f.beta_stage && f.temporal_signals && !f.regularization);
        let f = Variant::ProposedNoBeta.flags();
        assert!(f.augmentation && !f.beta_stage && f.temporal_signals && f.regularization);
    }

    #[test]
    fn weight_delta_average() {
        let w = vec![vec![0.0, 0.0, 5.0], vec![1.0, -1.0, 0.0], vec![1.0, 1.0, 0.0]];
        let d = mean_abs_weight_delta(&w, &[true, true, false]).unwrap();
        assert!((d - (1.0 + 1.0) / 2.0).abs() < 1e-12);
        assert!(mean_abs_weight_delta(&w[..1], &[true, true, false]).is_none());
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = ExperimentConfig::default();
        let s = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cfg);
        cfg.validate().unwrap();
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = ExperimentConfig { n_runs: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg.n_runs = 1;
        cfg.alpha = 1.5;
        assert!(cfg.validate().is_err());
        cfg.alpha = 0.15;
        cfg.q = 0;
        assert!(cfg.validate().is_err());
    }
}
