//! Offline metrics: ROC-AUC, PR-AUC, share-of-voice alignment nDCG,
//! exposure statistics, and relative gains between model configurations.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::Write;

use crate::{Error, Result};

fn check_lengths(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    Ok(())
}

/// Indices sorted by descending score (stable).
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    idx
}

/// Mann-Whitney AUC: probability that a random positive outscores a random
/// negative, ties counting one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("roc_auc needs both classes"));
    }
    let order = descending(scores);
    // Walk tie groups from the top; every negative in a group beats
    // nothing above it, ties count half.
    let mut wins = 0.0;
    let mut pos_above = 0usize;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut p, mut n) = (0usize, 0usize);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] {
                p += 1;
            } else {
                n += 1;
            }
            j += 1;
        }
        wins += n as f64 * (pos_above as f64 + 0.5 * p as f64);
        pos_above += p;
        i = j;
    }
    Ok(wins / (n_pos as f64 * n_neg as f64))
}

/// Step-wise area under the precision-recall curve (average precision),
/// treating each distinct score as one threshold.
pub fn pr_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 {
        return Err(Error::UndefinedMetric("pr_auc needs a positive"));
    }
    let order = descending(scores);
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            tp += usize::from(labels[order[j]]);
            seen += 1;
            j += 1;
        }
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / seen as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    Ok(area)
}

/// Fraction of users whose ranking starts with each title. Every title
/// appearing in any ranking gets an entry.
pub fn top1_sov(rankings: &[Vec<String>]) -> BTreeMap<String, f64> {
    let mut sov: BTreeMap<String, f64> = BTreeMap::new();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in rankings {
        for t in r {
            sov.entry(t.clone()).or_insert(0.0);
        }
        if let Some(top) = r.first() {
            *counts.entry(top.as_str()).or_default() += 1;
        }
    }
    let users = rankings.iter().filter(|r| !r.is_empty()).count();
    for (t, c) in counts {
        sov.insert(t.to_string(), c as f64 / users as f64);
    }
    sov
}

/// Mean 1-based position of `title` across rankings.
pub fn avg_rank(rankings: &[Vec<String>], title: &str) -> Result<f64> {
    if rankings.is_empty() {
        return Err(Error::MissingFromRanking(title.to_string()));
    }
    let mut total = 0usize;
    for r in rankings {
        let pos = r
            .iter()
            .position(|t| t == title)
            .ok_or_else(|| Error::MissingFromRanking(title.to_string()))?;
        total += pos + 1;
    }
    Ok(total as f64 / rankings.len() as f64)
}

fn dcg(relevance_in_order: impl Iterator<Item = f64>) -> f64 {
    relevance_in_order
        .enumerate()
        .map(|(i, r)| r / ((i + 2) as f64).log2())
        .sum()
}

/// nDCG of the title order induced by predicted share of voice, graded by
/// `relevance`. Ties in predicted SOV are broken by title id.
pub fn ndcg_sov_alignment(
    pred_sov: &BTreeMap<String, f64>,
    relevance: &BTreeMap<String, f64>,
) -> Result<f64> {
    if pred_sov.len() != relevance.len() || pred_sov.keys().any(|k| !relevance.contains_key(k)) {
        return Err(Error::Misaligned("pred_sov and relevance title sets differ".into()));
    }
    if relevance.values().any(|r| *r < 0.0 || !r.is_finite()) {
        return Err(Error::InvalidConfig("relevance must be finite and non-negative".into()));
    }
    let mut order: Vec<(&String, f64)> = pred_sov.iter().map(|(t, s)| (t, *s)).collect();
    // BTreeMap iteration already yields ascending ids; stable sort keeps them.
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal));
    let mut ideal: Vec<f64> = relevance.values().copied().collect();
    ideal.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let idcg = dcg(ideal.into_iter());
    if idcg <= 0.0 {
        return Err(Error::UndefinedMetric("ndcg with all-zero relevance"));
    }
    Ok(dcg(order.iter().map(|(t, _)| relevance[*t])) / idcg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainPoint {
    pub run_index: u32,
    /// `None` where the baseline value is not positive (or either side is undefined).
    pub gain: Option<f64>,
}

/// Per-run `(a - b) / b` over runs aligned by index.
pub fn relative_gain(a: &[(u32, Option<f64>)], b: &[(u32, Option<f64>)]) -> Result<Vec<GainPoint>> {
    if a.len() != b.len() {
        return Err(Error::Misaligned(format!("{} runs vs {} runs", a.len(), b.len())));
    }
    a.iter()
        .zip(b)
        .map(|(&(ra, va), &(rb, vb))| {
            if ra != rb {
                return Err(Error::Misaligned(format!("run {ra} paired with run {rb}")));
            }
            let gain = match (va, vb) {
                (Some(x), Some(y)) if y > 0.0 => Some((x - y) / y),
                _ => None,
            };
            Ok(GainPoint { run_index: ra, gain })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    RocAuc,
    PrAuc,
    NdcgConversion,
    NdcgPositiveRewards,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::RocAuc,
        Metric::PrAuc,
        Metric::NdcgConversion,
        Metric::NdcgPositiveRewards,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::RocAuc => "roc_auc",
            Metric::PrAuc => "pr_auc",
            Metric::NdcgConversion => "ndcg_conversion",
            Metric::NdcgPositiveRewards => "ndcg_positive_rewards",
        }
    }

    pub fn parse(s: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TitleExposure {
    pub top1_sov: f64,
    pub avg_rank: f64,
}

/// Metrics of one incremental run of one model configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_index: u32,
    pub config_id: String,
    pub roc_auc: Option<f64>,
    pub pr_auc: Option<f64>,
    pub ndcg_conversion: Option<f64>,
    pub ndcg_positive_rewards: Option<f64>,
    pub per_title: BTreeMap<String, TitleExposure>,
}

impl RunReport {
    pub fn metric(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::RocAuc => self.roc_auc,
            Metric::PrAuc => self.pr_auc,
            Metric::NdcgConversion => self.ndcg_conversion,
            Metric::NdcgPositiveRewards => self.ndcg_positive_rewards,
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::InvalidConfig(format!("bad metric value `{s}`")))
}

/// `run_index,config,metric,value` rows; undefined values are empty.
pub fn write_metrics_csv<W: Write>(reports: &[RunReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["run_index", "config", "metric", "value"])?;
    for r in reports {
        for m in Metric::ALL {
            w.write_record([
                r.run_index.to_string(),
                r.config_id.clone(),
                m.as_str().to_string(),
                fmt_opt(r.metric(m)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `run_index,config,title_id,top1_sov,avg_rank` rows.
pub fn write_exposure_csv<W: Write>(reports: &[RunReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["run_index", "config", "title_id", "top1_sov", "avg_rank"])?;
    for r in reports {
        for (t, e) in &r.per_title {
            w.write_record([
                r.run_index.to_string(),
                r.config_id.clone(),
                t.clone(),
                e.top1_sov.to_string(),
                e.avg_rank.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `metric,run_index,baseline,candidate,value_baseline,value_candidate,gain` rows.
pub fn write_gain_csv<W: Write>(
    metric: Metric,
    baseline: &str,
    candidate: &str,
    a: &[(u32, Option<f64>)],
    b: &[(u32, Option<f64>)],
    writer: W,
) -> Result<()> {
    let gains = relative_gain(a, b)?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "metric",
        "run_index",
        "baseline",
        "candidate",
        "value_baseline",
        "value_candidate",
        "gain",
    ])?;
    for ((g, (_, va)), (_, vb)) in gains.iter().zip(a).zip(b) {
        w.write_record([
            metric.as_str().to_string(),
            g.run_index.to_string(),
            baseline.to_string(),
            candidate.to_string(),
            fmt_opt(*vb),
            fmt_opt(*va),
            fmt_opt(g.gain),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back [`write_metrics_csv`] and [`write_exposure_csv`] output.
pub fn read_reports(metrics_csv: &str, exposure_csv: &str) -> Result<Vec<RunReport>> {
    let mut reports: BTreeMap<u32, RunReport> = BTreeMap::new();
    let mut rdr = csv::Reader::from_reader(metrics_csv.as_bytes());
    for rec in rdr.records() {
        let rec = rec?;
        let run: u32 = rec[0]
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad run index `{}`", &rec[0])))?;
        let r = reports.entry(run).or_insert_with(|| RunReport {
            run_index: run,
            config_id: rec[1].to_string(),
            roc_auc: None,
            pr_auc: None,
            ndcg_conversion: None,
            ndcg_positive_rewards: None,
            per_title: BTreeMap::new(),
        });
        let v = parse_opt(&rec[3])?;
        match Metric::parse(&rec[2]) {
            Some(Metric::RocAuc) => r.roc_auc = v,
            Some(Metric::PrAuc) => r.pr_auc = v,
            Some(Metric::NdcgConversion) => r.ndcg_conversion = v,
            Some(Metric::NdcgPositiveRewards) => r.ndcg_positive_rewards = v,
            None => return Err(Error::InvalidConfig(format!("unknown metric `{}`", &rec[2]))),
        }
    }
    let mut rdr = csv::Reader::from_reader(exposure_csv.as_bytes());
    for rec in rdr.records() {
        let rec = rec?;
        let run: u32 = rec[0]
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad run index `{}`", &rec[0])))?;
        let r = reports
            .get_mut(&run)
            .ok_or_else(|| Error::Misaligned(format!("exposure row for unknown run {run}")))?;
        let num = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::InvalidConfig(format!("bad number `{s}`")))
        };
        r.per_title.insert(
            rec[2].to_string(),
            TitleExposure {
                top1_sov: num(&rec[3])?,
                avg_rank: num(&rec[4])?,
            },
        );
    }
    Ok(reports.into_values().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn map(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn roc_examples() {
        assert_eq!(roc_auc(&[0.9, 0.1], &[true, false]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.3; 6], &[true, false, true, false, false, true]).unwrap(), 0.5);
        assert_eq!(
            roc_auc(&[0.8, 0.6, 0.4, 0.2], &[true, false, true, false]).unwrap(),
            0.75
        );
        assert!(matches!(roc_auc(&[0.1, 0.2], &[true, true]), Err(Error::UndefinedMetric(_))));
        assert!(roc_auc(&[0.1], &[true, false]).is_err());
    }

    #[test]
    fn pr_examples() {
        assert_eq!(pr_auc(&[0.9, 0.8, 0.1], &[true, true, false]).unwrap(), 1.0);
        assert_eq!(pr_auc(&[0.2, 0.5, 0.1], &[true, true, true]).unwrap(), 1.0);
        let v = pr_auc(&[0.8, 0.6, 0.4, 0.2], &[true, false, true, false]).unwrap();
        assert!((v - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-12);
        assert!(pr_auc(&[0.1], &[false]).is_err());
    }

    #[test]
    fn sov_examples() {
        let r = vec![ids(&["A", "B"]), ids(&["A", "B"])];
        assert_eq!(top1_sov(&r), map(&[("A", 1.0), ("B", 0.0)]));
        let r = vec![
            ids(&["A", "B", "C"]),
            ids(&["B", "A", "C"]),
            ids(&["C", "A", "B"]),
            ids(&["B", "C", "A"]),
        ];
        let s = top1_sov(&r);
        assert_eq!(s["A"], 0.25);
        assert_eq!(s.values().sum::<f64>(), 1.0);
    }

    #[test]
    fn avg_rank_examples() {
        let r = vec![ids(&["A", "B", "C"]), ids(&["B", "C", "A"])];
        assert_eq!(avg_rank(&r, "A").unwrap(), 2.0);
        let r = vec![ids(&["A", "B"]), ids(&["A", "B"])];
        assert_eq!(avg_rank(&r, "A").unwrap(), 1.0);
        assert!(avg_rank(&[ids(&["A"])], "B").is_err());
    }

    #[test]
    fn ndcg_examples() {
        let rel = map(&[("a", 3.0), ("b", 2.0), ("c", 1.0)]);
        assert_eq!(ndcg_sov_alignment(&map(&[("a", 0.6), ("b", 0.3), ("c", 0.1)]), &rel).unwrap(), 1.0);
        assert_eq!(ndcg_sov_alignment(&map(&[("a", 1.0)]), &map(&[("a", 0.2)])).unwrap(), 1.0);
        let v = ndcg_sov_alignment(&map(&[("a", 0.1), ("b", 0.3), ("c", 0.6)]), &rel).unwrap();
        let l3 = 3f64.log2();
        let expected = (1.0 + 2.0 / l3 + 3.0 / 2.0) / (3.0 + 2.0 / l3 + 0.5);
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 0.790).abs() < 5e-4);
        assert!(ndcg_sov_alignment(&map(&[("a", 1.0)]), &map(&[("a", 0.0)])).is_err());
        assert!(ndcg_sov_alignment(&map(&[("a", 1.0)]), &map(&[("b", 1.0)])).is_err());
    }

    #[test]
    fn ndcg_sov_ties_break_by_id() {
        let rel = map(&[("a", 1.0), ("b", 5.0)]);
        let v = ndcg_sov_alignment(&map(&[("a", 0.5), ("b", 0.5)]), &rel).unwrap();
        assert!(v < 1.0);
    }

    #[test]
    fn gain_examples() {
        let g = relative_gain(&[(0, Some(0.5))], &[(0, Some(0.5))]).unwrap();
        assert_eq!(g[0].gain, Some(0.0));
        let g = relative_gain(&[(0, Some(0.559))], &[(0, Some(0.5))]).unwrap();
        assert!((g[0].gain.unwrap() - 0.118).abs() < 1e-12);
        let g = relative_gain(&[(0, Some(0.3))], &[(0, Some(0.0))]).unwrap();
        assert_eq!(g[0].gain, None);
        assert!(relative_gain(&[(0, Some(0.3))], &[(1, Some(0.3))]).is_err());
        assert!(relative_gain(&[(0, Some(0.3))], &[]).is_err());
    }

    #[test]
    fn report_csv_round_trip() {
        let mut per_title = BTreeMap::new();
        per_title.insert("A".to_string(), TitleExposure { top1_sov: 0.75, avg_rank: 1.25 });
        per_title.insert("B".to_string(), TitleExposure { top1_sov: 0.25, avg_rank: 1.75 });
        let reports = vec![RunReport {
            run_index: 0,
            config_id: "proposed".into(),
            roc_auc: Some(0.61),
            pr_auc: Some(0.3),
            ndcg_conversion: None,
            ndcg_positive_rewards: Some(0.9),
            per_title,
        }];
        let mut m = Vec::new();
        let mut e = Vec::new();
        write_metrics_csv(&reports, &mut m).unwrap();
        write_exposure_csv(&reports, &mut e).unwrap();
        let back = read_reports(
            std::str::from_utf8(&m).unwrap(),
            std::str::from_utf8(&e).unwrap(),
        )
        .unwrap();
        assert_eq!(back, reports);
    }
}
