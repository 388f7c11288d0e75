use proptest::prelude::*;

use promo_bandit::augment::TrainingExample;
use promo_bandit::bandit::{smooth_reference, EncodedBatch, ModelState, SmoothingConfig, TrainConfig};
use promo_bandit::features::{FeatureRow, FeatureSchema, RecencyBinning};

const TITLES: [&str; 3] = ["a", "b", "c"];

fn schema() -> FeatureSchema {
    FeatureSchema {
        marketing_classes: vec!["standard".into(), "premium".into()],
        content_categories: vec!["drama".into(), "comedy".into()],
        binning: RecencyBinning::default(),
        temporal_signals: true,
        high_priority_class: None,
        nds_scale: 1.0,
    }
}

fn example(title: usize, bin: usize, nds: f64, reward: bool) -> TrainingExample {
    TrainingExample::organic(
        FeatureRow {
            title_id: TITLES[title].into(),
            marketing_class: if title == 0 { "premium" } else { "standard" }.into(),
            content_category: if title == 2 { "comedy" } else { "drama" }.into(),
            recency_bin: bin,
            nds: [nds, nds * 0.5, 1.0 - nds],
        },
        reward,
    )
}

fn model_with_history(history: &[Vec<f64>]) -> ModelState {
    let mut m = ModelState::new(schema(), 1.0, 5).unwrap();
    for t in TITLES {
        m.provision_arm(t).unwrap();
    }
    for (k, w) in history.iter().enumerate() {
        m.history.push(k as u32, w.clone()).unwrap();
    }
    m.weights = history.last().unwrap().clone();
    m
}

fn pull_distance(m: &ModelState, batch: &EncodedBatch, lambda: f64) -> f64 {
    let cfg = TrainConfig {
        epochs: 600,
        learning_rate: 0.005,
        ..TrainConfig::default()
    };
    let smoothing = SmoothingConfig {
        lambda,
        ..SmoothingConfig::default()
    };
    let (next, _) = m.train_incremental(m.history.len() as u32, batch, &cfg, &smoothing).unwrap();
    let reference = smooth_reference(m.history.weights(), smoothing.q).unwrap();
    let mask = m.schema.mask(&smoothing.groups);
    next.weights
        .iter()
        .zip(&reference)
        .zip(&mask)
        .filter(|(_, &on)| on)
        .map(|((w, r), _)| (w - r).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn rows() -> impl Strategy<Value = Vec<(usize, usize, f64, bool)>> {
    prop::collection::vec((0..3usize, 0..4usize, 0.0..1.0f64, any::<bool>()), 10..40)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn larger_lambda_never_moves_further_from_reference(
        data in rows(),
        history in prop::collection::vec(prop::collection::vec(-0.5..0.5f64, 12), 1..4),
        lambdas in (0.0..0.5f64, 0.0..0.5f64),
    ) {
        let examples: Vec<_> = data.iter().map(|&(t, b, n, r)| example(t, b, n, r)).collect();
        let m = model_with_history(&history);
        prop_assert_eq!(m.dim(), 12);
        let batch = EncodedBatch::encode(&m.schema, &examples).unwrap();
        let (lo, hi) = if lambdas.0 <= lambdas.1 { lambdas } else { (lambdas.1, lambdas.0) };
        let d_lo = pull_distance(&m, &batch, lo);
        let d_hi = pull_distance(&m, &batch, hi);
        // Adam hovers within a few step sizes of the optimum.
        prop_assert!(d_hi <= d_lo + 0.02, "lambda {lo} -> {d_lo}, lambda {hi} -> {d_hi}");
    }
}
