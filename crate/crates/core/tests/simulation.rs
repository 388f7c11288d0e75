use std::collections::BTreeMap;

use promo_bandit::catalog::Catalog;
use promo_bandit::eval::avg_rank;
use promo_bandit::simulator::{examination, generate_window, SimScenario, UniformPolicy};

fn uniform_window(users: usize) -> (SimScenario, promo_bandit::simulator::WindowLogs) {
    let mut s = SimScenario::stationary(5);
    s.users_per_window = users;
    s.eval_users_per_window = 10;
    let clock = s.clock(0).unwrap();
    let (lo, _) = clock.window();
    let catalog = s.catalog_at(lo, &Catalog::new(lo)).unwrap();
    let policy = UniformPolicy {
        n_arms: catalog.len_active(),
    };
    let logs = generate_window(&s, &clock, &catalog, &policy, 17).unwrap();
    (s, logs)
}

#[test]
fn stationary_streams_match_binomial_expectation() {
    let (s, logs) = uniform_window(4000);
    let drift = s.drift(0);
    // Per title: observed streams, expected streams, and binomial variance.
    let mut tally: BTreeMap<&str, (f64, f64, f64)> = BTreeMap::new();
    for row in &logs.train.rows {
        let p = s.conversion(&row.title_id, row.timestamp, drift[&row.title_id]).unwrap()
            * examination(row.rank as usize);
        let t = tally.entry(row.title_id.as_str()).or_default();
        t.0 += f64::from(u8::from(row.streamed));
        t.1 += p;
        t.2 += p * (1.0 - p);
    }
    assert_eq!(tally.len(), 50);
    let z: Vec<f64> = tally.values().map(|(o, e, v)| (o - e) / v.sqrt()).collect();
    let (o, e, v) = tally
        .values()
        .fold((0.0, 0.0, 0.0), |acc, t| (acc.0 + t.0, acc.1 + t.1, acc.2 + t.2));
    let pooled = (o - e) / v.sqrt();
    assert!(pooled.abs() <= 3.0, "{o} streams in total, expected {e:.1} (z = {pooled:.2})");
    // Per title, 3 SE Bonferroni-adjusted over 50 titles is about 4 SE.
    for ((id, _), z) in tally.iter().zip(&z) {
        assert!(z.abs() <= 4.0, "{id}: z = {z:.2}");
    }
    // Chi-square with 50 degrees of freedom: mean 50, sd 10.
    let chi2: f64 = z.iter().map(|z| z * z).sum();
    assert!(chi2 <= 80.0, "chi-square {chi2:.1}");
}

#[test]
fn uniform_policy_average_rank_is_centred() {
    let (s, logs) = uniform_window(4000);
    let rankings: Vec<Vec<String>> = logs
        .train
        .requests()
        .map(|req| {
            let mut r: Vec<_> = req.iter().collect();
            r.sort_by_key(|row| row.rank);
            r.into_iter().map(|row| row.title_id.clone()).collect()
        })
        .collect();
    assert_eq!(rankings.len(), 4000);
    let n = s.titles.len() as f64;
    // Rank of a fixed title under a uniform shuffle has sd sqrt((n^2 - 1) / 12).
    let se = ((n * n - 1.0) / 12.0 / rankings.len() as f64).sqrt();
    for t in &s.titles {
        let r = avg_rank(&rankings, &t.title_id).unwrap();
        assert!((r - (n + 1.0) / 2.0).abs() <= 4.0 * se, "{}: average rank {r}", t.title_id);
    }
}

#[test]
fn train_and_eval_users_are_disjoint() {
    let (_, logs) = uniform_window(200);
    let train: std::collections::BTreeSet<u64> = logs.train.rows.iter().map(|r| r.request_id).collect();
    assert!(logs.eval.rows.iter().all(|r| !train.contains(&r.request_id)));
    assert_eq!(logs.eval.requests().count(), 10);
}
