//! Brute-force oracles and invariants for the ranking metrics.
//!
//! The fast implementations must agree with O(n^2) pairwise / cut-enumeration
//! references to 1e-12 on hundreds of random tie-heavy instances.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tokenbag::metrics::{
    bootstrap_ci, pr_auc, roc_auc, MetricKind, MetricsError, ScoredSet,
};

/// Mean over all positive-negative pairs of [1 | 0.5 | 0].
fn roc_auc_pairwise(scores: &[f64], labels: &[bool]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0u64;
    for (i, &yi) in labels.iter().enumerate() {
        if !yi {
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj {
                continue;
            }
            pairs += 1;
            total += if scores[i] > scores[j] {
                1.0
            } else if scores[i] == scores[j] {
                0.5
            } else {
                0.0
            };
        }
    }
    total / pairs as f64
}

/// Average precision by enumerating distinct score cuts; every member of a
/// tie group enters the ranking together.
fn pr_auc_cut_enumeration(scores: &[f64], labels: &[bool]) -> f64 {
    let n_pos = labels.iter().filter(|&&y| y).count();
    let mut cuts: Vec<f64> = scores.to_vec();
    cuts.sort_by(|a, b| b.total_cmp(a));
    cuts.dedup();
    let mut ap = 0.0;
    for &cut in &cuts {
        let predicted = scores.iter().filter(|&&s| s >= cut).count();
        let tp = scores
            .iter()
            .zip(labels)
            .filter(|(&s, &y)| s >= cut && y)
            .count();
        let entering = scores
            .iter()
            .zip(labels)
            .filter(|(&s, &y)| s == cut && y)
            .count();
        ap += entering as f64 * tp as f64 / predicted as f64;
    }
    ap / n_pos as f64
}

fn random_instance(rng: &mut ChaCha8Rng) -> ScoredSet {
    let n = rng.gen_range(2..=500usize);
    // draw from a coarse grid about half the time so ties are plentiful
    let gridded = rng.gen::<bool>();
    let mut scores = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let s = if gridded {
            rng.gen_range(0..=20) as f64 / 20.0
        } else {
            rng.gen::<f64>()
        };
        scores.push(s);
        labels.push(rng.gen::<f64>() < 0.4);
    }
    // force both classes
    labels[0] = true;
    let last = labels.len() - 1;
    labels[last] = false;
    ScoredSet::new(scores, labels, (1..=n as i64).collect()).unwrap()
}

#[test]
fn roc_and_pr_match_brute_force_on_500_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst_roc = 0.0f64;
    let mut worst_pr = 0.0f64;
    for i in 0..500 {
        let s = random_instance(&mut rng);
        let fast_roc = roc_auc(&s).unwrap();
        let oracle_roc = roc_auc_pairwise(&s.scores, &s.labels);
        let fast_pr = pr_auc(&s).unwrap();
        let oracle_pr = pr_auc_cut_enumeration(&s.scores, &s.labels);
        assert!(
            (fast_roc - oracle_roc).abs() < 1e-12,
            "instance {i}: roc {fast_roc} vs oracle {oracle_roc}"
        );
        assert!(
            (fast_pr - oracle_pr).abs() < 1e-12,
            "instance {i}: pr {fast_pr} vs oracle {oracle_pr}"
        );
        worst_roc = worst_roc.max((fast_roc - oracle_roc).abs());
        worst_pr = worst_pr.max((fast_pr - oracle_pr).abs());
    }
    println!("metric oracles: worst |roc diff| {worst_roc:.2e}, worst |pr diff| {worst_pr:.2e}");
}

#[test]
fn bootstrap_width_shrinks_with_sample_size() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut widths_small = Vec::new();
    let mut widths_large = Vec::new();
    for fixture in 0..50u64 {
        for (n, widths) in [(200usize, &mut widths_small), (2000usize, &mut widths_large)] {
            let mut scores = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                let y = rng.gen::<f64>() < 0.3;
                let s: f64 = if y {
                    0.5 + 0.5 * rng.gen::<f64>()
                } else {
                    0.7 * rng.gen::<f64>()
                };
                scores.push(s.clamp(0.0, 1.0));
                labels.push(y);
            }
            labels[0] = true;
            labels[1] = false;
            let set = ScoredSet::new(scores, labels, (1..=n as i64).collect()).unwrap();
            let ci = bootstrap_ci(&set, MetricKind::RocAuc, 400, 0.95, 1000 + fixture).unwrap();
            widths.push(ci.hi - ci.lo);
        }
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(|a, b| a.total_cmp(b));
        v[v.len() / 2]
    };
    let small = median(&mut widths_small);
    let large = median(&mut widths_large);
    assert!(
        large < small,
        "median CI width should shrink: n=200 -> {small:.4}, n=2000 -> {large:.4}"
    );
}

#[test]
fn single_class_inputs_are_rejected() {
    let all_pos = ScoredSet::new(vec![0.2, 0.8], vec![true, true], vec![1, 2]).unwrap();
    assert!(matches!(
        roc_auc(&all_pos),
        Err(MetricsError::DegenerateLabels(_))
    ));
    let all_neg = ScoredSet::new(vec![0.2, 0.8], vec![false, false], vec![1, 2]).unwrap();
    assert!(matches!(
        pr_auc(&all_neg),
        Err(MetricsError::DegenerateLabels(_))
    ));
    // PR-AUC only needs a positive
    assert!(pr_auc(&all_pos).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// AUC-ROC only depends on the ranking, so any strictly monotone
    /// transform of the scores leaves it unchanged.
    #[test]
    fn roc_auc_is_rank_invariant(
        raw in prop::collection::vec((0u8..=100, any::<bool>()), 2..120)
    ) {
        let mut scores: Vec<f64> = raw.iter().map(|(s, _)| *s as f64 / 100.0).collect();
        let mut labels: Vec<bool> = raw.iter().map(|(_, y)| *y).collect();
        labels[0] = true;
        scores[0] = scores[0].max(0.01);
        let last = labels.len() - 1;
        labels[last] = false;
        let ids: Vec<i64> = (1..=scores.len() as i64).collect();
        let base = ScoredSet::new(scores.clone(), labels.clone(), ids.clone()).unwrap();
        // strictly monotone map into (0, 1)
        let transformed: Vec<f64> = scores.iter().map(|s| (s + 1.0) / 3.0).collect();
        let mapped = ScoredSet::new(transformed, labels, ids).unwrap();
        let a = roc_auc(&base).unwrap();
        let b = roc_auc(&mapped).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    /// Flipping labels and reflecting scores leaves AUC-ROC unchanged.
    #[test]
    fn roc_auc_complement_symmetry(
        raw in prop::collection::vec((0u8..=50, any::<bool>()), 2..120)
    ) {
        let scores: Vec<f64> = raw.iter().map(|(s, _)| *s as f64 / 50.0).collect();
        let mut labels: Vec<bool> = raw.iter().map(|(_, y)| *y).collect();
        labels[0] = true;
        let last = labels.len() - 1;
        labels[last] = false;
        let ids: Vec<i64> = (1..=scores.len() as i64).collect();
        let base = ScoredSet::new(scores.clone(), labels.clone(), ids.clone()).unwrap();
        let flipped = ScoredSet::new(
            scores.iter().map(|s| 1.0 - s).collect(),
            labels.iter().map(|y| !y).collect(),
            ids,
        )
        .unwrap();
        let a = roc_auc(&base).unwrap();
        let b = roc_auc(&flipped).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    /// The point estimate lies inside its own percentile bootstrap interval.
    #[test]
    fn bootstrap_interval_brackets_the_point_estimate(seed in 0u64..100) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(30..150usize);
        let mut scores = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let y = rng.gen::<f64>() < 0.4;
            let s: f64 = if y { rng.gen_range(0.3..1.0) } else { rng.gen_range(0.0..0.7) };
            scores.push(s);
            labels.push(y);
        }
        labels[0] = true;
        labels[1] = false;
        let set = ScoredSet::new(scores, labels, (1..=n as i64).collect()).unwrap();
        let point = roc_auc(&set).unwrap();
        let ci = bootstrap_ci(&set, MetricKind::RocAuc, 500, 0.95, seed).unwrap();
        prop_assert!(ci.lo <= point + 1e-12 && point <= ci.hi + 1e-12,
            "point {} outside [{}, {}]", point, ci.lo, ci.hi);
    }
}
