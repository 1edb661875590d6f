//! Discrimination, calibration and model-comparison statistics.
//!
//! AUC-ROC follows the Mann-Whitney convention (ties credit 0.5), PR-AUC is
//! step-wise average precision with tie groups entering together, intervals
//! are percentile bootstrap, and two models on one test set are compared
//! with a paired per-admission swap permutation test.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::Outcome;
use crate::nncore::{Model, NnError};
use crate::tokenizer::AdmissionDocument;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("scores, labels and admission ids must have equal non-zero lengths")]
    ShapeMismatch,
    #[error("score {0} is not a finite probability in [0, 1]")]
    InvalidScore(f64),
    #[error("{0} needs both a positive and a negative example")]
    DegenerateLabels(&'static str),
    #[error("paired sets must share admission ids and labels")]
    UnpairedSets,
    #[error("calibration needs at least 2 bins")]
    InvalidBins,
    #[error("bootstrap kept drawing single-class resamples")]
    DegenerateResampling,
    #[error("document {0} is missing the model's outcome label")]
    MissingLabel(i64),
    #[error("compared models predict different outcomes")]
    OutcomeMismatch,
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Scores and labels for one model over one document set.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
    pub admission_ids: Vec<i64>,
}

impl ScoredSet {
    pub fn new(
        scores: Vec<f64>,
        labels: Vec<bool>,
        admission_ids: Vec<i64>,
    ) -> Result<Self, MetricsError> {
        if scores.is_empty() || scores.len() != labels.len() || scores.len() != admission_ids.len()
        {
            return Err(MetricsError::ShapeMismatch);
        }
        if let Some(&bad) = scores.iter().find(|s| !s.is_finite() || !(0.0..=1.0).contains(*s)) {
            return Err(MetricsError::InvalidScore(bad));
        }
        Ok(ScoredSet {
            scores,
            labels,
            admission_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn n_positive(&self) -> usize {
        self.labels.iter().filter(|&&y| y).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MetricKind {
    RocAuc,
    PrAuc,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::RocAuc => "auc_roc",
            MetricKind::PrAuc => "pr_auc",
        }
    }

    pub fn compute(self, scores: &[f64], labels: &[bool]) -> Result<f64, MetricsError> {
        match self {
            MetricKind::RocAuc => roc_auc_slices(scores, labels),
            MetricKind::PrAuc => pr_auc_slices(scores, labels),
        }
    }
}

// ---------------------------------------------------------------------------
// Point metrics
// ---------------------------------------------------------------------------

/// Mann-Whitney AUC via average ranks: equals the mean over all
/// positive-negative pairs of [1 if pos > neg, 0.5 if tied, 0 otherwise].
pub fn roc_auc(s: &ScoredSet) -> Result<f64, MetricsError> {
    roc_auc_slices(&s.scores, &s.labels)
}

fn roc_auc_slices(scores: &[f64], labels: &[bool]) -> Result<f64, MetricsError> {
    let n = scores.len();
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::DegenerateLabels("AUC-ROC"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // average ranks over tie groups, 1-based
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            if labels[k] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Average precision with tie groups entering the ranking together.
pub fn pr_auc(s: &ScoredSet) -> Result<f64, MetricsError> {
    pr_auc_slices(&s.scores, &s.labels)
}

fn pr_auc_slices(scores: &[f64], labels: &[bool]) -> Result<f64, MetricsError> {
    let n_pos = labels.iter().filter(|&&y| y).count();
    if n_pos == 0 {
        return Err(MetricsError::DegenerateLabels("PR-AUC"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut ap = 0.0;
    let mut cum_tp = 0usize;
    let mut cum_n = 0usize;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let group_pos = order[i..=j].iter().filter(|&&k| labels[k]).count();
        cum_tp += group_pos;
        cum_n += j - i + 1;
        ap += group_pos as f64 * (cum_tp as f64 / cum_n as f64);
        i = j + 1;
    }
    Ok(ap / n_pos as f64)
}

/// Precision, recall and F1 when predicting positive at `score >= threshold`.
/// Undefined ratios fall back to 0 by convention.
pub fn threshold_metrics(s: &ScoredSet, threshold: f64) -> (f64, f64, f64) {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&score, &y) in s.scores.iter().zip(&s.labels) {
        let predicted = score >= threshold;
        match (predicted, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationPoint {
    pub mean_predicted: f64,
    pub observed_rate: f64,
    pub count: usize,
}

/// Equal-width reliability curve over [0, 1]; empty bins are omitted.
pub fn calibration_curve(
    s: &ScoredSet,
    n_bins: usize,
) -> Result<Vec<CalibrationPoint>, MetricsError> {
    if n_bins < 2 {
        return Err(MetricsError::InvalidBins);
    }
    let mut sums = vec![0.0; n_bins];
    let mut pos = vec![0usize; n_bins];
    let mut counts = vec![0usize; n_bins];
    for (&score, &y) in s.scores.iter().zip(&s.labels) {
        let bin = ((score * n_bins as f64) as usize).min(n_bins - 1);
        sums[bin] += score;
        counts[bin] += 1;
        if y {
            pos[bin] += 1;
        }
    }
    Ok((0..n_bins)
        .filter(|&b| counts[b] > 0)
        .map(|b| CalibrationPoint {
            mean_predicted: sums[b] / counts[b] as f64,
            observed_rate: pos[b] as f64 / counts[b] as f64,
            count: counts[b],
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Curves
// ---------------------------------------------------------------------------

/// ROC staircase points (fpr, tpr) from (0,0) to (1,1), tie groups merged.
pub fn roc_points(s: &ScoredSet) -> Result<Vec<(f64, f64)>, MetricsError> {
    let n_pos = s.n_positive();
    let n_neg = s.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::DegenerateLabels("ROC curve"));
    }
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s.scores[b].total_cmp(&s.scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && s.scores[order[j + 1]] == s.scores[order[i]] {
            j += 1;
        }
        for &k in &order[i..=j] {
            if s.labels[k] {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
        i = j + 1;
    }
    Ok(points)
}

/// Precision-recall points (recall, precision) at each tie-group cut.
pub fn pr_points(s: &ScoredSet) -> Result<Vec<(f64, f64)>, MetricsError> {
    let n_pos = s.n_positive();
    if n_pos == 0 {
        return Err(MetricsError::DegenerateLabels("PR curve"));
    }
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s.scores[b].total_cmp(&s.scores[a]));
    let mut points = Vec::new();
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && s.scores[order[j + 1]] == s.scores[order[i]] {
            j += 1;
        }
        for &k in &order[i..=j] {
            if s.labels[k] {
                tp += 1;
            }
        }
        seen += j - i + 1;
        points.push((tp as f64 / n_pos as f64, tp as f64 / seen as f64));
        i = j + 1;
    }
    Ok(points)
}

// ---------------------------------------------------------------------------
// Bootstrap
// ---------------------------------------------------------------------------

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Linear-interpolation percentile of an ascending-sorted slice.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    crate::schema::quantile(sorted, p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapCi {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    /// Single-class resamples discarded and redrawn.
    pub redraws: usize,
}

const MAX_REDRAWS_PER_DRAW: usize = 10_000;

/// Percentile bootstrap interval for a metric. Each of the `n_resamples`
/// draws uses an independent RNG substream (seed, draw index), so the result
/// is identical however draws are scheduled. Single-class resamples are
/// redrawn and counted.
pub fn bootstrap_ci(
    s: &ScoredSet,
    metric: MetricKind,
    n_resamples: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapCi, MetricsError> {
    assert!(n_resamples > 0 && (0.0..1.0).contains(&level));
    let n = s.len();
    let mut values = Vec::with_capacity(n_resamples);
    let mut redraws = 0usize;
    let mut scores = vec![0.0; n];
    let mut labels = vec![false; n];
    for draw in 0..n_resamples {
        let mut rng = stream_rng(seed, 1 + draw as u64);
        let mut attempts = 0;
        loop {
            attempts += 1;
            if attempts > MAX_REDRAWS_PER_DRAW {
                return Err(MetricsError::DegenerateResampling);
            }
            let mut pos = 0usize;
            for i in 0..n {
                let k = rng.gen_range(0..n);
                scores[i] = s.scores[k];
                labels[i] = s.labels[k];
                if s.labels[k] {
                    pos += 1;
                }
            }
            if pos == 0 || pos == n {
                redraws += 1;
                continue;
            }
            values.push(metric.compute(&scores, &labels)?);
            break;
        }
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let alpha = 1.0 - level;
    Ok(BootstrapCi {
        lo: percentile(&values, alpha / 2.0),
        hi: percentile(&values, 1.0 - alpha / 2.0),
        level,
        redraws,
    })
}

// ---------------------------------------------------------------------------
// Permutation test
// ---------------------------------------------------------------------------

fn check_paired(a: &ScoredSet, b: &ScoredSet) -> Result<(), MetricsError> {
    if a.len() != b.len()
        || a.admission_ids != b.admission_ids
        || a.labels != b.labels
    {
        return Err(MetricsError::UnpairedSets);
    }
    Ok(())
}

/// Two-sided paired permutation test for a metric difference.
///
/// For n <= 10 admissions the 2^n swap patterns are enumerated exactly;
/// otherwise `n_permutations` random per-admission swaps are sampled and the
/// add-one estimator `(1 + hits) / (1 + n_permutations)` is returned.
pub fn permutation_test(
    a: &ScoredSet,
    b: &ScoredSet,
    metric: MetricKind,
    n_permutations: usize,
    seed: u64,
) -> Result<f64, MetricsError> {
    if a.len() <= 10 {
        permutation_test_exact(a, b, metric)
    } else {
        permutation_test_sampled(a, b, metric, n_permutations, seed)
    }
}

/// Exact enumeration over all 2^n paired swap patterns (n <= ~20 is sane).
pub fn permutation_test_exact(
    a: &ScoredSet,
    b: &ScoredSet,
    metric: MetricKind,
) -> Result<f64, MetricsError> {
    check_paired(a, b)?;
    let n = a.len();
    let observed = (metric.compute(&a.scores, &a.labels)?
        - metric.compute(&b.scores, &b.labels)?)
    .abs();
    let mut hits = 0u64;
    let total = 1u64 << n;
    let mut sa = vec![0.0; n];
    let mut sb = vec![0.0; n];
    for mask in 0..total {
        for i in 0..n {
            if mask >> i & 1 == 1 {
                sa[i] = b.scores[i];
                sb[i] = a.scores[i];
            } else {
                sa[i] = a.scores[i];
                sb[i] = b.scores[i];
            }
        }
        let delta = (metric.compute(&sa, &a.labels)? - metric.compute(&sb, &b.labels)?).abs();
        if delta >= observed {
            hits += 1;
        }
    }
    Ok(hits as f64 / total as f64)
}

/// Monte-Carlo paired swap test with one RNG substream per permutation.
pub fn permutation_test_sampled(
    a: &ScoredSet,
    b: &ScoredSet,
    metric: MetricKind,
    n_permutations: usize,
    seed: u64,
) -> Result<f64, MetricsError> {
    check_paired(a, b)?;
    assert!(n_permutations > 0);
    let n = a.len();
    let observed = (metric.compute(&a.scores, &a.labels)?
        - metric.compute(&b.scores, &b.labels)?)
    .abs();
    let mut hits = 0usize;
    let mut sa = vec![0.0; n];
    let mut sb = vec![0.0; n];
    for draw in 0..n_permutations {
        let mut rng = stream_rng(seed, 1 + draw as u64);
        for i in 0..n {
            if rng.gen::<bool>() {
                sa[i] = b.scores[i];
                sb[i] = a.scores[i];
            } else {
                sa[i] = a.scores[i];
                sb[i] = b.scores[i];
            }
        }
        let delta = (metric.compute(&sa, &a.labels)? - metric.compute(&sb, &b.labels)?).abs();
        if delta >= observed {
            hits += 1;
        }
    }
    Ok((1 + hits) as f64 / (1 + n_permutations) as f64)
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct CiEntry {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub redraws: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub other_label: String,
    pub other_auc_roc: f64,
    pub other_pr_auc: f64,
    pub other_ci: BTreeMap<MetricKind, CiEntry>,
    /// Point-estimate differences, this model minus the other.
    pub delta_auc_roc: f64,
    pub delta_pr_auc: f64,
    pub p_auc_roc: f64,
    pub p_pr_auc: f64,
    pub n_resamples: usize,
    pub n_permutations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n: usize,
    pub n_pos: usize,
    pub auc_roc: f64,
    pub pr_auc: f64,
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub roc_points: Vec<(f64, f64)>,
    pub pr_points: Vec<(f64, f64)>,
    pub calibration_points: Vec<CalibrationPoint>,
    pub ci: BTreeMap<MetricKind, CiEntry>,
    pub comparison: Option<Comparison>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub threshold: f64,
    pub n_bins: usize,
    pub n_resamples: usize,
    pub n_permutations: usize,
    pub level: f64,
    pub seed: u64,
    pub batch_size: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            threshold: 0.5,
            n_bins: 10,
            n_resamples: 10_000,
            n_permutations: 10_000,
            level: 0.95,
            seed: 0,
            batch_size: 256,
        }
    }
}

/// Scores documents with the model (Eval mode) and pairs them with the
/// model's outcome labels.
pub fn score_set(model: &Model, docs: &[AdmissionDocument], batch_size: usize)
    -> Result<ScoredSet, MetricsError>
{
    let labels: Vec<bool> = docs
        .iter()
        .map(|d| {
            let label = match model.outcome {
                Outcome::Ihm => d.label_ihm,
                Outcome::Los => d.label_los,
            };
            label.ok_or(MetricsError::MissingLabel(d.admission_id))
        })
        .collect::<Result<_, _>>()?;
    let scores = model.score_documents(docs, batch_size)?;
    let ids = docs.iter().map(|d| d.admission_id).collect();
    ScoredSet::new(scores, labels, ids)
}

fn report_for(s: &ScoredSet, opts: &EvalOptions) -> Result<EvalReport, MetricsError> {
    let auc_roc = roc_auc(s)?;
    let pr = pr_auc(s)?;
    let (precision, recall, f1) = threshold_metrics(s, opts.threshold);
    let mut ci = BTreeMap::new();
    for metric in [MetricKind::RocAuc, MetricKind::PrAuc] {
        let b = bootstrap_ci(s, metric, opts.n_resamples, opts.level, opts.seed)?;
        ci.insert(
            metric,
            CiEntry {
                lo: b.lo,
                hi: b.hi,
                level: b.level,
                redraws: b.redraws,
            },
        );
    }
    Ok(EvalReport {
        n: s.len(),
        n_pos: s.n_positive(),
        auc_roc,
        pr_auc: pr,
        threshold: opts.threshold,
        precision,
        recall,
        f1,
        roc_points: roc_points(s)?,
        pr_points: pr_points(s)?,
        calibration_points: calibration_curve(s, opts.n_bins)?,
        ci,
        comparison: None,
    })
}

/// Full single-model report on a test document set.
pub fn evaluate(
    model: &Model,
    test_docs: &[AdmissionDocument],
    opts: &EvalOptions,
) -> Result<EvalReport, MetricsError> {
    let s = score_set(model, test_docs, opts.batch_size)?;
    report_for(&s, opts)
}

/// Report for `model_a` extended with bootstrap CIs for both models and
/// paired permutation p-values for both metric differences.
pub fn compare(
    model_a: &Model,
    model_b: &Model,
    label_b: &str,
    test_docs: &[AdmissionDocument],
    opts: &EvalOptions,
) -> Result<EvalReport, MetricsError> {
    if model_a.outcome != model_b.outcome {
        return Err(MetricsError::OutcomeMismatch);
    }
    let sa = score_set(model_a, test_docs, opts.batch_size)?;
    let sb = score_set(model_b, test_docs, opts.batch_size)?;
    compare_scored(&sa, &sb, label_b, opts)
}

/// Same as [`compare`] but over already-scored paired sets.
pub fn compare_scored(
    sa: &ScoredSet,
    sb: &ScoredSet,
    label_b: &str,
    opts: &EvalOptions,
) -> Result<EvalReport, MetricsError> {
    check_paired(sa, sb)?;
    let mut report = report_for(sa, opts)?;
    let other_auc_roc = roc_auc(sb)?;
    let other_pr_auc = pr_auc(sb)?;
    let mut other_ci = BTreeMap::new();
    for metric in [MetricKind::RocAuc, MetricKind::PrAuc] {
        let b = bootstrap_ci(sb, metric, opts.n_resamples, opts.level, opts.seed)?;
        other_ci.insert(
            metric,
            CiEntry {
                lo: b.lo,
                hi: b.hi,
                level: b.level,
                redraws: b.redraws,
            },
        );
    }
    let p_auc_roc = permutation_test(sa, sb, MetricKind::RocAuc, opts.n_permutations, opts.seed)?;
    let p_pr_auc = permutation_test(sa, sb, MetricKind::PrAuc, opts.n_permutations, opts.seed)?;
    report.comparison = Some(Comparison {
        other_label: String::from(label_b),
        other_auc_roc,
        other_pr_auc,
        other_ci,
        delta_auc_roc: report.auc_roc - other_auc_roc,
        delta_pr_auc: report.pr_auc - other_pr_auc,
        p_auc_roc,
        p_pr_auc,
        n_resamples: opts.n_resamples,
        n_permutations: opts.n_permutations,
        seed: opts.seed,
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(scores: &[f64], labels: &[bool]) -> ScoredSet {
        ScoredSet::new(
            scores.to_vec(),
            labels.to_vec(),
            (1..=scores.len() as i64).collect(),
        )
        .unwrap()
    }

    #[test]
    fn roc_auc_known_cases() {
        let perfect = set(&[0.9, 0.8, 0.1], &[true, true, false]);
        assert!((roc_auc(&perfect).unwrap() - 1.0).abs() < 1e-15);

        let ties = set(&[0.4, 0.4, 0.4, 0.4], &[true, false, true, false]);
        assert!((roc_auc(&ties).unwrap() - 0.5).abs() < 1e-15);

        let mixed = set(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]);
        assert!((roc_auc(&mixed).unwrap() - 0.75).abs() < 1e-15);

        let single = set(&[0.1, 0.2], &[true, true]);
        assert!(matches!(
            roc_auc(&single),
            Err(MetricsError::DegenerateLabels(_))
        ));
    }

    #[test]
    fn pr_auc_known_cases() {
        let perfect = set(&[0.9, 0.8, 0.1, 0.2], &[true, true, false, false]);
        assert!((pr_auc(&perfect).unwrap() - 1.0).abs() < 1e-15);

        let mixed = set(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]);
        assert!((pr_auc(&mixed).unwrap() - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);

        let worst = set(&[0.9, 0.8, 0.7, 0.1], &[false, false, false, true]);
        assert!((pr_auc(&worst).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn threshold_metrics_conventions() {
        let s = set(&[0.6, 0.4], &[true, false]);
        assert_eq!(threshold_metrics(&s, 0.5), (1.0, 1.0, 1.0));

        let none_predicted = set(&[0.2, 0.3], &[true, false]);
        assert_eq!(threshold_metrics(&none_predicted, 0.5), (0.0, 0.0, 0.0));

        let s3 = set(&[0.6, 0.6, 0.4], &[true, false, true]);
        let (p, r, f1) = threshold_metrics(&s3, 0.5);
        assert!((p - 0.5).abs() < 1e-15 && (r - 0.5).abs() < 1e-15 && (f1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn calibration_bins() {
        let constant = set(&[0.5, 0.5, 0.5, 0.5], &[true, false, true, false]);
        let points = calibration_curve(&constant, 10).unwrap();
        assert_eq!(points.len(), 1);
        assert!((points[0].mean_predicted - 0.5).abs() < 1e-15);
        assert!((points[0].observed_rate - 0.5).abs() < 1e-15);
        assert_eq!(points[0].count, 4);

        let low = set(&[0.01, 0.05, 0.09], &[false, true, false]);
        let points = calibration_curve(&low, 9).unwrap();
        assert_eq!(points.len(), 1);

        assert!(calibration_curve(&constant, 1).is_err());
        // score exactly 1.0 lands in the top bin
        let top = set(&[1.0, 0.0], &[true, false]);
        let points = calibration_curve(&top, 10).unwrap();
        assert_eq!(points.len(), 2);
        assert_eq!(points[1].count, 1);
    }

    #[test]
    fn bootstrap_constant_metric_collapses() {
        let s = set(&[0.5; 6], &[true, false, true, false, true, false]);
        let ci = bootstrap_ci(&s, MetricKind::RocAuc, 200, 0.95, 7).unwrap();
        assert_eq!((ci.lo, ci.hi), (0.5, 0.5));
    }

    #[test]
    fn bootstrap_is_deterministic_per_seed() {
        let s = set(
            &[0.9, 0.7, 0.6, 0.4, 0.3, 0.2, 0.8, 0.1],
            &[true, true, false, false, true, false, true, false],
        );
        let a = bootstrap_ci(&s, MetricKind::PrAuc, 500, 0.9, 11).unwrap();
        let b = bootstrap_ci(&s, MetricKind::PrAuc, 500, 0.9, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.lo <= a.hi);
    }

    #[test]
    fn permutation_identical_models_gives_p_one() {
        let scores = [0.9, 0.7, 0.6, 0.4, 0.3, 0.2];
        let labels = [true, true, false, true, false, false];
        let a = set(&scores, &labels);
        let b = set(&scores, &labels);
        // n <= 10 path: exact enumeration
        assert_eq!(
            permutation_test(&a, &b, MetricKind::RocAuc, 100, 3).unwrap(),
            1.0
        );
        // sampled path must also return 1.0 when every delta ties at 0
        assert!(
            (permutation_test_sampled(&a, &b, MetricKind::RocAuc, 99, 3).unwrap() - 1.0).abs()
                < 1e-15
        );
    }

    #[test]
    fn permutation_is_symmetric_in_model_order() {
        let labels = [true, true, false, true, false, false, true, false, false, false, true, false];
        let sa = set(
            &[0.91, 0.82, 0.35, 0.74, 0.22, 0.45, 0.66, 0.31, 0.15, 0.27, 0.88, 0.41],
            &labels,
        );
        let sb = set(
            &[0.68, 0.79, 0.42, 0.55, 0.36, 0.28, 0.71, 0.44, 0.23, 0.31, 0.62, 0.39],
            &labels,
        );
        let p_ab = permutation_test_sampled(&sa, &sb, MetricKind::RocAuc, 2000, 5).unwrap();
        let p_ba = permutation_test_sampled(&sb, &sa, MetricKind::RocAuc, 2000, 5).unwrap();
        assert!((p_ab - p_ba).abs() < 1e-15);
    }

    #[test]
    fn unpaired_sets_are_rejected() {
        let a = set(&[0.9, 0.1], &[true, false]);
        let mut b = a.clone();
        b.admission_ids[1] = 999;
        assert_eq!(
            permutation_test(&a, &b, MetricKind::RocAuc, 10, 0),
            Err(MetricsError::UnpairedSets)
        );
        let mut c = a.clone();
        c.labels[0] = false;
        assert_eq!(
            permutation_test(&a, &c, MetricKind::RocAuc, 10, 0),
            Err(MetricsError::UnpairedSets)
        );
    }

    #[test]
    fn scored_set_validation() {
        assert!(ScoredSet::new(vec![0.5], vec![true], vec![1]).is_ok());
        assert!(ScoredSet::new(vec![], vec![], vec![]).is_err());
        assert!(ScoredSet::new(vec![0.5, 0.2], vec![true], vec![1, 2]).is_err());
        assert!(ScoredSet::new(vec![1.5], vec![true], vec![1]).is_err());
        assert!(ScoredSet::new(vec![f64::NAN], vec![true], vec![1]).is_err());
    }
}
