//! Discrimination metrics, borrower-aligned folds and paired t-tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::hash;

/// Two-sided significance level for every model comparison.
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Metric {
    Ks,
    Auc,
}

fn class_counts(labels: &[bool]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l).count();
    (pos, labels.len() - pos)
}

fn check_inputs(scores: &[f64], labels: &[bool], what: &str) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{what}: {} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument(format!("{what}: NaN score")));
    }
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "{what} needs both classes (positives={pos}, negatives={neg})"
        )));
    }
    Ok((pos, neg))
}

/// Indices sorted ascending by score.
fn order_by_score(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    idx
}

/// Area under the ROC curve: the probability that a random positive scores
/// above a random negative, ties counting one half. Computed from mid-ranks.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_inputs(scores, labels, "AUC")?;
    let order = order_by_score(scores);
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share the mid-rank
        let mid = (i + j + 2) as f64 / 2.0;
        let tied_pos = order[i..=j].iter().filter(|&&k| labels[k]).count();
        rank_sum_pos += mid * tied_pos as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// Kolmogorov-Smirnov statistic: the largest gap between the empirical score
/// distributions of positives and negatives over all thresholds.
pub fn ks(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_inputs(scores, labels, "KS")?;
    let order = order_by_score(scores);
    let (mut cum_pos, mut cum_neg) = (0usize, 0usize);
    let mut best: f64 = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                cum_pos += 1;
            } else {
                cum_neg += 1;
            }
            i += 1;
        }
        let gap = (cum_pos as f64 / pos as f64 - cum_neg as f64 / neg as f64).abs();
        best = best.max(gap);
    }
    Ok(best)
}

/// Assigns each borrower to one of `k` folds by a seeded hash of its id, so a
/// borrower lands in the same fold in every month and experiment.
pub fn make_folds(borrower_ids: &[u64], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("fold count {k} < 2")));
    }
    if k > borrower_ids.len() {
        return Err(Error::InvalidArgument(format!(
            "fold count {k} exceeds {} borrowers",
            borrower_ids.len()
        )));
    }
    Ok(borrower_ids
        .iter()
        .map(|&id| (hash::keyed(id, seed) % k as u64) as usize)
        .collect())
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub(crate) fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Cross-validated KS and AUC for one model configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub fold_ks: Vec<f64>,
    pub fold_auc: Vec<f64>,
    pub ks_mean: f64,
    pub ks_sd: f64,
    pub auc_mean: f64,
    pub auc_sd: f64,
    /// Seed of the fold assignment; results sharing it are paired fold-by-fold.
    pub fold_assignment_id: u64,
}

impl CvResult {
    pub fn from_folds(fold_ks: Vec<f64>, fold_auc: Vec<f64>, fold_assignment_id: u64) -> Self {
        CvResult {
            ks_mean: mean(&fold_ks),
            ks_sd: sample_sd(&fold_ks),
            auc_mean: mean(&fold_auc),
            auc_sd: sample_sd(&fold_auc),
            fold_ks,
            fold_auc,
            fold_assignment_id,
        }
    }

    pub fn folds(&self, metric: Metric) -> &[f64] {
        match metric {
            Metric::Ks => &self.fold_ks,
            Metric::Auc => &self.fold_auc,
        }
    }

    pub fn mean(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Ks => self.ks_mean,
            Metric::Auc => self.auc_mean,
        }
    }
}

/// Outcome of a paired comparison `a -> b` (b is the later month or the
/// larger feature set).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub delta_mean: f64,
    /// `(mean_b - mean_a) / mean_a`; `None` when `mean_a` is zero.
    pub relative_increment: Option<f64>,
    pub t_statistic: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// Two-sided paired t-test on per-fold differences `b - a`.
///
/// A zero difference vector gives p = 1; a constant non-zero difference
/// (zero variance) gives p = 0.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<ComparisonResult> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "paired t-test: lengths differ ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument(
            "paired t-test needs at least two pairs".into(),
        ));
    }
    let n = a.len() as f64;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let d_mean = mean(&diffs);
    let d_sd = sample_sd(&diffs);
    let (mean_a, mean_b) = (mean(a), mean(b));

    let (t, p) = if diffs.iter().all(|&d| d == 0.0) {
        (0.0, 1.0)
    } else if d_sd == 0.0 || d_sd <= 1e-13 * d_mean.abs() {
        (f64::INFINITY.copysign(d_mean), 0.0)
    } else {
        let t = d_mean / (d_sd / n.sqrt());
        let dist = StudentsT::new(0.0, 1.0, n - 1.0)
            .map_err(|e| Error::InvalidArgument(format!("t distribution: {e}")))?;
        (t, (2.0 * dist.sf(t.abs())).min(1.0))
    };

    Ok(ComparisonResult {
        delta_mean: mean_b - mean_a,
        relative_increment: relative_increment(mean_a, mean_b),
        t_statistic: t,
        p_value: p,
        significant: p < ALPHA,
    })
}

pub fn relative_increment(from: f64, to: f64) -> Option<f64> {
    (from != 0.0).then(|| (to - from) / from)
}
