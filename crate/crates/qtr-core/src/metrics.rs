//! Ranking and calibration metrics used for model selection and reporting.
//!
//! All three metrics are exact: ROC AUC is the Mann-Whitney statistic with
//! ties counted one half, average precision uses a documented stable tie
//! rule (descending score, input order within ties), and cross entropy
//! clamps probabilities before taking logs.

use crate::error::{Error, Result};

/// Probability floor/ceiling distance applied before `ln`.
pub const PROB_CLAMP: f64 = 1e-12;

/// Parallel scores and binary labels.
#[derive(Debug, Clone)]
pub struct ScoredSet {
    scores: Vec<f64>,
    labels: Vec<bool>,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::MetricLengthMismatch {
                scores: scores.len(),
                labels: labels.len(),
            });
        }
        Ok(Self { scores, labels })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }
}

/// Probability that a random positive outscores a random negative, ties
/// counted one half. Computed from tie-aware average ranks in O(n log n).
pub fn roc_auc(set: &ScoredSet) -> Result<f64> {
    let pos = set.positives();
    let neg = set.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(
            "roc_auc needs at least one positive and one negative",
        ));
    }
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_by(|&a, &b| set.scores[a].partial_cmp(&set.scores[b]).expect("finite scores"));

    // Walk ascending scores in tie groups; each member gets the group's
    // average 1-based rank.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < set.len() {
        let mut j = i;
        while j < set.len() && set.scores[order[j]] == set.scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0; // mean of ranks i+1 ..= j
        for &idx in &order[i..j] {
            if set.labels[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let u = rank_sum_pos - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// Indices in evaluation order: descending score, stable (input order) on ties.
fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));
    order
}

/// Mean over positives of precision at the positive's rank.
pub fn average_precision(set: &ScoredSet) -> Result<f64> {
    let pos = set.positives();
    if pos == 0 {
        return Err(Error::UndefinedMetric(
            "average_precision needs at least one positive",
        ));
    }
    let order = ranking(&set.scores);
    let mut seen_pos = 0usize;
    let mut sum = 0.0;
    for (rank0, &idx) in order.iter().enumerate() {
        if set.labels[idx] {
            seen_pos += 1;
            sum += seen_pos as f64 / (rank0 + 1) as f64;
        }
    }
    Ok(sum / pos as f64)
}

/// Mean negative log-likelihood of the true labels given class-1
/// probabilities. Probabilities are clamped into
/// `[PROB_CLAMP, 1 - PROB_CLAMP]` first.
pub fn corpus_cross_entropy(probabilities: &[f64], labels: &[bool]) -> Result<f64> {
    if probabilities.len() != labels.len() {
        return Err(Error::MetricLengthMismatch {
            scores: probabilities.len(),
            labels: labels.len(),
        });
    }
    if probabilities.is_empty() {
        return Err(Error::UndefinedMetric("corpus_cross_entropy on empty input"));
    }
    let mut sum = 0.0;
    for (&p, &y) in probabilities.iter().zip(labels) {
        let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let p_true = if y { p } else { 1.0 - p };
        sum += -p_true.ln();
    }
    Ok(sum / probabilities.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(scores: Vec<f64>, labels: Vec<u8>) -> ScoredSet {
        ScoredSet::new(scores, labels.into_iter().map(|l| l != 0).collect()).unwrap()
    }

    #[test]
    fn perfect_ranking_is_one() {
        let s = set(vec![0.9, 0.8, 0.2, 0.1], vec![1, 1, 0, 0]);
        assert_eq!(roc_auc(&s).unwrap(), 1.0);
    }

    #[test]
    fn all_ties_is_half() {
        let s = set(vec![0.5; 6], vec![1, 0, 1, 0, 0, 1]);
        assert_eq!(roc_auc(&s).unwrap(), 0.5);
    }

    #[test]
    fn single_class_is_undefined() {
        let s = set(vec![0.1, 0.2], vec![1, 1]);
        assert!(matches!(roc_auc(&s), Err(Error::UndefinedMetric(_))));
        let s = set(vec![0.1, 0.2], vec![0, 0]);
        assert!(matches!(roc_auc(&s), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn average_precision_two_point_cases() {
        let s = set(vec![0.9, 0.1], vec![1, 0]);
        assert_eq!(average_precision(&s).unwrap(), 1.0);
        // positive ranked second: precision at rank 2 is 1/2
        let s = set(vec![0.1, 0.9], vec![1, 0]);
        assert_eq!(average_precision(&s).unwrap(), 0.5);
    }

    #[test]
    fn average_precision_no_positive_is_undefined() {
        let s = set(vec![0.1, 0.9], vec![0, 0]);
        assert!(matches!(
            average_precision(&s),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn corpus_ce_uniform_is_ln_two() {
        let ce = corpus_cross_entropy(&[0.5, 0.5, 0.5], &[true, false, true]).unwrap();
        assert!((ce - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn corpus_ce_saturated_is_bounded_by_clamp() {
        let ce = corpus_cross_entropy(&[1.0, 0.0], &[true, false]).unwrap();
        assert!(ce >= 0.0 && ce < 1e-11, "ce = {ce}");
    }

    #[test]
    fn corpus_ce_matches_high_precision_reference() {
        // mixed set computed with a 60-digit reference
        let ce = corpus_cross_entropy(
            &[0.9, 0.2, 0.5, 0.99, 0.7],
            &[true, false, true, true, false],
        )
        .unwrap();
        assert!((ce - 0.447_134_877_542_283_76).abs() < 1e-15, "ce = {ce}");
    }

    #[test]
    fn corpus_ce_length_mismatch() {
        assert!(corpus_cross_entropy(&[0.5], &[true, false]).is_err());
    }
}
