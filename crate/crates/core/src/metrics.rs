//! Evaluation metrics: false-positive rate, detection rate, and
//! multi-run averages.
//!
//! Note the denominator: T_N is the total number of detected
//! (abnormal-classified) domains, T_p + F_p. That makes the
//! false-positive rate a 1-minus-precision measure, not a classical
//! FPR over all negatives.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{DomainClass, DomainRecord};
use crate::sim::{GroundTruthLabel, Truth};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("abnormal domain {0:?} has no ground-truth label")]
    MissingLabel(String),
    #[error("no detections: the rate is undefined")]
    NoDetections,
    #[error("cannot average an empty list of rates")]
    EmptyList,
}

/// Detection outcome tallies for one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationCounts {
    /// Abnormal-classified domains labeled Botnet (T_p).
    pub true_positives: u64,
    /// Abnormal-classified domains labeled Legitimate (F_p).
    pub false_positives: u64,
}

impl EvaluationCounts {
    pub fn new(true_positives: u64, false_positives: u64) -> Self {
        EvaluationCounts {
            true_positives,
            false_positives,
        }
    }

    /// T_N = T_p + F_p.
    pub fn total_detected(&self) -> u64 {
        self.true_positives + self.false_positives
    }
}

/// Tallies detector output against ground truth. Every abnormal
/// domain must carry a label.
pub fn count_outcomes<'a, I>(
    domain_db: I,
    labels: &[GroundTruthLabel],
) -> Result<EvaluationCounts, MetricsError>
where
    I: IntoIterator<Item = &'a DomainRecord>,
{
    let by_qname: BTreeMap<&str, Truth> = labels
        .iter()
        .map(|l| (l.qname.as_str(), l.truth))
        .collect();
    let mut counts = EvaluationCounts::default();
    for record in domain_db {
        if record.class != DomainClass::Abnormal {
            continue;
        }
        match by_qname.get(record.qname.as_str()) {
            Some(Truth::Botnet) => counts.true_positives += 1,
            Some(Truth::Legitimate) => counts.false_positives += 1,
            None => return Err(MetricsError::MissingLabel(record.qname.clone())),
        }
    }
    Ok(counts)
}

/// F_pr = F_p / T_N.
pub fn false_positive_rate(counts: &EvaluationCounts) -> Result<f64, MetricsError> {
    let total = counts.total_detected();
    if total == 0 {
        return Err(MetricsError::NoDetections);
    }
    Ok(counts.false_positives as f64 / total as f64)
}

/// D_r = T_p / T_N.
pub fn detection_rate(counts: &EvaluationCounts) -> Result<f64, MetricsError> {
    let total = counts.total_detected();
    if total == 0 {
        return Err(MetricsError::NoDetections);
    }
    Ok(counts.true_positives as f64 / total as f64)
}

/// Arithmetic mean across repeated experiments.
pub fn average_rate(rates: &[f64]) -> Result<f64, MetricsError> {
    if rates.is_empty() {
        return Err(MetricsError::EmptyList);
    }
    Ok(rates.iter().sum::<f64>() / rates.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::RecordSource;

    fn record(qname: &str, class: DomainClass) -> DomainRecord {
        DomainRecord {
            qname: qname.to_string(),
            class,
            best_score: None,
            source: RecordSource::GroupBehavior,
            first_seen_ts: 0.0,
            last_seen_ts: 1.0,
        }
    }

    fn label(qname: &str, truth: Truth) -> GroundTruthLabel {
        GroundTruthLabel {
            qname: qname.to_string(),
            truth,
        }
    }

    #[test]
    fn all_botnet_counts() {
        let db = vec![
            record("a", DomainClass::Abnormal),
            record("b", DomainClass::Abnormal),
            record("c", DomainClass::Abnormal),
        ];
        let labels = vec![
            label("a", Truth::Botnet),
            label("b", Truth::Botnet),
            label("c", Truth::Botnet),
        ];
        let counts = count_outcomes(&db, &labels).unwrap();
        assert_eq!(counts, EvaluationCounts::new(3, 0));
        assert_eq!(counts.total_detected(), 3);
    }

    #[test]
    fn mixed_counts() {
        let db = vec![
            record("a", DomainClass::Abnormal),
            record("b", DomainClass::Abnormal),
            record("www.google.com", DomainClass::Abnormal),
            record("d", DomainClass::Normal),
        ];
        let labels = vec![
            label("a", Truth::Botnet),
            label("b", Truth::Botnet),
            label("www.google.com", Truth::Legitimate),
            label("d", Truth::Legitimate),
        ];
        assert_eq!(
            count_outcomes(&db, &labels).unwrap(),
            EvaluationCounts::new(2, 1)
        );
    }

    #[test]
    fn empty_db_counts_zero() {
        let counts = count_outcomes(&[], &[]).unwrap();
        assert_eq!(counts, EvaluationCounts::new(0, 0));
    }

    #[test]
    fn unlabeled_abnormal_is_an_error() {
        let db = vec![record("a", DomainClass::Abnormal)];
        assert_eq!(
            count_outcomes(&db, &[]),
            Err(MetricsError::MissingLabel("a".into()))
        );
    }

    #[test]
    fn paper_rates() {
        let second = EvaluationCounts::new(2, 1);
        assert!((false_positive_rate(&second).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((detection_rate(&second).unwrap() - 2.0 / 3.0).abs() < 1e-12);

        let first = EvaluationCounts::new(3, 0);
        assert_eq!(false_positive_rate(&first).unwrap(), 0.0);
        assert_eq!(detection_rate(&first).unwrap(), 1.0);
    }

    #[test]
    fn no_detections_is_undefined_not_zero() {
        let empty = EvaluationCounts::new(0, 0);
        assert_eq!(false_positive_rate(&empty), Err(MetricsError::NoDetections));
        assert_eq!(detection_rate(&empty), Err(MetricsError::NoDetections));
    }

    #[test]
    fn averages_match_reported_experiments() {
        let fpr = average_rate(&[0.0, 1.0 / 3.0, 0.0]).unwrap();
        assert!((fpr - 1.0 / 9.0).abs() < 1e-12);
        let dr = average_rate(&[1.0, 2.0 / 3.0, 1.0]).unwrap();
        assert!((dr - 8.0 / 9.0).abs() < 1e-12);
        assert_eq!(average_rate(&[0.5]).unwrap(), 0.5);
        assert_eq!(average_rate(&[]), Err(MetricsError::EmptyList));
    }

    #[test]
    fn rates_sum_to_one() {
        let counts = EvaluationCounts::new(7, 3);
        let sum = false_positive_rate(&counts).unwrap() + detection_rate(&counts).unwrap();
        assert!((sum - 1.0).abs() < 1e-12);
    }
}
