use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    /// Objects scoring at or below this value are flagged as bad.
    pub threshold: f64,
    pub true_positive_rate: f64,
    pub false_positive_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC for detecting bad labels from a quality score where low means bad.
///
/// The sweep starts at `(0, 0)` with threshold `-inf` and visits every
/// unique score in ascending order, ending at `(1, 1)`.
pub fn label_quality_roc(scores: &[f64], bad: &[bool]) -> Result<RocCurve> {
    if scores.len() != bad.len() {
        return Err(Error::LengthMismatch(scores.len(), bad.len()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::param("scores", "must be finite"));
    }
    let positives = bad.iter().filter(|b| **b).count();
    let negatives = bad.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Input("ROC needs at least one bad and one good label".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut points = vec![RocPoint {
        threshold: f64::NEG_INFINITY,
        true_positive_rate: 0.0,
        false_positive_rate: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let threshold = scores[order[k]];
        while k < order.len() && scores[order[k]] == threshold {
            if bad[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        points.push(RocPoint {
            threshold,
            true_positive_rate: tp as f64 / positives as f64,
            false_positive_rate: fp as f64 / negatives as f64,
        });
    }
    let auc = points
        .windows(2)
        .map(|w| {
            (w[1].false_positive_rate - w[0].false_positive_rate)
                * 0.5
                * (w[1].true_positive_rate + w[0].true_positive_rate)
        })
        .sum();
    Ok(RocCurve { points, auc })
}
