//! Localization metrics (MODA, MODP, precision, recall, F1) over thresholded
//! point matching, and counting metrics (MAE, root-MSE, NAE).

mod counting;
mod matching;

pub use counting::{counting_stats, mean_squared_difference, Bucket, BucketStats, CountingStats};
pub use matching::{match_points, MatchMode, MatchReport, MatchedPair};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default matching threshold in image space, pixels.
pub const IMAGE_THRESHOLD_PX: f64 = 3.0;
/// Default matching threshold on the ground plane, meters.
pub const GROUND_THRESHOLD_M: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("{metric} is undefined: {reason}")]
    UndefinedMetric {
        metric: &'static str,
        reason: &'static str,
    },
    #[error("length mismatch: {pred} predictions for {gt} ground-truth values")]
    LengthMismatch { pred: usize, gt: usize },
    #[error("no frames to evaluate")]
    Empty,
}

fn undefined(metric: &'static str, reason: &'static str) -> MetricError {
    MetricError::UndefinedMetric { metric, reason }
}

/// `1 - (FP + FN) / (TP + FN)`.
pub fn moda(r: &MatchReport) -> Result<f64, MetricError> {
    moda_counts(r.tp, r.fp, r.fn_)
}

fn moda_counts(tp: usize, fp: usize, fn_: usize) -> Result<f64, MetricError> {
    if tp + fn_ == 0 {
        return Err(undefined("MODA", "no ground-truth points"));
    }
    Ok(1.0 - (fp + fn_) as f64 / (tp + fn_) as f64)
}

/// Mean of `1 - d/t` over matched pairs.
pub fn modp(r: &MatchReport) -> Result<f64, MetricError> {
    if r.tp == 0 {
        return Err(undefined("MODP", "no true positives"));
    }
    Ok(modp_sum(r) / r.tp as f64)
}

fn modp_sum(r: &MatchReport) -> f64 {
    r.matched_distances().map(|d| 1.0 - d / r.threshold).sum()
}

pub fn precision_recall_f1(r: &MatchReport) -> Result<(f64, f64, f64), MetricError> {
    prf_counts(r.tp, r.fp, r.fn_)
}

fn prf_counts(tp: usize, fp: usize, fn_: usize) -> Result<(f64, f64, f64), MetricError> {
    if tp + fp == 0 {
        return Err(undefined("precision", "no predictions"));
    }
    if tp + fn_ == 0 {
        return Err(undefined("recall", "no ground-truth points"));
    }
    let p = tp as f64 / (tp + fp) as f64;
    let r = tp as f64 / (tp + fn_) as f64;
    let f1 = if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    };
    Ok((p, r, f1))
}

/// All localization metrics; undefined ones are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LocalizationMetrics {
    pub moda: Option<f64>,
    pub modp: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

impl LocalizationMetrics {
    pub fn from_report(r: &MatchReport) -> Self {
        LocalizationTotals::from_report(r).metrics()
    }
}

/// Pooled raw counts; combining is associative so frame order does not
/// matter.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LocalizationTotals {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// Σ (1 - d/t) over matched pairs.
    pub modp_sum: f64,
}

impl LocalizationTotals {
    pub fn from_report(r: &MatchReport) -> Self {
        LocalizationTotals {
            tp: r.tp,
            fp: r.fp,
            fn_: r.fn_,
            modp_sum: modp_sum(r),
        }
    }

    pub fn combine(self, o: Self) -> Self {
        LocalizationTotals {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            modp_sum: self.modp_sum + o.modp_sum,
        }
    }

    pub fn metrics(&self) -> LocalizationMetrics {
        let prf = prf_counts(self.tp, self.fp, self.fn_);
        // Precision and recall are defined independently of each other.
        let precision =
            (self.tp + self.fp > 0).then(|| self.tp as f64 / (self.tp + self.fp) as f64);
        let recall = (self.tp + self.fn_ > 0).then(|| self.tp as f64 / (self.tp + self.fn_) as f64);
        LocalizationMetrics {
            moda: moda_counts(self.tp, self.fp, self.fn_).ok(),
            modp: (self.tp > 0).then(|| self.modp_sum / self.tp as f64),
            precision,
            recall,
            f1: prf.ok().map(|t| t.2),
        }
    }
}

/// Mean of each metric over the frames where it is defined.
pub fn macro_average(frames: &[LocalizationMetrics]) -> LocalizationMetrics {
    let mean = |get: fn(&LocalizationMetrics) -> Option<f64>| {
        let vals: Vec<f64> = frames.iter().filter_map(get).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    LocalizationMetrics {
        moda: mean(|m| m.moda),
        modp: mean(|m| m.modp),
        precision: mean(|m| m.precision),
        recall: mean(|m| m.recall),
        f1: mean(|m| m.f1),
    }
}

/// Matching plus metrics for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEvaluation {
    pub report: MatchReport,
    pub metrics: LocalizationMetrics,
    pub gt_count: usize,
    pub pred_count: usize,
}

pub fn evaluate_localization(
    pred: &[[f64; 2]],
    gt: &[[f64; 2]],
    threshold: f64,
    mode: MatchMode,
) -> FrameEvaluation {
    let report = match_points(gt, pred, threshold, mode);
    FrameEvaluation {
        metrics: LocalizationMetrics::from_report(&report),
        gt_count: gt.len(),
        pred_count: pred.len(),
        report,
    }
}

/// Micro aggregate (pooled counts) over frames.
pub fn aggregate_localization<'a>(
    frames: impl IntoIterator<Item = &'a FrameEvaluation>,
) -> LocalizationTotals {
    frames
        .into_iter()
        .map(|f| LocalizationTotals::from_report(&f.report))
        .fold(LocalizationTotals::default(), LocalizationTotals::combine)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(tp: usize, fp: usize, fn_: usize, dists: &[f64], t: f64) -> MatchReport {
        MatchReport {
            tp,
            fp,
            fn_,
            pairs: dists
                .iter()
                .enumerate()
                .map(|(k, &d)| MatchedPair {
                    gt: k,
                    pred: k,
                    distance: d,
                })
                .collect(),
            threshold: t,
        }
    }

    #[test]
    fn formula_examples() {
        let r = report(3, 1, 1, &[0.0; 3], 1.0);
        assert_eq!(moda(&r).unwrap(), 0.5);
        assert_eq!(precision_recall_f1(&r).unwrap(), (0.75, 0.75, 0.75));
        assert_eq!(moda(&report(0, 5, 5, &[], 1.0)).unwrap(), -1.0);
        assert_eq!(modp(&report(1, 0, 0, &[1.5], 3.0)).unwrap(), 0.5);
        assert_eq!(
            precision_recall_f1(&report(0, 2, 3, &[], 1.0)).unwrap(),
            (0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn undefined_cases() {
        assert!(matches!(
            moda(&report(0, 2, 0, &[], 1.0)),
            Err(MetricError::UndefinedMetric { .. })
        ));
        assert!(modp(&report(0, 2, 1, &[], 1.0)).is_err());
        assert!(precision_recall_f1(&report(0, 0, 1, &[], 1.0)).is_err());
        let m = LocalizationMetrics::from_report(&report(0, 0, 1, &[], 1.0));
        assert_eq!(m.recall, Some(0.0));
        assert_eq!(m.precision, None);
    }

    #[test]
    fn self_evaluation_is_perfect() {
        let pts = [[1.0, 2.0], [4.0, 4.0], [9.0, 0.5]];
        let e = evaluate_localization(&pts, &pts, 3.0, MatchMode::Optimal);
        let m = e.metrics;
        assert_eq!(
            [m.moda, m.modp, m.precision, m.recall, m.f1],
            [Some(1.0); 5]
        );
    }

    #[test]
    fn micro_aggregate_pools_counts() {
        let a = report(2, 0, 1, &[0.5, 0.0], 1.0);
        let b = report(1, 3, 0, &[0.25], 1.0);
        let t = LocalizationTotals::from_report(&a).combine(LocalizationTotals::from_report(&b));
        assert_eq!((t.tp, t.fp, t.fn_), (3, 3, 1));
        let m = t.metrics();
        assert_eq!(m.moda, Some(1.0 - 4.0 / 4.0));
        assert_eq!(m.modp, Some((0.5 + 1.0 + 0.75) / 3.0));
    }
}
