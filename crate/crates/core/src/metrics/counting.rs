use serde::{Deserialize, Serialize};

use super::MetricError;

/// Crowd-density class of a frame by ground-truth count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Bucket {
    /// 0–399
    Sparse,
    /// 400–699
    Medium,
    /// 700 and above
    Congested,
}

impl Bucket {
    pub const ALL: [Bucket; 3] = [Bucket::Sparse, Bucket::Medium, Bucket::Congested];

    pub fn of_count(gt: f64) -> Bucket {
        if gt < 400.0 {
            Bucket::Sparse
        } else if gt < 700.0 {
            Bucket::Medium
        } else {
            Bucket::Congested
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Bucket::Sparse => "Sparse",
            Bucket::Medium => "Medium",
            Bucket::Congested => "Congested",
        }
    }

    /// Label with the count range, e.g. `Sparse (0-399)`.
    pub fn range_label(self) -> &'static str {
        match self {
            Bucket::Sparse => "Sparse (0-399)",
            Bucket::Medium => "Medium (400-699)",
            Bucket::Congested => "Congested (700-1000)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketStats {
    pub bucket: Bucket,
    pub n_frames: usize,
    /// `None` when the bucket is empty.
    pub mae: Option<f64>,
    pub mse: Option<f64>,
    pub nae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingStats {
    pub mae: f64,
    /// Root of the mean squared error.
    pub mse: f64,
    /// Over frames with a positive ground-truth count; `None` if there are none.
    pub nae: Option<f64>,
    /// Frames left out of NAE because their ground truth is zero.
    pub nae_excluded: usize,
    pub n_frames: usize,
    pub buckets: Vec<BucketStats>,
}

struct Sums {
    n: usize,
    abs: f64,
    sq: f64,
    rel: f64,
    rel_n: usize,
}

fn sums<'a>(pairs: impl Iterator<Item = (&'a f64, &'a f64)>) -> Sums {
    let mut s = Sums {
        n: 0,
        abs: 0.0,
        sq: 0.0,
        rel: 0.0,
        rel_n: 0,
    };
    for (p, z) in pairs {
        let e = (z - p).abs();
        s.n += 1;
        s.abs += e;
        s.sq += e * e;
        if *z > 0.0 {
            s.rel += e / z;
            s.rel_n += 1;
        }
    }
    s
}

/// MAE, root-MSE and NAE between predicted and ground-truth counts, overall
/// and per [`Bucket`].
pub fn counting_stats(pred: &[f64], gt: &[f64]) -> Result<CountingStats, MetricError> {
    if pred.len() != gt.len() {
        return Err(MetricError::LengthMismatch {
            pred: pred.len(),
            gt: gt.len(),
        });
    }
    if gt.is_empty() {
        return Err(MetricError::Empty);
    }
    let all = sums(pred.iter().zip(gt));
    let n = all.n as f64;
    let buckets = Bucket::ALL
        .iter()
        .map(|&b| {
            let s = sums(
                pred.iter()
                    .zip(gt)
                    .filter(|(_, z)| Bucket::of_count(**z) == b),
            );
            let k = s.n as f64;
            BucketStats {
                bucket: b,
                n_frames: s.n,
                mae: (s.n > 0).then(|| s.abs / k),
                mse: (s.n > 0).then(|| (s.sq / k).sqrt()),
                nae: (s.rel_n > 0).then(|| s.rel / s.rel_n as f64),
            }
        })
        .collect();
    Ok(CountingStats {
        mae: all.abs / n,
        mse: (all.sq / n).sqrt(),
        nae: (all.rel_n > 0).then(|| all.rel / all.rel_n as f64),
        nae_excluded: all.n - all.rel_n,
        n_frames: all.n,
        buckets,
    })
}

/// Plain mean of squared differences.
pub fn mean_squared_difference(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch {
            pred: a.len(),
            gt: b.len(),
        });
    }
    if a.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_cases() {
        let s = counting_stats(&[110.0], &[100.0]).unwrap();
        assert_eq!((s.mae, s.mse, s.nae), (10.0, 10.0, Some(0.1)));
        let s = counting_stats(&[110.0, 190.0], &[100.0, 200.0]).unwrap();
        assert_eq!(s.mae, 10.0);
        assert_eq!(s.mse, 10.0);
        assert!((s.nae.unwrap() - 0.075).abs() < 1e-15);
    }

    #[test]
    fn zero_ground_truth_is_excluded_from_nae() {
        let s = counting_stats(&[3.0, 110.0], &[0.0, 100.0]).unwrap();
        assert_eq!(s.nae_excluded, 1);
        assert_eq!(s.nae, Some(0.1));
        let s = counting_stats(&[3.0], &[0.0]).unwrap();
        assert_eq!(s.nae, None);
    }

    #[test]
    fn bucket_edges() {
        assert_eq!(Bucket::of_count(0.0), Bucket::Sparse);
        assert_eq!(Bucket::of_count(399.0), Bucket::Sparse);
        assert_eq!(Bucket::of_count(400.0), Bucket::Medium);
        assert_eq!(Bucket::of_count(699.0), Bucket::Medium);
        assert_eq!(Bucket::of_count(700.0), Bucket::Congested);
        assert_eq!(Bucket::of_count(1000.0), Bucket::Congested);
    }

    #[test]
    fn errors() {
        assert_eq!(counting_stats(&[], &[]), Err(MetricError::Empty));
        assert!(matches!(
            counting_stats(&[1.0], &[]),
            Err(MetricError::LengthMismatch { .. })
        ));
    }
}
