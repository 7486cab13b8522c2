//! Summary statistics used by sweep aggregation and trend checks.

use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, OrderStatistics, RankTieBreaker, Statistics};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub se: f64,
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
}

impl Summary {
    /// `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let count = values.len();
        let mean = values.iter().mean();
        let se = if count > 1 {
            values.iter().std_dev() / (count as f64).sqrt()
        } else {
            0.0
        };
        let mut data = Data::new(values.to_vec());
        Some(Self {
            count,
            mean,
            se,
            median: data.median(),
            q10: data.quantile(0.1),
            q90: data.quantile(0.9),
        })
    }
}

/// Spearman rank correlation with average ranks for ties. A constant series
/// has no rank order and yields 0.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "series lengths differ");
    if xs.len() < 2 {
        return 0.0;
    }
    let rx = Data::new(xs.to_vec()).ranks(RankTieBreaker::Average);
    let ry = Data::new(ys.to_vec()).ranks(RankTieBreaker::Average);
    let sx = rx.iter().std_dev();
    let sy = ry.iter().std_dev();
    if sx == 0.0 || sy == 0.0 {
        return 0.0;
    }
    (rx.iter().covariance(ry.iter()) / (sx * sy)).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_single_value() {
        let s = Summary::of(&[2.5]).unwrap();
        assert_eq!((s.mean, s.median, s.q10, s.q90, s.se), (2.5, 2.5, 2.5, 2.5, 0.0));
        assert!(Summary::of(&[]).is_none());
    }

    #[test]
    fn summary_of_range() {
        let values: Vec<f64> = (1..=9).map(f64::from).collect();
        let s = Summary::of(&values).unwrap();
        assert_eq!(s.median, 5.0);
        assert_eq!(s.mean, 5.0);
        assert!(s.q10 < 2.0 && s.q90 > 8.0);
    }

    #[test]
    fn spearman_extremes() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&x, &[1.0, 4.0, 9.0, 16.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&x, &[5.0, 3.0, 2.0, -1.0]) + 1.0).abs() < 1e-15);
        assert_eq!(spearman(&x, &[7.0; 4]), 0.0);
        // one adjacent swap among four points
        assert!((spearman(&x, &[2.0, 1.0, 3.0, 4.0]) - 0.8).abs() < 1e-12);
    }
}
