//! Distance functions and condensed pairwise tables.
//!
//! Five metrics are supported: three p-norms (euclidean, manhattan,
//! chebyshev) and two similarity-derived distances (cosine, pearson).
//! The similarity-derived ones are made total so clustering loops never
//! hit an undefined value: a zero vector has cosine distance 1 to any
//! nonzero vector and 0 to another zero vector; a constant vector has
//! pearson distance 1 to everything (its correlation is taken as 0).
//! Both degenerate cases are logged at debug level.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::dataio::FeatureMatrix;
use crate::{Error, Result};

/// Maximum number of rows for which a full pairwise table is built.
pub const DEFAULT_PAIRWISE_CAP: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Euclidean,
    Manhattan,
    Chebyshev,
    Cosine,
    Pearson,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Euclidean,
        Metric::Manhattan,
        Metric::Chebyshev,
        Metric::Cosine,
        Metric::Pearson,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Manhattan => "manhattan",
            Metric::Chebyshev => "chebyshev",
            Metric::Cosine => "cosine",
            Metric::Pearson => "pearson",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "manhattan" => Ok(Metric::Manhattan),
            "chebyshev" => Ok(Metric::Chebyshev),
            "cosine" => Ok(Metric::Cosine),
            "pearson" => Ok(Metric::Pearson),
            other => Err(Error::Config(format!(
                "unknown metric '{other}' (expected euclidean|manhattan|chebyshev|cosine|pearson)"
            ))),
        }
    }
}

/// Distance between two feature vectors.
///
/// Panics if the lengths differ, or if `m` is pearson and the vectors are
/// shorter than 2.
pub fn distance(a: &[f64], b: &[f64], m: Metric) -> f64 {
    assert_eq!(a.len(), b.len(), "distance: vector lengths differ");
    match m {
        Metric::Euclidean => a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt(),
        Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        Metric::Chebyshev => a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max),
        Metric::Cosine => cosine_distance(a, b),
        Metric::Pearson => pearson_distance(a, b),
    }
}

fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let norm_a = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let norm_b = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm_a == 0.0 || norm_b == 0.0 {
        log::debug!("cosine distance on zero vector");
        return if norm_a == norm_b { 0.0 } else { 1.0 };
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (1.0 - dot / (norm_a * norm_b)).clamp(0.0, 2.0)
}

fn pearson_distance(a: &[f64], b: &[f64]) -> f64 {
    assert!(a.len() >= 2, "pearson distance needs vectors of length >= 2");
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (x, y) in a.iter().zip(b) {
        let da = x - mean_a;
        let db = y - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        log::debug!("pearson distance on constant vector");
        return 1.0;
    }
    let r = cov / (var_a.sqrt() * var_b.sqrt());
    (1.0 - r).clamp(0.0, 2.0)
}

/// Symmetric pairwise distance table stored as the condensed upper triangle.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Distance between rows `i` and `j`; zero on the diagonal.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.n && j < self.n);
        if i == j {
            return 0.0;
        }
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        self.data[lo * self.n - lo * (lo + 1) / 2 + (hi - lo - 1)]
    }
}

/// Builds the full pairwise table for `data` under metric `m`.
///
/// Rows are processed in parallel; the result is identical for any thread
/// count. Returns [`Error::Capacity`] when `data.n()` exceeds `cap`.
pub fn pairwise(data: &FeatureMatrix, m: Metric, cap: usize) -> Result<DistanceMatrix> {
    let n = data.n();
    if n < 1 {
        return Err(Error::Validation("pairwise: empty matrix".into()));
    }
    if n > cap {
        return Err(Error::Capacity { n, cap });
    }
    let rows: Vec<Vec<f64>> = (0..n.saturating_sub(1))
        .into_par_iter()
        .map(|i| {
            let a = data.row(i);
            (i + 1..n).map(|j| distance(a, data.row(j), m)).collect()
        })
        .collect();
    let mut flat = Vec::with_capacity(n * (n - 1) / 2);
    for row in rows {
        flat.extend(row);
    }
    Ok(DistanceMatrix { n, data: flat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn euclidean_3_4_5() {
        assert_relative_eq!(
            distance(&[0.0, 0.0], &[3.0, 4.0], Metric::Euclidean),
            5.0
        );
    }

    #[test]
    fn self_distance_is_zero() {
        let x = [1.5, -2.0, 0.25];
        for m in [Metric::Euclidean, Metric::Manhattan, Metric::Chebyshev] {
            assert_eq!(distance(&x, &x, m), 0.0);
        }
        assert_eq!(distance(&x, &x, Metric::Cosine), 0.0);
        assert_eq!(distance(&x, &x, Metric::Pearson), 0.0);
    }

    #[test]
    fn pearson_anticorrelation_is_two() {
        assert_relative_eq!(
            distance(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0], Metric::Pearson),
            2.0
        );
    }

    #[test]
    fn cosine_zero_vector_convention() {
        let zero = [0.0, 0.0];
        let x = [1.0, 2.0];
        assert_eq!(distance(&zero, &x, Metric::Cosine), 1.0);
        assert_eq!(distance(&x, &zero, Metric::Cosine), 1.0);
        assert_eq!(distance(&zero, &zero, Metric::Cosine), 0.0);
    }

    #[test]
    fn pearson_constant_vector_convention() {
        let c = [2.0, 2.0, 2.0];
        let x = [1.0, 5.0, 3.0];
        assert_eq!(distance(&c, &x, Metric::Pearson), 1.0);
        assert_eq!(distance(&x, &c, Metric::Pearson), 1.0);
        assert_eq!(distance(&c, &c, Metric::Pearson), 1.0);
    }

    #[test]
    fn manhattan_and_chebyshev() {
        let a = [1.0, -1.0, 2.0];
        let b = [0.0, 1.0, -1.0];
        assert_relative_eq!(distance(&a, &b, Metric::Manhattan), 6.0);
        assert_relative_eq!(distance(&a, &b, Metric::Chebyshev), 3.0);
    }

    #[test]
    fn parse_roundtrip() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!("mahalanobis".parse::<Metric>().is_err());
    }

    #[test]
    fn pairwise_matches_direct_calls() {
        let data = FeatureMatrix::from_rows(vec![
            vec![0.0, 0.0],
            vec![3.0, 4.0],
            vec![-1.0, 1.0],
            vec![2.0, 2.0],
        ])
        .unwrap();
        let t = pairwise(&data, Metric::Euclidean, 100).unwrap();
        for i in 0..4 {
            assert_eq!(t.get(i, i), 0.0);
            for j in 0..4 {
                assert_eq!(t.get(i, j), t.get(j, i));
                assert_eq!(
                    t.get(i, j),
                    distance(data.row(i), data.row(j), Metric::Euclidean)
                );
            }
        }
    }

    #[test]
    fn pairwise_respects_cap() {
        let data =
            FeatureMatrix::from_rows(vec![vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        match pairwise(&data, Metric::Euclidean, 2) {
            Err(Error::Capacity { n: 3, cap: 2 }) => {}
            other => panic!("expected capacity error, got {other:?}"),
        }
    }
}
