//! Clustering algorithms: farthest-first traversal, k-medoids, CLARA,
//! k-means (plain and bisecting), and agglomerative linkage clustering.
//!
//! All algorithms are deterministic functions of (data, config): random
//! choices flow from the config seed, ties break toward the lowest index,
//! and parallel reductions combine in index order, so results are
//! bit-identical for any thread count.

mod agglomerative;
mod clara;
mod faft;
mod kmeans;
mod kmedoids;

pub use agglomerative::{agglomerative, Linkage};
pub use clara::{clara, clara_round_kmedoids_seed, ClaraOutcome};
pub use faft::{faft, faft_from};
pub use kmeans::{bisecting_kmeans, kmeans};
pub use kmedoids::kmedoids;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataio::FeatureMatrix;
use crate::metric::{self, Metric};
use crate::{Error, Result};

/// How initial medoids/centroids are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Init {
    /// Farthest-first traversal from a seeded random start.
    Faft,
    /// The k points with the smallest sum of distances to all others.
    Heuristic,
    /// Distance-squared-weighted sequential sampling.
    Kpp,
    /// Uniform sample without replacement.
    Random,
}

impl Init {
    pub fn name(self) -> &'static str {
        match self {
            Init::Faft => "faft",
            Init::Heuristic => "heuristic",
            Init::Kpp => "kpp",
            Init::Random => "random",
        }
    }
}

impl std::str::FromStr for Init {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "faft" => Ok(Init::Faft),
            "heuristic" => Ok(Init::Heuristic),
            "kpp" => Ok(Init::Kpp),
            "random" => Ok(Init::Random),
            other => Err(Error::Config(format!(
                "unknown init '{other}' (expected faft|heuristic|kpp|random)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClusteringConfig {
    pub k: usize,
    pub metric: Metric,
    pub init: Init,
    pub max_iter: usize,
    pub seed: u64,
    pub clara_subsamples: usize,
    /// Defaults to 40 + 2k when unset.
    pub clara_subsample_size: Option<usize>,
    /// Refine k-medoids with a best-improvement swap search after the
    /// alternating loop converges. Quadratic in n; intended for small n.
    pub pam_swap: bool,
    /// Largest n for which a full pairwise table is precomputed.
    pub pairwise_cap: usize,
}

impl ClusteringConfig {
    pub fn new(k: usize, metric: Metric) -> Self {
        ClusteringConfig {
            k,
            metric,
            init: Init::Heuristic,
            max_iter: 100,
            seed: 0,
            clara_subsamples: 5,
            clara_subsample_size: None,
            pam_swap: false,
            pairwise_cap: metric::DEFAULT_PAIRWISE_CAP,
        }
    }

    pub(crate) fn validate(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::Validation("cannot cluster an empty dataset".into()));
        }
        if self.k == 0 || self.k > n {
            return Err(Error::Config(format!(
                "k must satisfy 1 <= k <= n (k={}, n={n})",
                self.k
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

/// Cluster centers: sample indices (medoid family) or free vectors
/// (k-means family).
#[derive(Debug, Clone, PartialEq)]
pub enum Centers {
    Medoids(Vec<usize>),
    Centroids(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    pub centers: Centers,
    /// Cluster index per sample.
    pub assignment: Vec<usize>,
    /// Sum over samples of the distance (squared for k-means family) to
    /// the assigned center.
    pub cost: f64,
    pub cost_trace: Vec<f64>,
    pub converged: bool,
}

impl ClusteringResult {
    pub fn k(&self) -> usize {
        match &self.centers {
            Centers::Medoids(m) => m.len(),
            Centers::Centroids(c) => c.len(),
        }
    }

    pub fn medoid_ids(&self) -> Option<&[usize]> {
        match &self.centers {
            Centers::Medoids(m) => Some(m),
            Centers::Centroids(_) => None,
        }
    }

    pub fn is_medoid(&self, i: usize) -> bool {
        self.medoid_ids().is_some_and(|m| m.contains(&i))
    }
}

/// Distance access: a precomputed condensed table when n fits the cap,
/// direct recomputation otherwise.
pub(crate) enum DistSource<'a> {
    Table(metric::DistanceMatrix),
    Lazy {
        data: &'a FeatureMatrix,
        metric: Metric,
    },
}

impl<'a> DistSource<'a> {
    pub(crate) fn new(data: &'a FeatureMatrix, m: Metric, cap: usize) -> Result<Self> {
        if data.n() == 0 {
            return Err(Error::Validation("cannot cluster an empty dataset".into()));
        }
        if data.n() <= cap {
            Ok(DistSource::Table(metric::pairwise(data, m, cap)?))
        } else {
            Ok(DistSource::Lazy { data, metric: m })
        }
    }

    pub(crate) fn n(&self) -> usize {
        match self {
            DistSource::Table(t) => t.n(),
            DistSource::Lazy { data, .. } => data.n(),
        }
    }

    pub(crate) fn dist(&self, i: usize, j: usize) -> f64 {
        match self {
            DistSource::Table(t) => t.get(i, j),
            DistSource::Lazy { data, metric } => {
                metric::distance(data.row(i), data.row(j), *metric)
            }
        }
    }
}

/// Assigns every point to its nearest center (ties to the lowest cluster
/// index). Returns per-point cluster and the total cost.
pub(crate) fn assign_to_medoids(ds: &DistSource, medoids: &[usize]) -> (Vec<usize>, f64) {
    let per_point: Vec<(usize, f64)> = (0..ds.n())
        .into_par_iter()
        .map(|i| {
            let mut best = (0usize, f64::INFINITY);
            for (c, &m) in medoids.iter().enumerate() {
                let d = ds.dist(i, m);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best
        })
        .collect();
    let cost = per_point.iter().map(|&(_, d)| d).sum();
    (per_point.into_iter().map(|(c, _)| c).collect(), cost)
}

/// Initial center indices for the configured strategy; always k distinct
/// valid indices.
pub(crate) fn initial_centers(
    ds: &DistSource,
    k: usize,
    init: Init,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let n = ds.n();
    match init {
        Init::Random => rand::seq::index::sample(rng, n, k).into_vec(),
        Init::Faft => {
            let start = rng.random_range(0..n);
            faft::faft_core(ds, start, k)
        }
        Init::Heuristic => {
            let sums: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|i| (0..n).map(|j| ds.dist(i, j)).sum())
                .collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| sums[a].total_cmp(&sums[b]).then(a.cmp(&b)));
            order.truncate(k);
            order
        }
        Init::Kpp => {
            let mut chosen = Vec::with_capacity(k);
            let mut is_chosen = vec![false; n];
            let first = rng.random_range(0..n);
            chosen.push(first);
            is_chosen[first] = true;
            let mut dmin: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|i| ds.dist(i, first))
                .collect();
            while chosen.len() < k {
                let weights: Vec<f64> = dmin.iter().map(|d| d * d).collect();
                let total: f64 = weights.iter().sum();
                let next = if total > 0.0 {
                    let target = rng.random::<f64>() * total;
                    let mut cum = 0.0;
                    let mut pick = None;
                    for (i, w) in weights.iter().enumerate() {
                        cum += w;
                        if target < cum {
                            pick = Some(i);
                            break;
                        }
                    }
                    // target == total can fall through on rounding
                    pick.unwrap_or_else(|| {
                        (0..n).rev().find(|&i| !is_chosen[i]).unwrap()
                    })
                } else {
                    (0..n).find(|&i| !is_chosen[i]).unwrap()
                };
                // a rounding fallthrough can land on a chosen (weight-0) point
                let next = if is_chosen[next] {
                    (0..n).find(|&i| !is_chosen[i]).unwrap()
                } else {
                    next
                };
                chosen.push(next);
                is_chosen[next] = true;
                for i in 0..n {
                    dmin[i] = dmin[i].min(ds.dist(i, next));
                }
            }
            chosen
        }
    }
}

pub(crate) fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_points(xs: &[f64]) -> FeatureMatrix {
        FeatureMatrix::from_rows(xs.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    #[test]
    fn inits_produce_k_distinct_indices() {
        let data = line_points(&[0.0, 0.0, 1.0, 1.0, 5.0, 5.0, 9.0]);
        let ds = DistSource::new(&data, Metric::Euclidean, 100).unwrap();
        for init in [Init::Faft, Init::Heuristic, Init::Kpp, Init::Random] {
            for seed in 0..20 {
                let mut rng = seeded_rng(seed);
                let centers = initial_centers(&ds, 4, init, &mut rng);
                assert_eq!(centers.len(), 4);
                let mut sorted = centers.clone();
                sorted.sort_unstable();
                sorted.dedup();
                assert_eq!(sorted.len(), 4, "{init:?} seed {seed}: {centers:?}");
                assert!(sorted.iter().all(|&i| i < 7));
            }
        }
    }

    #[test]
    fn kpp_survives_all_duplicate_points() {
        let data = line_points(&[3.0, 3.0, 3.0, 3.0]);
        let ds = DistSource::new(&data, Metric::Euclidean, 100).unwrap();
        let mut rng = seeded_rng(1);
        let centers = initial_centers(&ds, 3, Init::Kpp, &mut rng);
        let mut sorted = centers;
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 3);
    }

    #[test]
    fn heuristic_picks_densest_points() {
        // 0 and 1 sit in the middle of the mass
        let data = line_points(&[4.0, 5.0, 0.0, 9.0]);
        let ds = DistSource::new(&data, Metric::Euclidean, 100).unwrap();
        let mut rng = seeded_rng(0);
        let centers = initial_centers(&ds, 2, Init::Heuristic, &mut rng);
        assert_eq!(centers, vec![0, 1]);
    }

    #[test]
    fn assignment_breaks_ties_to_lowest_cluster() {
        let data = line_points(&[0.0, 2.0, 1.0]);
        let ds = DistSource::new(&data, Metric::Euclidean, 100).unwrap();
        // point 2 is equidistant to both medoids
        let (assign, cost) = assign_to_medoids(&ds, &[0, 1]);
        assert_eq!(assign, vec![0, 1, 0]);
        assert!((cost - 1.0).abs() < 1e-12);
    }
}
