//! Agglomerative clustering via global-minimum merges under a linkage rule.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{Centers, ClusteringResult};
use crate::dataio::FeatureMatrix;
use crate::metric::{self, Metric};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Linkage {
    Single,
    Complete,
    Average,
}

impl Linkage {
    pub fn name(self) -> &'static str {
        match self {
            Linkage::Single => "single",
            Linkage::Complete => "complete",
            Linkage::Average => "average",
        }
    }
}

impl std::str::FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Linkage::Single),
            "complete" => Ok(Linkage::Complete),
            "average" => Ok(Linkage::Average),
            other => Err(Error::Config(format!(
                "unknown linkage '{other}' (expected single|complete|average)"
            ))),
        }
    }
}

/// Merge candidate ordered by (distance, lower slot, higher slot).
struct Cand {
    d: f64,
    a: usize,
    b: usize,
}

impl PartialEq for Cand {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Cand {}
impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cand {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed so the max-heap pops the smallest candidate
        other
            .d
            .total_cmp(&self.d)
            .then(other.a.cmp(&self.a))
            .then(other.b.cmp(&self.b))
    }
}

struct SlotTable {
    n: usize,
    d: Vec<f64>,
}

impl SlotTable {
    fn idx(&self, a: usize, b: usize) -> usize {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        lo * self.n - lo * (lo + 1) / 2 + (hi - lo - 1)
    }
    fn get(&self, a: usize, b: usize) -> f64 {
        self.d[self.idx(a, b)]
    }
    fn set(&mut self, a: usize, b: usize, v: f64) {
        let i = self.idx(a, b);
        self.d[i] = v;
    }
}

/// Merges the globally closest pair of clusters until k remain.
///
/// Each cluster occupies the slot of its lowest member index, so the
/// (distance, slot, slot) ordering realizes lowest-index tie-breaking.
/// The result's assignment comes from the merge tree (not from nearest-
/// medoid reassignment); the reported medoids minimize the intra-cluster
/// distance sum and the cost sums distances to them.
pub fn agglomerative(
    data: &FeatureMatrix,
    k: usize,
    m: Metric,
    linkage: Linkage,
) -> Result<ClusteringResult> {
    let n = data.n();
    if n == 0 {
        return Err(Error::Validation("cannot cluster an empty dataset".into()));
    }
    if k == 0 || k > n {
        return Err(Error::Config(format!(
            "k must satisfy 1 <= k <= n (k={k}, n={n})"
        )));
    }
    let base = metric::pairwise(data, m, metric::DEFAULT_PAIRWISE_CAP)?;

    let mut table = SlotTable {
        n,
        d: (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| base.get(i, j))
            .collect(),
    };
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut heap = BinaryHeap::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            heap.push(Cand {
                d: table.get(i, j),
                a: i,
                b: j,
            });
        }
    }

    let mut remaining = n;
    while remaining > k {
        let Cand { d, a, b } = heap.pop().expect("merge candidates remain");
        if !active[a] || !active[b] || table.get(a, b).to_bits() != d.to_bits() {
            continue;
        }
        // merge b into a (a < b by construction)
        let (na, nb) = (size[a] as f64, size[b] as f64);
        for x in 0..n {
            if !active[x] || x == a || x == b {
                continue;
            }
            let dax = table.get(a, x);
            let dbx = table.get(b, x);
            let nd = match linkage {
                Linkage::Single => dax.min(dbx),
                Linkage::Complete => dax.max(dbx),
                Linkage::Average => (na * dax + nb * dbx) / (na + nb),
            };
            table.set(a, x, nd);
            let (lo, hi) = if a < x { (a, x) } else { (x, a) };
            heap.push(Cand { d: nd, a: lo, b: hi });
        }
        active[b] = false;
        size[a] += size[b];
        let moved = std::mem::take(&mut members[b]);
        members[a].extend(moved);
        remaining -= 1;
    }

    let mut assignment = vec![0usize; n];
    let mut medoids = Vec::with_capacity(k);
    let slots: Vec<usize> = (0..n).filter(|&s| active[s]).collect();
    for (c, &s) in slots.iter().enumerate() {
        let mut medoid = (f64::INFINITY, usize::MAX);
        let mut sorted = members[s].clone();
        sorted.sort_unstable();
        for &cand in &sorted {
            let sum: f64 = sorted.iter().map(|&x| base.get(cand, x)).sum();
            if sum < medoid.0 {
                medoid = (sum, cand);
            }
        }
        medoids.push(medoid.1);
        for &i in &sorted {
            assignment[i] = c;
        }
    }
    let cost: f64 = (0..n).map(|i| base.get(i, medoids[assignment[i]])).sum();

    Ok(ClusteringResult {
        centers: Centers::Medoids(medoids),
        assignment,
        cost,
        cost_trace: vec![cost],
        converged: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_points(xs: &[f64]) -> FeatureMatrix {
        FeatureMatrix::from_rows(xs.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    #[test]
    fn collinear_hand_trace() {
        let data = line_points(&[0.0, 1.0, 5.0]);
        let res = agglomerative(&data, 2, Metric::Euclidean, Linkage::Average).unwrap();
        assert_eq!(res.assignment, vec![0, 0, 1]);
    }

    #[test]
    fn k_equals_n_gives_singletons() {
        let data = line_points(&[3.0, 1.0, 4.0, 1.5]);
        let res = agglomerative(&data, 4, Metric::Euclidean, Linkage::Average).unwrap();
        assert_eq!(res.assignment, vec![0, 1, 2, 3]);
        assert_eq!(res.cost, 0.0);
    }

    #[test]
    fn k_too_large_is_config_error() {
        let data = line_points(&[0.0, 1.0]);
        assert!(matches!(
            agglomerative(&data, 3, Metric::Euclidean, Linkage::Average),
            Err(Error::Config(_))
        ));
    }

    /// Naive reference: recompute every inter-cluster linkage from raw
    /// pairwise distances at each step and merge the global minimum.
    fn naive_merge_sequence(
        data: &FeatureMatrix,
        m: Metric,
        linkage: Linkage,
        k: usize,
    ) -> (Vec<(usize, usize)>, Vec<Vec<usize>>) {
        let n = data.n();
        let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        let mut merges = Vec::new();
        while clusters.len() > k {
            let mut best: Option<(f64, usize, usize)> = None;
            for a in 0..clusters.len() {
                for b in (a + 1)..clusters.len() {
                    let mut ds = Vec::new();
                    for &i in &clusters[a] {
                        for &j in &clusters[b] {
                            ds.push(metric::distance(data.row(i), data.row(j), m));
                        }
                    }
                    let d = match linkage {
                        Linkage::Single => ds.iter().cloned().fold(f64::INFINITY, f64::min),
                        Linkage::Complete => ds.iter().cloned().fold(0.0, f64::max),
                        Linkage::Average => ds.iter().sum::<f64>() / ds.len() as f64,
                    };
                    // clusters stay sorted by lowest member, so (a, b)
                    // scan order realizes lowest-index tie-breaking
                    if best.is_none_or(|(bd, _, _)| d < bd) {
                        best = Some((d, a, b));
                    }
                }
            }
            let (_, a, b) = best.unwrap();
            merges.push((clusters[a][0], clusters[b][0]));
            let other = clusters.remove(b);
            clusters[a].extend(other);
            clusters[a].sort_unstable();
            clusters.sort_by_key(|c| c[0]);
        }
        (merges, clusters)
    }

    #[test]
    fn merge_partition_matches_naive_recomputation() {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..2).map(|_| rng.random::<f64>() * 4.0).collect())
            .collect();
        let data = FeatureMatrix::from_rows(rows).unwrap();
        for linkage in [Linkage::Single, Linkage::Complete, Linkage::Average] {
            for k in [1, 2, 3, 5] {
                let res = agglomerative(&data, k, Metric::Euclidean, linkage).unwrap();
                let (_, naive) = naive_merge_sequence(&data, Metric::Euclidean, linkage, k);
                // same partition: compare member sets per cluster id order
                let mut got: Vec<Vec<usize>> = vec![Vec::new(); k];
                for (i, &c) in res.assignment.iter().enumerate() {
                    got[c].push(i);
                }
                assert_eq!(got, naive, "linkage {linkage:?} k {k}");
            }
        }
    }

    #[test]
    fn works_under_all_five_metrics() {
        let data = FeatureMatrix::from_rows(vec![
            vec![1.0, 0.0, 2.0],
            vec![1.1, 0.1, 2.1],
            vec![-3.0, 5.0, 0.0],
            vec![-3.1, 5.2, 0.1],
        ])
        .unwrap();
        for m in Metric::ALL {
            let res = agglomerative(&data, 2, m, Linkage::Average).unwrap();
            assert_eq!(res.assignment[0], res.assignment[1], "{m}");
            assert_eq!(res.assignment[2], res.assignment[3], "{m}");
            assert_ne!(res.assignment[0], res.assignment[2], "{m}");
        }
    }
}
