//! Lloyd's k-means and bisecting k-means (squared-euclidean inertia).

use rayon::prelude::*;

use super::{initial_centers, seeded_rng, Centers, ClusteringConfig, ClusteringResult, DistSource};
use crate::dataio::FeatureMatrix;
use crate::derive_seed;
use crate::metric::Metric;
use crate::{Error, Result};

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_euclidean(config: &ClusteringConfig) -> Result<()> {
    if config.metric != Metric::Euclidean {
        return Err(Error::Config(format!(
            "k-means family is squared-euclidean; got metric '{}'",
            config.metric
        )));
    }
    Ok(())
}

/// Assigns rows to nearest centroids by squared euclidean distance
/// (ties to the lowest cluster index); returns assignment and inertia.
fn assign_to_centroids(data: &FeatureMatrix, centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let per_point: Vec<(usize, f64)> = (0..data.n())
        .into_par_iter()
        .map(|i| {
            let row = data.row(i);
            let mut best = (0usize, f64::INFINITY);
            for (c, cen) in centroids.iter().enumerate() {
                let d = sq_dist(row, cen);
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

/// Per-cluster means; empty clusters are re-seeded at the point farthest
/// from the stale centroid (ties to the lowest index), one point each.
fn update_centroids(
    data: &FeatureMatrix,
    assignment: &[usize],
    old: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let k = old.len();
    let d = data.dim();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (i, &c) in assignment.iter().enumerate() {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(data.row(i)) {
            *s += v;
        }
    }
    let mut taken = vec![false; data.n()];
    let mut out = Vec::with_capacity(k);
    for c in 0..k {
        if counts[c] > 0 {
            let inv = 1.0 / counts[c] as f64;
            out.push(sums[c].iter().map(|s| s * inv).collect());
        } else {
            let mut best = (f64::NEG_INFINITY, 0usize);
            for i in 0..data.n() {
                if taken[i] {
                    continue;
                }
                let dist = sq_dist(data.row(i), &old[c]);
                if dist > best.0 {
                    best = (dist, i);
                }
            }
            taken[best.1] = true;
            out.push(data.row(best.1).to_vec());
        }
    }
    out
}

/// Standard Lloyd iterations from the configured init; the trace records
/// inertia after every assignment and never increases.
pub fn kmeans(data: &FeatureMatrix, config: &ClusteringConfig) -> Result<ClusteringResult> {
    check_euclidean(config)?;
    config.validate(data.n())?;
    let ds = DistSource::Lazy {
        data,
        metric: Metric::Euclidean,
    };
    let mut rng = seeded_rng(config.seed);
    let seeds = initial_centers(&ds, config.k, config.init, &mut rng);
    let mut centroids: Vec<Vec<f64>> = seeds.iter().map(|&i| data.row(i).to_vec()).collect();

    let (mut assignment, mut cost) = assign_to_centroids(data, &centroids);
    let mut trace = vec![cost];
    let mut converged = false;
    for _ in 0..config.max_iter {
        let new_centroids = update_centroids(data, &assignment, &centroids);
        let (na, nc) = assign_to_centroids(data, &new_centroids);
        trace.push(nc);
        let stable = new_centroids == centroids;
        centroids = new_centroids;
        assignment = na;
        cost = nc;
        if stable {
            converged = true;
            break;
        }
    }

    Ok(ClusteringResult {
        centers: Centers::Centroids(centroids),
        assignment,
        cost,
        cost_trace: trace,
        converged,
    })
}

fn cluster_inertia(data: &FeatureMatrix, members: &[usize]) -> f64 {
    let d = data.dim();
    let mut mean = vec![0.0; d];
    for &i in members {
        for (m, v) in mean.iter_mut().zip(data.row(i)) {
            *m += v;
        }
    }
    let inv = 1.0 / members.len() as f64;
    for m in &mut mean {
        *m *= inv;
    }
    members.iter().map(|&i| sq_dist(data.row(i), &mean)).sum()
}

/// Splits the largest-inertia cluster with 2-means until k clusters exist.
///
/// The final partition comes from the split tree; unlike plain k-means it
/// is not necessarily a Voronoi partition of its centroids. The trace
/// holds total inertia after each split and never increases.
pub fn bisecting_kmeans(data: &FeatureMatrix, config: &ClusteringConfig) -> Result<ClusteringResult> {
    check_euclidean(config)?;
    config.validate(data.n())?;
    let n = data.n();

    let mut clusters: Vec<Vec<usize>> = vec![(0..n).collect()];
    let mut inertias = vec![cluster_inertia(data, &clusters[0])];
    let mut trace = vec![inertias[0]];
    let mut split_no = 0usize;

    while clusters.len() < config.k {
        // largest-inertia splittable cluster, lowest index on ties
        let target = clusters
            .iter()
            .enumerate()
            .filter(|(_, m)| m.len() >= 2)
            .max_by(|(ia, _), (ib, _)| {
                inertias[*ia]
                    .total_cmp(&inertias[*ib])
                    .then(ib.cmp(ia))
            })
            .map(|(i, _)| i)
            .expect("k <= n guarantees a splittable cluster");

        let members = clusters[target].clone();
        let sub = data.rows_subset(&members);
        let mut sub_cfg = config.clone();
        sub_cfg.k = 2;
        sub_cfg.seed = derive_seed(config.seed, "bisect-split", &split_no.to_string());
        let sub_res = kmeans(&sub, &sub_cfg)?;

        let mut part0: Vec<usize> = Vec::new();
        let mut part1: Vec<usize> = Vec::new();
        for (local, &global) in members.iter().enumerate() {
            if sub_res.assignment[local] == 0 {
                part0.push(global);
            } else {
                part1.push(global);
            }
        }
        if part0.is_empty() || part1.is_empty() {
            // all-duplicate cluster: peel off the lowest-index member
            part0 = vec![members[0]];
            part1 = members[1..].to_vec();
        }
        // the side holding the lowest global index keeps the slot
        if part1[0] < part0[0] {
            std::mem::swap(&mut part0, &mut part1);
        }
        clusters[target] = part0;
        clusters.push(part1);
        inertias[target] = cluster_inertia(data, &clusters[target]);
        inertias.push(cluster_inertia(data, clusters.last().unwrap()));
        trace.push(inertias.iter().sum());
        split_no += 1;
    }

    let mut assignment = vec![0usize; n];
    let mut centroids = Vec::with_capacity(clusters.len());
    for (c, members) in clusters.iter().enumerate() {
        let d = data.dim();
        let mut mean = vec![0.0; d];
        for &i in members {
            assignment[i] = c;
            for (m, v) in mean.iter_mut().zip(data.row(i)) {
                *m += v;
            }
        }
        let inv = 1.0 / members.len() as f64;
        for m in &mut mean {
            *m *= inv;
        }
        centroids.push(mean);
    }
    let cost = inertias.iter().sum();

    Ok(ClusteringResult {
        centers: Centers::Centroids(centroids),
        assignment,
        cost,
        cost_trace: trace,
        converged: true,
    })
}
