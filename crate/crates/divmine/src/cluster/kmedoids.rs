//! Alternating (Voronoi-style) k-medoids with optional swap refinement.

use rayon::prelude::*;

use super::{
    assign_to_medoids, initial_centers, seeded_rng, Centers, ClusteringConfig, ClusteringResult,
    DistSource,
};
use crate::dataio::FeatureMatrix;
use crate::Result;

/// Runs k-medoids: assign points to nearest medoids, recompute each
/// cluster's medoid as the member minimizing the intra-cluster distance
/// sum, repeat until the medoid set is stable or max_iter is reached.
///
/// An empty cluster is repaired by re-seeding its medoid at the point
/// farthest from the stale medoid. With `config.pam_swap` a
/// best-improvement swap search runs after the alternating loop and
/// terminates at a swap-local optimum.
pub fn kmedoids(data: &FeatureMatrix, config: &ClusteringConfig) -> Result<ClusteringResult> {
    let ds = DistSource::new(data, config.metric, config.pairwise_cap)?;
    kmedoids_on(&ds, config)
}

pub(crate) fn kmedoids_on(ds: &DistSource, config: &ClusteringConfig) -> Result<ClusteringResult> {
    let n = ds.n();
    config.validate(n)?;
    let k = config.k;
    let mut rng = seeded_rng(config.seed);
    let mut medoids = initial_centers(ds, k, config.init, &mut rng);
    let (mut assignment, mut cost) = assign_to_medoids(ds, &medoids);
    let mut trace = vec![cost];
    let mut converged = false;

    for _ in 0..config.max_iter {
        let new_medoids = update_medoids(ds, &assignment, &medoids);
        let (na, nc) = assign_to_medoids(ds, &new_medoids);
        trace.push(nc);
        let stable = new_medoids == medoids;
        medoids = new_medoids;
        assignment = na;
        cost = nc;
        if stable {
            converged = true;
            break;
        }
    }

    if config.pam_swap {
        pam_swap_refine(ds, k, &mut medoids, &mut assignment, &mut cost, &mut trace);
        converged = true;
    }

    Ok(ClusteringResult {
        centers: Centers::Medoids(medoids),
        assignment,
        cost,
        cost_trace: trace,
        converged,
    })
}

/// New medoid per cluster, keeping cluster identity. Clusters that lost
/// all members are re-seeded at the point farthest from their stale
/// medoid (ties to the lowest index), avoiding indices already in use.
fn update_medoids(ds: &DistSource, assignment: &[usize], medoids: &[usize]) -> Vec<usize> {
    let k = medoids.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &c) in assignment.iter().enumerate() {
        members[c].push(i);
    }

    let mut new_medoids: Vec<Option<usize>> = members
        .par_iter()
        .map(|m| {
            if m.is_empty() {
                return None;
            }
            let mut best = (f64::INFINITY, usize::MAX);
            for &cand in m {
                let sum: f64 = m.iter().map(|&x| ds.dist(cand, x)).sum();
                if sum < best.0 {
                    best = (sum, cand);
                }
            }
            Some(best.1)
        })
        .collect();

    let mut used: Vec<bool> = vec![false; ds.n()];
    for m in new_medoids.iter().flatten() {
        used[*m] = true;
    }
    for c in 0..k {
        if new_medoids[c].is_some() {
            continue;
        }
        let stale = medoids[c];
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for i in 0..ds.n() {
            if used[i] {
                continue;
            }
            let d = ds.dist(i, stale);
            if d > best.0 {
                best = (d, i);
            }
        }
        // all points already used can only happen when k == n
        let pick = if best.1 == usize::MAX { stale } else { best.1 };
        used[pick] = true;
        new_medoids[c] = Some(pick);
    }
    new_medoids.into_iter().map(Option::unwrap).collect()
}

fn swap_cost(ds: &DistSource, medoids: &[usize]) -> f64 {
    (0..ds.n())
        .into_par_iter()
        .map(|i| {
            medoids
                .iter()
                .map(|&m| ds.dist(i, m))
                .fold(f64::INFINITY, f64::min)
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

/// Best-improvement swap search; O(n^2 k) per sweep.
fn pam_swap_refine(
    ds: &DistSource,
    k: usize,
    medoids: &mut Vec<usize>,
    assignment: &mut Vec<usize>,
    cost: &mut f64,
    trace: &mut Vec<f64>,
) {
    let n = ds.n();
    loop {
        let tol = 1e-12 * cost.max(1.0);
        let mut best: Option<(f64, usize, usize)> = None;
        for slot in 0..k {
            for x in 0..n {
                if medoids.contains(&x) {
                    continue;
                }
                let mut trial = medoids.clone();
                trial[slot] = x;
                let c = swap_cost(ds, &trial);
                if c < *cost - tol && best.is_none_or(|(bc, _, _)| c < bc) {
                    best = Some((c, slot, x));
                }
            }
        }
        match best {
            Some((_, slot, x)) => {
                medoids[slot] = x;
                let (na, nc) = assign_to_medoids(ds, medoids);
                *assignment = na;
                *cost = nc;
                trace.push(nc);
            }
            None => return,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::Init;
    use crate::metric::Metric;

    fn line_points(xs: &[f64]) -> FeatureMatrix {
        FeatureMatrix::from_rows(xs.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    fn cfg(k: usize, seed: u64) -> ClusteringConfig {
        let mut c = ClusteringConfig::new(k, Metric::Euclidean);
        c.seed = seed;
        c
    }

    #[test]
    fn two_tight_pairs() {
        let data = line_points(&[0.0, 1.0, 9.0, 10.0]);
        for seed in 0..10 {
            let res = kmedoids(&data, &cfg(2, seed)).unwrap();
            let mut m = res.medoid_ids().unwrap().to_vec();
            m.sort_unstable();
            assert!(m == [0, 2] || m == [0, 3] || m == [1, 2] || m == [1, 3], "{m:?}");
            assert!((res.cost - 2.0).abs() < 1e-12);
            assert!(res.converged);
        }
    }

    #[test]
    fn k_equals_n_has_zero_cost() {
        let data = line_points(&[1.0, 2.0, 5.0, 9.0]);
        let res = kmedoids(&data, &cfg(4, 3)).unwrap();
        assert_eq!(res.cost, 0.0);
        let mut m = res.medoid_ids().unwrap().to_vec();
        m.sort_unstable();
        assert_eq!(m, vec![0, 1, 2, 3]);
    }

    #[test]
    fn cost_trace_non_increasing_and_converged_means_flat_tail() {
        let data = line_points(&[0.0, 0.5, 1.0, 4.0, 4.5, 5.0, 9.0, 9.5, 10.0, 2.0]);
        for init in [Init::Faft, Init::Heuristic, Init::Kpp, Init::Random] {
            for seed in 0..10 {
                let mut c = cfg(3, seed);
                c.init = init;
                let res = kmedoids(&data, &c).unwrap();
                for w in res.cost_trace.windows(2) {
                    assert!(w[1] <= w[0] + 1e-12, "{init:?}/{seed}: {:?}", res.cost_trace);
                }
                if res.converged {
                    let t = &res.cost_trace;
                    assert!(t.len() >= 2);
                    assert_eq!(t[t.len() - 1], t[t.len() - 2]);
                }
            }
        }
    }

    #[test]
    fn medoids_are_distinct_and_result_is_a_fixed_point() {
        let data = line_points(&[0.0, 0.1, 0.2, 5.0, 5.1, 9.0, 9.1, 9.2, 3.0, 7.0]);
        let res = kmedoids(&data, &cfg(4, 11)).unwrap();
        let medoids = res.medoid_ids().unwrap();
        let mut sorted = medoids.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 4);
        let ds = DistSource::new(&data, Metric::Euclidean, 100).unwrap();
        let (again, cost) = assign_to_medoids(&ds, medoids);
        assert_eq!(again, res.assignment);
        assert!((cost - res.cost).abs() < 1e-12);
    }

    #[test]
    fn deterministic_per_seed() {
        let data = line_points(&[0.0, 2.0, 3.0, 7.0, 8.0, 11.0, -4.0]);
        let a = kmedoids(&data, &cfg(3, 5)).unwrap();
        let b = kmedoids(&data, &cfg(3, 5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn duplicate_medoid_coordinates_get_repaired() {
        // duplicate points force an assignment tie into the lower cluster
        let data = line_points(&[4.0, 4.0, 0.0, 8.0]);
        let mut c = cfg(2, 2);
        c.init = Init::Random;
        for seed in 0..20 {
            c.seed = seed;
            let res = kmedoids(&data, &c).unwrap();
            let m = res.medoid_ids().unwrap();
            assert_eq!(m.len(), 2);
            assert_ne!(m[0], m[1]);
        }
    }

    #[test]
    fn pam_swap_strictly_improves_a_stuck_fixed_point() {
        // Alternating k-medoids from medoids {0, 2} is already stable here
        // (cost 99) while swapping to {x, 3} with x in {0,1,2} costs ~3.
        let data = line_points(&[0.0, 1.0, 2.0, 100.0]);
        let mut c = cfg(2, 0);
        c.init = Init::Heuristic; // picks the two central points 1, 2
        let plain = kmedoids(&data, &c).unwrap();
        c.pam_swap = true;
        let refined = kmedoids(&data, &c).unwrap();
        assert!(refined.cost <= plain.cost);
        assert!((refined.cost - 2.0).abs() < 1e-12, "cost {}", refined.cost);
        for w in refined.cost_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }
}
