//! CLARA: k-medoids on subsamples, scored on the full dataset.

use super::{assign_to_medoids, kmedoids::kmedoids_on, Centers, ClusteringConfig, ClusteringResult, DistSource};
use crate::dataio::FeatureMatrix;
use crate::derive_seed;
use crate::{Error, Result};

/// Result of a CLARA run plus per-round diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ClaraOutcome {
    /// Best round's medoids mapped to full-data indices, with all n points
    /// assigned; `cost` is the full-data cost, `cost_trace` the winning
    /// round's subsample trace.
    pub result: ClusteringResult,
    /// Full-data cost of every round, in round order.
    pub round_costs: Vec<f64>,
    pub best_round: usize,
}

/// Seed handed to the k-medoids run inside CLARA round `round`.
///
/// Exposed so callers can reproduce a single round in isolation.
pub fn clara_round_kmedoids_seed(seed: u64, round: usize) -> u64 {
    derive_seed(seed, "clara-medoids", &round.to_string())
}

/// Runs `config.clara_subsamples` rounds: draw a subsample (the whole
/// dataset when the configured size reaches n), cluster it with k-medoids,
/// assign all n points to those medoids, and keep the round with the
/// lowest full-data cost (earliest round wins ties).
pub fn clara(data: &FeatureMatrix, config: &ClusteringConfig) -> Result<ClaraOutcome> {
    let n = data.n();
    config.validate(n)?;
    let s = config.clara_subsample_size.unwrap_or(40 + 2 * config.k);
    if s < config.k {
        return Err(Error::Config(format!(
            "clara_subsample_size {s} is smaller than k {}",
            config.k
        )));
    }
    if config.clara_subsamples == 0 {
        return Err(Error::Config("clara_subsamples must be >= 1".into()));
    }

    let full = DistSource::new(data, config.metric, config.pairwise_cap)?;
    let mut best: Option<(ClusteringResult, usize)> = None;
    let mut round_costs = Vec::with_capacity(config.clara_subsamples);
    for round in 0..config.clara_subsamples {
        let subset: Vec<usize> = if s >= n {
            (0..n).collect()
        } else {
            let mut rng = super::seeded_rng(derive_seed(config.seed, "clara-draw", &round.to_string()));
            let mut idx = rand::seq::index::sample(&mut rng, n, s).into_vec();
            idx.sort_unstable();
            idx
        };
        let sub_data = data.rows_subset(&subset);
        let sub_ds = DistSource::new(&sub_data, config.metric, config.pairwise_cap)?;
        let mut sub_cfg = config.clone();
        sub_cfg.seed = clara_round_kmedoids_seed(config.seed, round);
        let sub_res = kmedoids_on(&sub_ds, &sub_cfg)?;

        let medoids: Vec<usize> = sub_res
            .medoid_ids()
            .expect("kmedoids returns medoids")
            .iter()
            .map(|&m| subset[m])
            .collect();
        let (assignment, cost) = assign_to_medoids(&full, &medoids);
        round_costs.push(cost);
        let better = best
            .as_ref()
            .is_none_or(|(b, _)| cost < b.cost);
        if better {
            best = Some((
                ClusteringResult {
                    centers: Centers::Medoids(medoids),
                    assignment,
                    cost,
                    cost_trace: sub_res.cost_trace,
                    converged: sub_res.converged,
                },
                round,
            ));
        }
    }
    let (result, best_round) = best.expect("at least one round");
    Ok(ClaraOutcome {
        result,
        round_costs,
        best_round,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::kmedoids;
    use crate::metric::Metric;

    fn line_points(xs: &[f64]) -> FeatureMatrix {
        FeatureMatrix::from_rows(xs.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    fn blobs(n_per: usize, centers: &[f64], spread: f64, seed: u64) -> FeatureMatrix {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        for &c in centers {
            for _ in 0..n_per {
                rows.push(vec![c + spread * (rng.random::<f64>() - 0.5)]);
            }
        }
        FeatureMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn population_subsample_single_round_equals_kmedoids() {
        let data = line_points(&[0.0, 1.0, 2.0, 8.0, 9.0, 10.0, 20.0]);
        let mut cfg = ClusteringConfig::new(3, Metric::Euclidean);
        cfg.seed = 77;
        cfg.clara_subsamples = 1;
        cfg.clara_subsample_size = Some(100); // >= n: subsample is the population
        let outcome = clara(&data, &cfg).unwrap();

        let mut direct_cfg = cfg.clone();
        direct_cfg.seed = clara_round_kmedoids_seed(cfg.seed, 0);
        let direct = kmedoids(&data, &direct_cfg).unwrap();
        assert_eq!(outcome.result, direct);
        assert_eq!(outcome.best_round, 0);
    }

    #[test]
    fn returns_argmin_over_rounds() {
        let data = blobs(20, &[0.0, 10.0, 20.0], 1.0, 5);
        let mut cfg = ClusteringConfig::new(3, Metric::Euclidean);
        cfg.seed = 9;
        cfg.clara_subsamples = 5;
        cfg.clara_subsample_size = Some(10);
        let outcome = clara(&data, &cfg).unwrap();
        let min = outcome
            .round_costs
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert_eq!(outcome.result.cost, min);
        assert_eq!(outcome.round_costs[outcome.best_round], min);
        // earliest round wins ties
        for (r, &c) in outcome.round_costs.iter().enumerate() {
            if c == min {
                assert_eq!(outcome.best_round, r);
                break;
            }
        }
    }

    #[test]
    fn near_optimal_on_two_blobs() {
        let data = blobs(20, &[0.0, 50.0], 2.0, 3);
        let mut cfg = ClusteringConfig::new(2, Metric::Euclidean);
        cfg.seed = 4;
        let outcome = clara(&data, &cfg).unwrap();

        // exhaustive k-medoids optimum over all medoid pairs
        let ds = DistSource::new(&data, Metric::Euclidean, 100).unwrap();
        let mut best = f64::INFINITY;
        for a in 0..40 {
            for b in (a + 1)..40 {
                let (_, c) = assign_to_medoids(&ds, &[a, b]);
                best = best.min(c);
            }
        }
        assert!(
            outcome.result.cost <= best * 1.05,
            "clara {} vs optimum {best}",
            outcome.result.cost
        );
    }

    #[test]
    fn subsample_smaller_than_k_is_config_error() {
        let data = line_points(&[0.0, 1.0, 2.0, 3.0]);
        let mut cfg = ClusteringConfig::new(3, Metric::Euclidean);
        cfg.clara_subsample_size = Some(2);
        assert!(matches!(clara(&data, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn deterministic_per_seed() {
        let data = blobs(15, &[0.0, 6.0], 1.5, 8);
        let mut cfg = ClusteringConfig::new(2, Metric::Manhattan);
        cfg.seed = 31;
        cfg.clara_subsample_size = Some(12);
        let a = clara(&data, &cfg).unwrap();
        let b = clara(&data, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
