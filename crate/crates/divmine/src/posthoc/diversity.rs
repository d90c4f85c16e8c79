//! Score diversity of selected subsets as a function of subset size.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::annostats::Dimension;
use crate::cluster::{clara, faft, kmedoids, ClusteringConfig, Init};
use crate::dataio::FeatureMatrix;
use crate::derive_seed;
use crate::featprep::mean_and_pop_sd;
use crate::metric::{Metric, DEFAULT_PAIRWISE_CAP};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Random,
    Faft,
    /// Medoids of a k-medoids run seeded by a FAFT traversal.
    FaftKmedoids,
    Clara,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Random,
        Strategy::Faft,
        Strategy::FaftKmedoids,
        Strategy::Clara,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Faft => "faft",
            Strategy::FaftKmedoids => "faft_kmedoids",
            Strategy::Clara => "clara",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Strategy::Random),
            "faft" => Ok(Strategy::Faft),
            "faft_kmedoids" => Ok(Strategy::FaftKmedoids),
            "clara" => Ok(Strategy::Clara),
            other => Err(Error::Config(format!("unknown strategy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DiversityConfig {
    pub sizes: Vec<usize>,
    pub runs: usize,
    pub metric: Metric,
    pub seed: u64,
    pub pairwise_cap: usize,
}

impl DiversityConfig {
    pub fn new(sizes: Vec<usize>, runs: usize, seed: u64) -> Self {
        DiversityConfig {
            sizes,
            runs,
            metric: Metric::Euclidean,
            seed,
            pairwise_cap: DEFAULT_PAIRWISE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiversityPoint {
    pub n_samples: usize,
    pub sd_mean: f64,
    /// Sample SD of the per-run SDs divided by sqrt(runs); 0 for one run.
    pub sd_stderr: f64,
}

#[derive(Debug, Clone)]
pub struct DiversityCurve {
    pub strategy: Strategy,
    pub feature_set: String,
    pub dimension: Dimension,
    pub runs: usize,
    /// Sorted by n_samples.
    pub points: Vec<DiversityPoint>,
}

/// Log-spaced subset sizes from 10 to 1500, deduplicated after rounding.
pub fn default_size_grid() -> Vec<usize> {
    let (lo, hi, steps) = (10.0_f64, 1500.0_f64, 12usize);
    let mut sizes: Vec<usize> = (0..steps)
        .map(|i| {
            let t = i as f64 / (steps - 1) as f64;
            (lo.ln() + t * (hi.ln() - lo.ln())).exp().round() as usize
        })
        .collect();
    sizes.dedup();
    sizes
}

fn score_sd(scores: &[f64], idxs: &[usize]) -> f64 {
    // canonical accumulation order, so the full set reproduces the
    // full-data SD bit for bit
    let mut sorted = idxs.to_vec();
    sorted.sort_unstable();
    let vals: Vec<f64> = sorted.iter().map(|&i| scores[i]).collect();
    mean_and_pop_sd(&vals).1
}

/// Mean and standard error over runs of the population SD of the scores of
/// subsets chosen by `strategy` at each size.
pub fn diversity_curve(
    features: &FeatureMatrix,
    feature_set: &str,
    scores: &[f64],
    dimension: Dimension,
    strategy: Strategy,
    cfg: &DiversityConfig,
) -> Result<DiversityCurve> {
    let n = features.n();
    if scores.len() != n {
        return Err(Error::Validation(format!(
            "{} scores for {} samples",
            scores.len(),
            n
        )));
    }
    if cfg.runs == 0 {
        return Err(Error::Config("diversity needs at least 1 run".into()));
    }
    let mut sizes = cfg.sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.is_empty() {
        return Err(Error::Config("diversity size list is empty".into()));
    }
    if sizes[0] == 0 {
        return Err(Error::Config("diversity size 0 is meaningless".into()));
    }
    if *sizes.last().expect("nonempty") > n {
        return Err(Error::Validation(format!(
            "requested subset of {} from {} samples",
            sizes.last().expect("nonempty"),
            n
        )));
    }

    let run_seed = |tag: &str| derive_seed(cfg.seed, "diversity", tag);
    let key = |m: usize, r: usize| {
        format!("{}:{}:{}:m{}:r{}", strategy.name(), feature_set, dimension, m, r)
    };

    // per (size, run) SD values, sizes-major
    let sds: Vec<Vec<f64>> = match strategy {
        Strategy::Random => sizes
            .iter()
            .map(|&m| {
                (0..cfg.runs)
                    .map(|r| {
                        let mut rng = ChaCha8Rng::seed_from_u64(run_seed(&key(m, r)));
                        let idxs = rand::seq::index::sample(&mut rng, n, m).into_vec();
                        score_sd(scores, &idxs)
                    })
                    .collect()
            })
            .collect(),
        Strategy::Faft => {
            // one traversal per run; sizes are prefixes of it
            let max_m = *sizes.last().expect("nonempty");
            let traversals: Vec<Vec<usize>> = (0..cfg.runs)
                .map(|r| {
                    let tag = format!("{}:{}:{}:r{}", strategy.name(), feature_set, dimension, r);
                    faft(features, max_m, cfg.metric, run_seed(&tag))
                })
                .collect::<Result<_>>()?;
            sizes
                .iter()
                .map(|&m| {
                    traversals
                        .iter()
                        .map(|order| score_sd(scores, &order[..m]))
                        .collect()
                })
                .collect()
        }
        Strategy::FaftKmedoids | Strategy::Clara => {
            let cells: Vec<(usize, usize)> = sizes
                .iter()
                .flat_map(|&m| (0..cfg.runs).map(move |r| (m, r)))
                .collect();
            let flat: Vec<Result<f64>> = cells
                .par_iter()
                .map(|&(m, r)| {
                    let mut cc = ClusteringConfig::new(m, cfg.metric);
                    cc.seed = run_seed(&key(m, r));
                    cc.pairwise_cap = cfg.pairwise_cap;
                    let medoids = match strategy {
                        Strategy::FaftKmedoids => {
                            cc.init = Init::Faft;
                            kmedoids(features, &cc)?
                                .medoid_ids()
                                .expect("medoid result")
                                .to_vec()
                        }
                        _ => clara(features, &cc)?
                            .result
                            .medoid_ids()
                            .expect("medoid result")
                            .to_vec(),
                    };
                    Ok(score_sd(scores, &medoids))
                })
                .collect();
            let mut by_size = vec![Vec::with_capacity(cfg.runs); sizes.len()];
            for ((m, _), sd) in cells.iter().zip(flat) {
                let si = sizes.binary_search(m).expect("size in grid");
                by_size[si].push(sd?);
            }
            by_size
        }
    };

    let points = sizes
        .iter()
        .zip(&sds)
        .map(|(&m, run_sds)| {
            if run_sds.iter().all(|&s| s == run_sds[0]) {
                return DiversityPoint {
                    n_samples: m,
                    sd_mean: run_sds[0],
                    sd_stderr: 0.0,
                };
            }
            let mean = run_sds.iter().sum::<f64>() / run_sds.len() as f64;
            let stderr = if run_sds.len() < 2 {
                0.0
            } else {
                let var = run_sds.iter().map(|s| (s - mean).powi(2)).sum::<f64>()
                    / (run_sds.len() - 1) as f64;
                (var / run_sds.len() as f64).sqrt()
            };
            DiversityPoint {
                n_samples: m,
                sd_mean: mean,
                sd_stderr: stderr,
            }
        })
        .collect();

    Ok(DiversityCurve {
        strategy,
        feature_set: feature_set.to_string(),
        dimension,
        runs: cfg.runs,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn line_features(n: usize) -> (FeatureMatrix, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, (i as f64 * 0.37).sin()]).collect();
        let scores: Vec<f64> = (0..n).map(|i| (i as f64 * 1.7).sin()).collect();
        (FeatureMatrix::from_rows(rows).unwrap(), scores)
    }

    #[test]
    fn random_at_full_size_equals_population_sd() {
        let (f, scores) = line_features(40);
        let cfg = DiversityConfig::new(vec![10, 40], 7, 3);
        let curve =
            diversity_curve(&f, "all", &scores, Dimension::Valence, Strategy::Random, &cfg)
                .unwrap();
        let full_sd = mean_and_pop_sd(&scores).1;
        let last = curve.points.last().unwrap();
        assert_eq!(last.n_samples, 40);
        assert_eq!(last.sd_mean, full_sd);
        assert_eq!(last.sd_stderr, 0.0);
    }

    #[test]
    fn constant_scores_give_zero_sd_everywhere() {
        let (f, _) = line_features(30);
        let scores = vec![0.25; 30];
        let cfg = DiversityConfig::new(vec![5, 10, 30], 3, 0);
        for strategy in Strategy::ALL {
            let curve =
                diversity_curve(&f, "all", &scores, Dimension::Arousal, strategy, &cfg).unwrap();
            for p in &curve.points {
                assert_eq!(p.sd_mean, 0.0, "{strategy}");
                assert_eq!(p.sd_stderr, 0.0, "{strategy}");
            }
        }
    }

    #[test]
    fn points_sorted_and_deterministic() {
        let (f, scores) = line_features(50);
        let cfg = DiversityConfig::new(vec![20, 5, 10], 4, 9);
        for strategy in Strategy::ALL {
            let a = diversity_curve(&f, "all", &scores, Dimension::Valence, strategy, &cfg)
                .unwrap();
            let b = diversity_curve(&f, "all", &scores, Dimension::Valence, strategy, &cfg)
                .unwrap();
            let ns: Vec<usize> = a.points.iter().map(|p| p.n_samples).collect();
            assert_eq!(ns, vec![5, 10, 20], "{strategy}");
            assert_eq!(a.points, b.points, "{strategy}");
            assert!(a.points.iter().all(|p| p.sd_mean >= 0.0));
        }
    }

    #[test]
    fn oversized_request_is_error() {
        let (f, scores) = line_features(20);
        let cfg = DiversityConfig::new(vec![21], 2, 0);
        assert!(matches!(
            diversity_curve(&f, "all", &scores, Dimension::Valence, Strategy::Random, &cfg),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn random_mean_matches_independent_monte_carlo() {
        // same estimator, independently coded with 10x the runs
        let (f, scores) = line_features(60);
        let m = 12;
        let runs = 60;
        let cfg = DiversityConfig::new(vec![m], runs, 7);
        let curve =
            diversity_curve(&f, "all", &scores, Dimension::Valence, Strategy::Random, &cfg)
                .unwrap();
        let p = &curve.points[0];

        use rand::RngExt;
        let mut rng = ChaCha8Rng::seed_from_u64(0xABCDEF);
        let big_runs = runs * 10;
        let mut sds = Vec::with_capacity(big_runs);
        for _ in 0..big_runs {
            let mut pool: Vec<usize> = (0..60).collect();
            // Fisher-Yates prefix shuffle
            for i in 0..m {
                let j = rng.random_range(i..60);
                pool.swap(i, j);
            }
            let vals: Vec<f64> = pool[..m].iter().map(|&i| scores[i]).collect();
            let mean = vals.iter().sum::<f64>() / m as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m as f64;
            sds.push(var.sqrt());
        }
        let mc_mean = sds.iter().sum::<f64>() / sds.len() as f64;
        let mc_var =
            sds.iter().map(|s| (s - mc_mean).powi(2)).sum::<f64>() / (sds.len() - 1) as f64;
        let mc_stderr = (mc_var / sds.len() as f64).sqrt();
        let combined = (p.sd_stderr.powi(2) + mc_stderr.powi(2)).sqrt();
        assert!(
            (p.sd_mean - mc_mean).abs() <= 3.0 * combined,
            "curve {} vs mc {} (3se = {})",
            p.sd_mean,
            mc_mean,
            3.0 * combined
        );
    }

    #[test]
    fn faft_prefix_reuses_traversal() {
        // faft curve at size m must equal the SD over the first m picks of
        // a standalone traversal with the same derived seed
        let (f, scores) = line_features(30);
        let cfg = DiversityConfig::new(vec![5, 15], 1, 11);
        let curve = diversity_curve(&f, "fs", &scores, Dimension::Valence, Strategy::Faft, &cfg)
            .unwrap();
        let tag = format!("faft:fs:valence:r0");
        let order = faft(&f, 15, Metric::Euclidean, derive_seed(11, "diversity", &tag)).unwrap();
        let sd5 = score_sd(&scores, &order[..5]);
        let sd15 = score_sd(&scores, &order[..15]);
        assert_abs_diff_eq!(curve.points[0].sd_mean, sd5, epsilon = 0.0);
        assert_abs_diff_eq!(curve.points[1].sd_mean, sd15, epsilon = 0.0);
    }

    #[test]
    fn default_grid_is_log_spaced_and_in_range() {
        let g = default_size_grid();
        assert_eq!(*g.first().unwrap(), 10);
        assert_eq!(*g.last().unwrap(), 1500);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(g.len() >= 10);
    }
}
