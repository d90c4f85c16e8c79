//! Cluster purity against discrete labels, swept over a grid of clustering
//! algorithm variants, feature sets, cluster counts, and repetitions.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::annostats::Dimension;
use crate::cluster::{
    agglomerative, bisecting_kmeans, clara, kmeans, ClusteringConfig, Init, Linkage,
};
use crate::dataio::FeatureMatrix;
use crate::derive_seed;
use crate::metric::{Metric, DEFAULT_PAIRWISE_CAP};
use crate::posthoc::stats::{mann_whitney_u, MwuMode};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurityValue {
    pub purity: f64,
    /// Singleton clusters left out of the average.
    pub n_excluded: usize,
}

/// Mean over clusters of size >= 2 of the modal label fraction.
pub fn purity<L: Eq + Ord>(assignment: &[usize], labels: &[L]) -> Result<PurityValue> {
    if assignment.len() != labels.len() {
        return Err(Error::Validation(format!(
            "{} assignments vs {} labels",
            assignment.len(),
            labels.len()
        )));
    }
    if assignment.is_empty() {
        return Err(Error::Validation("purity of an empty clustering".into()));
    }
    let mut clusters: BTreeMap<usize, Vec<&L>> = BTreeMap::new();
    for (c, l) in assignment.iter().zip(labels) {
        clusters.entry(*c).or_default().push(l);
    }
    let mut fractions = Vec::new();
    let mut n_excluded = 0usize;
    for members in clusters.values() {
        if members.len() < 2 {
            n_excluded += 1;
            continue;
        }
        let mut counts: BTreeMap<&L, usize> = BTreeMap::new();
        for l in members {
            *counts.entry(l).or_insert(0) += 1;
        }
        let modal = *counts.values().max().expect("nonempty cluster");
        fractions.push(modal as f64 / members.len() as f64);
    }
    if fractions.is_empty() {
        return Err(Error::Validation(
            "every cluster is a singleton; purity undefined".into(),
        ));
    }
    Ok(PurityValue {
        purity: fractions.iter().sum::<f64>() / fractions.len() as f64,
        n_excluded,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum VariantFamily {
    KMeans,
    Bisecting,
    Agglomerative(Metric),
    Clara(Metric, Init),
}

#[derive(Debug, Clone)]
pub struct VariantSpec {
    pub name: String,
    pub family: VariantFamily,
}

/// The 16 clustering variants of the evaluation grid: k-means, bisecting
/// k-means, agglomerative over four metrics, and CLARA over five metrics
/// with two initializations.
pub fn standard_variants() -> Vec<VariantSpec> {
    let mut v = vec![
        VariantSpec {
            name: "kmeans".into(),
            family: VariantFamily::KMeans,
        },
        VariantSpec {
            name: "bisecting".into(),
            family: VariantFamily::Bisecting,
        },
    ];
    for m in [
        Metric::Euclidean,
        Metric::Manhattan,
        Metric::Cosine,
        Metric::Chebyshev,
    ] {
        v.push(VariantSpec {
            name: format!("agglomerative-{}", m.name()),
            family: VariantFamily::Agglomerative(m),
        });
    }
    for m in Metric::ALL {
        for init in [Init::Heuristic, Init::Kpp] {
            v.push(VariantSpec {
                name: format!("clara-{}-{}", m.name(), init.name()),
                family: VariantFamily::Clara(m, init),
            });
        }
    }
    v
}

/// Discrete labels per sample for each score dimension.
#[derive(Debug, Clone)]
pub struct GridLabels {
    pub valence: Vec<String>,
    pub arousal: Vec<String>,
}

impl GridLabels {
    pub fn get(&self, dim: Dimension) -> &[String] {
        match dim {
            Dimension::Valence => &self.valence,
            Dimension::Arousal => &self.arousal,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridConfig {
    pub variants: Vec<VariantSpec>,
    /// Block names of the feature matrix; "all" means the full concatenation.
    pub feature_sets: Vec<String>,
    pub k_list: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub pairwise_cap: usize,
}

impl GridConfig {
    pub fn new(feature_sets: Vec<String>, k_list: Vec<usize>, reps: usize, seed: u64) -> Self {
        GridConfig {
            variants: standard_variants(),
            feature_sets,
            k_list,
            reps,
            seed,
            pairwise_cap: DEFAULT_PAIRWISE_CAP,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.variants.len() * self.feature_sets.len() * self.k_list.len() * self.reps
    }
}

/// One grid cell evaluated on one label dimension. A failed cell (for
/// example k > n) keeps its row with empty purity fields.
#[derive(Debug, Clone, PartialEq)]
pub struct PurityCell {
    pub variant: String,
    pub feature_set: String,
    pub k: usize,
    pub rep: usize,
    pub dimension: Dimension,
    pub purity: Option<f64>,
    pub n_excluded: Option<usize>,
}

fn run_variant(
    features: &FeatureMatrix,
    family: &VariantFamily,
    k: usize,
    seed: u64,
    cap: usize,
) -> Result<Vec<usize>> {
    let res = match family {
        VariantFamily::KMeans => {
            let mut cc = ClusteringConfig::new(k, Metric::Euclidean);
            cc.init = Init::Kpp;
            cc.seed = seed;
            cc.pairwise_cap = cap;
            kmeans(features, &cc)?
        }
        VariantFamily::Bisecting => {
            let mut cc = ClusteringConfig::new(k, Metric::Euclidean);
            cc.init = Init::Kpp;
            cc.seed = seed;
            cc.pairwise_cap = cap;
            bisecting_kmeans(features, &cc)?
        }
        VariantFamily::Agglomerative(m) => agglomerative(features, k, *m, Linkage::Average)?,
        VariantFamily::Clara(m, init) => {
            let mut cc = ClusteringConfig::new(k, *m);
            cc.init = *init;
            cc.seed = seed;
            cc.pairwise_cap = cap;
            clara(features, &cc)?.result
        }
    };
    Ok(res.assignment)
}

/// Runs every (variant, feature set, k, rep) cell with a derived seed and
/// scores both label dimensions. Infeasible cells are recorded, not fatal.
/// Rows come back sorted by (variant, feature_set, k, rep, dimension).
pub fn purity_grid(
    features: &FeatureMatrix,
    labels: &GridLabels,
    cfg: &GridConfig,
) -> Result<Vec<PurityCell>> {
    if cfg.variants.is_empty() || cfg.feature_sets.is_empty() || cfg.k_list.is_empty() {
        return Err(Error::Config("purity grid has an empty axis".into()));
    }
    if cfg.reps == 0 {
        return Err(Error::Config("purity grid needs reps >= 1".into()));
    }
    for dim in Dimension::ALL {
        if labels.get(dim).len() != features.n() {
            return Err(Error::Validation(format!(
                "{} {} labels for {} samples",
                labels.get(dim).len(),
                dim,
                features.n()
            )));
        }
    }
    let mut views: BTreeMap<&str, FeatureMatrix> = BTreeMap::new();
    for fs in &cfg.feature_sets {
        let view = if fs == "all" {
            features.clone()
        } else {
            features.restrict_to_block(fs)?
        };
        views.insert(fs.as_str(), view);
    }

    let cells: Vec<(&VariantSpec, &String, usize, usize)> = cfg
        .variants
        .iter()
        .flat_map(|v| {
            cfg.feature_sets.iter().flat_map(move |fs| {
                cfg.k_list
                    .iter()
                    .flat_map(move |&k| (0..cfg.reps).map(move |rep| (v, fs, k, rep)))
            })
        })
        .collect();

    let mut rows: Vec<PurityCell> = cells
        .par_iter()
        .flat_map_iter(|&(variant, fs, k, rep)| {
            let seed = derive_seed(
                cfg.seed,
                "purity-grid",
                &format!("{}|{}|k{}|r{}", variant.name, fs, k, rep),
            );
            let outcome = run_variant(&views[fs.as_str()], &variant.family, k, seed, cfg.pairwise_cap);
            Dimension::ALL.into_iter().map(move |dim| {
                let value = outcome
                    .as_ref()
                    .ok()
                    .and_then(|assignment| purity(assignment, labels.get(dim)).ok());
                PurityCell {
                    variant: variant.name.clone(),
                    feature_set: fs.clone(),
                    k,
                    rep,
                    dimension: dim,
                    purity: value.map(|v| v.purity),
                    n_excluded: value.map(|v| v.n_excluded),
                }
            })
        })
        .collect();

    rows.sort_by(|a, b| {
        a.variant
            .cmp(&b.variant)
            .then(a.feature_set.cmp(&b.feature_set))
            .then(a.k.cmp(&b.k))
            .then(a.rep.cmp(&b.rep))
            .then(a.dimension.cmp(&b.dimension))
    });
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareBy {
    Variant,
    FeatureSet,
}

impl std::str::FromStr for CompareBy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "variant" => Ok(CompareBy::Variant),
            "feature_set" => Ok(CompareBy::FeatureSet),
            other => Err(Error::Config(format!("unknown grouping '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PairwiseTest {
    pub group_a: String,
    pub group_b: String,
    pub n_a: usize,
    pub n_b: usize,
    pub median_a: f64,
    pub median_b: f64,
    pub u: f64,
    pub p: f64,
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Two-sided Mann-Whitney U between every pair of groups, purity values
/// pooled across all other factors. Returns the tests plus the names of
/// groups excluded for having fewer than two observations.
pub fn compare_variants(
    rows: &[PurityCell],
    by: CompareBy,
) -> Result<(Vec<PairwiseTest>, Vec<String>)> {
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for row in rows {
        if let Some(v) = row.purity {
            let key = match by {
                CompareBy::Variant => row.variant.as_str(),
                CompareBy::FeatureSet => row.feature_set.as_str(),
            };
            groups.entry(key).or_default().push(v);
        }
    }
    let mut excluded = Vec::new();
    groups.retain(|name, vals| {
        if vals.len() < 2 {
            log::warn!("group '{name}' has {} observations; excluded", vals.len());
            excluded.push(name.to_string());
            false
        } else {
            true
        }
    });
    if groups.len() < 2 {
        return Err(Error::Validation(format!(
            "pairwise comparison needs at least 2 groups with 2+ observations, got {}",
            groups.len()
        )));
    }
    let names: Vec<&str> = groups.keys().copied().collect();
    let mut tests = Vec::new();
    for (i, &a) in names.iter().enumerate() {
        for &b in &names[i + 1..] {
            let (ga, gb) = (&groups[a], &groups[b]);
            let res = mann_whitney_u(ga, gb, MwuMode::Auto)?;
            tests.push(PairwiseTest {
                group_a: a.to_string(),
                group_b: b.to_string(),
                n_a: ga.len(),
                n_b: gb.len(),
                median_a: median(ga),
                median_b: median(gb),
                u: res.u_x,
                p: res.p,
            });
        }
    }
    Ok((tests, excluded))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn purity_worked_examples() {
        // {A,A,B} and {B,B}
        let p = purity(&[0, 0, 0, 1, 1], &["A", "A", "B", "B", "B"]).unwrap();
        assert_abs_diff_eq!(p.purity, 5.0 / 6.0, epsilon = 1e-12);
        assert_eq!(p.n_excluded, 0);
        // singleton {A} excluded; {A,B} scores 1/2
        let p = purity(&[0, 1, 1], &["A", "A", "B"]).unwrap();
        assert_abs_diff_eq!(p.purity, 0.5, epsilon = 1e-12);
        assert_eq!(p.n_excluded, 1);
        // single-label clusters are pure
        let p = purity(&[0, 0, 1, 1], &["A", "A", "B", "B"]).unwrap();
        assert_eq!(p.purity, 1.0);
    }

    #[test]
    fn purity_errors() {
        assert!(purity(&[0, 1, 2], &["A", "B", "C"]).is_err());
        assert!(purity(&[0, 0], &["A"]).is_err());
        assert!(purity::<&str>(&[], &[]).is_err());
    }

    #[test]
    fn purity_invariant_to_relabeling() {
        let assignment = [0, 0, 1, 1, 1, 2, 2];
        let labels = ["x", "y", "x", "x", "z", "z", "z"];
        let base = purity(&assignment, &labels).unwrap();
        // renumber clusters
        let renumbered: Vec<usize> = assignment.iter().map(|c| (c + 5) * 3).collect();
        let p2 = purity(&renumbered, &labels).unwrap();
        assert_eq!(base, p2);
        // rename classes
        let renamed: Vec<String> = labels.iter().map(|l| format!("class-{l}")).collect();
        let p3 = purity(&assignment, &renamed).unwrap();
        assert_eq!(base.purity, p3.purity);
        assert_eq!(base.n_excluded, p3.n_excluded);
    }

    #[test]
    fn sixteen_standard_variants() {
        let v = standard_variants();
        assert_eq!(v.len(), 16);
        let mut names: Vec<&str> = v.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), 16);
        let n_agg = v
            .iter()
            .filter(|s| matches!(s.family, VariantFamily::Agglomerative(_)))
            .count();
        let n_clara = v
            .iter()
            .filter(|s| matches!(s.family, VariantFamily::Clara(..)))
            .count();
        assert_eq!(n_agg, 4);
        assert_eq!(n_clara, 10);
        assert!(!v
            .iter()
            .any(|s| s.family == VariantFamily::Agglomerative(Metric::Pearson)));
    }

    fn demo_features(n: usize) -> (FeatureMatrix, GridLabels) {
        use crate::dataio::BlockSpec;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                vec![
                    sign * (3.0 + (i as f64 * 0.11).sin()),
                    (i as f64 * 0.07).cos(),
                    sign * 2.0,
                ]
            })
            .collect();
        let blocks = vec![BlockSpec::new("ab", 0, 2), BlockSpec::new("c", 2, 1)];
        let features = FeatureMatrix::from_rows_with_blocks(rows, blocks).unwrap();
        let valence: Vec<String> = (0..n)
            .map(|i| if i % 2 == 0 { "positive" } else { "negative" }.to_string())
            .collect();
        let arousal: Vec<String> = (0..n)
            .map(|i| if i % 3 == 0 { "high" } else { "low" }.to_string())
            .collect();
        (features, GridLabels { valence, arousal })
    }

    #[test]
    fn grid_cell_count_and_order() {
        let (features, labels) = demo_features(30);
        let mut cfg = GridConfig::new(
            vec!["ab".into(), "c".into(), "all".into()],
            vec![2, 4],
            2,
            7,
        );
        cfg.variants = standard_variants().into_iter().take(3).collect();
        assert_eq!(cfg.n_cells(), 3 * 3 * 2 * 2);
        let rows = purity_grid(&features, &labels, &cfg).unwrap();
        assert_eq!(rows.len(), cfg.n_cells() * 2);
        let mut keys: Vec<(String, String, usize, usize)> = rows
            .iter()
            .map(|r| (r.variant.clone(), r.feature_set.clone(), r.k, r.rep))
            .collect();
        keys.dedup();
        assert_eq!(keys.len(), cfg.n_cells());
        let mut sorted = rows.clone();
        sorted.sort_by(|a, b| {
            a.variant
                .cmp(&b.variant)
                .then(a.feature_set.cmp(&b.feature_set))
                .then(a.k.cmp(&b.k))
                .then(a.rep.cmp(&b.rep))
                .then(a.dimension.cmp(&b.dimension))
        });
        assert_eq!(rows, sorted);
    }

    #[test]
    fn grid_is_deterministic_and_single_cell_works() {
        let (features, labels) = demo_features(24);
        let mut cfg = GridConfig::new(vec!["all".into()], vec![3], 1, 5);
        cfg.variants = vec![standard_variants().remove(6)];
        let a = purity_grid(&features, &labels, &cfg).unwrap();
        let b = purity_grid(&features, &labels, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert!(a[0].purity.is_some());
    }

    #[test]
    fn infeasible_cells_fail_without_stopping_the_grid() {
        let (features, labels) = demo_features(10);
        let mut cfg = GridConfig::new(vec!["all".into()], vec![3, 999], 1, 3);
        cfg.variants = standard_variants().into_iter().take(2).collect();
        let rows = purity_grid(&features, &labels, &cfg).unwrap();
        assert_eq!(rows.len(), cfg.n_cells() * 2);
        for row in &rows {
            if row.k == 999 {
                assert!(row.purity.is_none());
            } else {
                assert!(row.purity.is_some(), "{row:?}");
            }
        }
    }

    #[test]
    fn unknown_feature_set_is_config_error() {
        let (features, labels) = demo_features(10);
        let cfg = GridConfig::new(vec!["nope".into()], vec![2], 1, 0);
        assert!(purity_grid(&features, &labels, &cfg).is_err());
    }

    fn cell(variant: &str, rep: usize, purity: f64) -> PurityCell {
        PurityCell {
            variant: variant.into(),
            feature_set: "all".into(),
            k: 2,
            rep,
            dimension: Dimension::Valence,
            purity: Some(purity),
            n_excluded: Some(0),
        }
    }

    #[test]
    fn planted_shift_is_detected() {
        let mut rows = Vec::new();
        for rep in 0..8 {
            let base = 0.5 + rep as f64 * 0.01;
            rows.push(cell("better", rep, base + 0.2));
            rows.push(cell("meh", rep, base));
            rows.push(cell("also-meh", rep, base + 0.003));
        }
        let (tests, excluded) = compare_variants(&rows, CompareBy::Variant).unwrap();
        assert!(excluded.is_empty());
        assert_eq!(tests.len(), 3);
        for t in &tests {
            if t.group_a == "better" || t.group_b == "better" {
                assert!(t.p < 0.05, "{} vs {}: p={}", t.group_a, t.group_b, t.p);
            }
            assert!(t.p > 0.0 && t.p <= 1.0);
        }
    }

    #[test]
    fn identical_groups_tie_at_p_one() {
        let mut rows = Vec::new();
        for rep in 0..3 {
            rows.push(cell("a", rep, 0.7));
            rows.push(cell("b", rep, 0.7));
        }
        let (tests, _) = compare_variants(&rows, CompareBy::Variant).unwrap();
        assert_eq!(tests.len(), 1);
        assert_eq!(tests[0].p, 1.0);
    }

    #[test]
    fn small_groups_are_excluded_with_warning() {
        let mut rows = vec![cell("tiny", 0, 0.9)];
        for rep in 0..4 {
            rows.push(cell("a", rep, 0.5 + rep as f64 * 0.02));
            rows.push(cell("b", rep, 0.55 + rep as f64 * 0.02));
        }
        let (tests, excluded) = compare_variants(&rows, CompareBy::Variant).unwrap();
        assert_eq!(excluded, vec!["tiny".to_string()]);
        assert_eq!(tests.len(), 1);
        // failed cells carry no purity and never enter groups
        rows.push(PurityCell {
            purity: None,
            n_excluded: None,
            ..cell("ghost", 0, 0.0)
        });
        rows.push(PurityCell {
            purity: None,
            n_excluded: None,
            ..cell("ghost", 1, 0.0)
        });
        let (tests2, excluded2) = compare_variants(&rows, CompareBy::Variant).unwrap();
        assert_eq!(tests2.len(), tests.len());
        assert!(!excluded2.contains(&"ghost".to_string()));
    }

    #[test]
    fn too_few_groups_is_error() {
        let rows = vec![cell("only", 0, 0.5), cell("only", 1, 0.6)];
        assert!(compare_variants(&rows, CompareBy::Variant).is_err());
    }
}
