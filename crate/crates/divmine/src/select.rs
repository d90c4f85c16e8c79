//! Annotation-set selection: medoid neighborhoods under per-source quotas,
//! plus a random per-source baseline.
//!
//! Per cluster the policy is: take the medoid first (it counts toward its
//! own source's quota); satisfy each source's quota with that cluster's
//! nearest-to-medoid members of the source; fill the remaining slots by
//! overall nearness. Quota shortfalls and unfillable slots become global
//! top-ups: seeded uniform draws from the not-yet-selected samples,
//! source-matched for quota shortfalls by default.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cluster::ClusteringResult;
use crate::dataio::{write_table, Dataset};
use crate::metric::{distance, Metric};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Medoid,
    Neighbor,
    Topup,
    RandomBaseline,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::Medoid => "medoid",
            Provenance::Neighbor => "neighbor",
            Provenance::Topup => "topup",
            Provenance::RandomBaseline => "random_baseline",
        }
    }
}

impl std::str::FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "medoid" => Ok(Provenance::Medoid),
            "neighbor" => Ok(Provenance::Neighbor),
            "topup" => Ok(Provenance::Topup),
            "random_baseline" => Ok(Provenance::RandomBaseline),
            other => Err(Error::Config(format!("unknown provenance '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SelectionPlan {
    pub per_cluster: usize,
    pub per_source_quota: usize,
    /// Sources carrying a quota, in priority order.
    pub sources: Vec<String>,
    pub random_topup_seed: u64,
    /// Draw quota shortfalls from the same source (true) or from the whole
    /// unselected pool (false).
    pub source_matched_topup: bool,
}

impl SelectionPlan {
    pub fn new(sources: Vec<String>) -> Self {
        SelectionPlan {
            per_cluster: 6,
            per_source_quota: 2,
            sources,
            random_topup_seed: 0,
            source_matched_topup: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.per_cluster == 0 {
            return Err(Error::Config("per_cluster must be >= 1".into()));
        }
        if self.per_source_quota * self.sources.len() > self.per_cluster {
            return Err(Error::Config(format!(
                "per-source quotas need {} slots but per_cluster is {}",
                self.per_source_quota * self.sources.len(),
                self.per_cluster
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectedSample {
    pub index: usize,
    pub sample_id: String,
    pub source: String,
    /// The sample's cluster; None for the random baseline.
    pub cluster: Option<usize>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectedSet {
    pub samples: Vec<SelectedSample>,
    pub per_source: BTreeMap<String, usize>,
}

impl SelectedSet {
    fn from_samples(samples: Vec<SelectedSample>) -> Self {
        let mut per_source = BTreeMap::new();
        for s in &samples {
            *per_source.entry(s.source.clone()).or_insert(0) += 1;
        }
        SelectedSet {
            samples,
            per_source,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.index).collect()
    }
}

/// Picks `plan.per_cluster` samples per cluster around its medoid, honoring
/// per-source quotas, with seeded global top-ups for shortfalls.
pub fn medoid_neighborhood_select(
    clustering: &ClusteringResult,
    ds: &Dataset,
    plan: &SelectionPlan,
    metric: Metric,
) -> Result<SelectedSet> {
    plan.validate()?;
    let medoids = clustering
        .medoid_ids()
        .ok_or_else(|| Error::Validation("selection needs a medoid-based clustering".into()))?;
    if clustering.assignment.len() != ds.n() {
        return Err(Error::Validation(format!(
            "clustering covers {} samples, dataset has {}",
            clustering.assignment.len(),
            ds.n()
        )));
    }
    let k = medoids.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &c) in clustering.assignment.iter().enumerate() {
        if c >= k {
            return Err(Error::Validation(format!(
                "assignment references cluster {c} but only {k} medoids exist"
            )));
        }
        members[c].push(i);
    }

    let mut selected = vec![false; ds.n()];
    let mut samples: Vec<SelectedSample> = Vec::with_capacity(k * plan.per_cluster);
    let mut shortfall: BTreeMap<&str, usize> = BTreeMap::new();
    let mut unmatched_shortfall = 0usize;

    for (c, &medoid) in medoids.iter().enumerate() {
        selected[medoid] = true;
        samples.push(SelectedSample {
            index: medoid,
            sample_id: ds.sample_id(medoid).to_string(),
            source: ds.source(medoid).to_string(),
            cluster: Some(c),
            provenance: Provenance::Medoid,
        });

        // members by nearness to the medoid, lowest index on ties
        let mut by_nearness: Vec<(f64, usize)> = members[c]
            .iter()
            .filter(|&&i| i != medoid)
            .map(|&i| {
                (
                    distance(ds.features().row(i), ds.features().row(medoid), metric),
                    i,
                )
            })
            .collect();
        by_nearness.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let budget = plan.per_cluster - 1;
        let mut needs: Vec<usize> = plan
            .sources
            .iter()
            .map(|src| {
                let discount = usize::from(ds.source(medoid) == src.as_str());
                plan.per_source_quota.saturating_sub(discount)
            })
            .collect();
        // a medoid from an unlisted source can make quotas exceed the
        // remaining slots; trim needs from the last source backwards
        let mut total_need: usize = needs.iter().sum();
        for need in needs.iter_mut().rev() {
            if total_need <= budget {
                break;
            }
            let cut = (*need).min(total_need - budget);
            *need -= cut;
            total_need -= cut;
        }

        for (src, &need) in plan.sources.iter().zip(&needs) {
            let mut got = 0;
            for &(_, i) in &by_nearness {
                if got == need {
                    break;
                }
                if !selected[i] && ds.source(i) == src.as_str() {
                    selected[i] = true;
                    got += 1;
                    samples.push(SelectedSample {
                        index: i,
                        sample_id: ds.sample_id(i).to_string(),
                        source: ds.source(i).to_string(),
                        cluster: Some(c),
                        provenance: Provenance::Neighbor,
                    });
                }
            }
            *shortfall.entry(src).or_insert(0) += need - got;
        }

        let mut free = budget - total_need;
        for &(_, i) in &by_nearness {
            if free == 0 {
                break;
            }
            if !selected[i] {
                selected[i] = true;
                free -= 1;
                samples.push(SelectedSample {
                    index: i,
                    sample_id: ds.sample_id(i).to_string(),
                    source: ds.source(i).to_string(),
                    cluster: Some(c),
                    provenance: Provenance::Neighbor,
                });
            }
        }
        // cluster exhausted before its slots were: top up globally
        unmatched_shortfall += free;
    }

    // global top-ups, single-threaded for determinism
    let mut rng = ChaCha8Rng::seed_from_u64(plan.random_topup_seed);
    let draw_from = |pool: &[usize],
                         need: usize,
                         what: &str,
                         rng: &mut ChaCha8Rng|
     -> Result<Vec<usize>> {
        if pool.len() < need {
            return Err(Error::Validation(format!(
                "top-up deficit for {what}: need {need}, only {} unselected available",
                pool.len()
            )));
        }
        Ok(rand::seq::index::sample(rng, pool.len(), need)
            .into_iter()
            .map(|j| pool[j])
            .collect())
    };

    if plan.source_matched_topup {
        for src in &plan.sources {
            let need = shortfall.get(src.as_str()).copied().unwrap_or(0);
            if need == 0 {
                continue;
            }
            let pool: Vec<usize> = (0..ds.n())
                .filter(|&i| !selected[i] && ds.source(i) == src.as_str())
                .collect();
            for i in draw_from(&pool, need, &format!("source '{src}'"), &mut rng)? {
                selected[i] = true;
                samples.push(SelectedSample {
                    index: i,
                    sample_id: ds.sample_id(i).to_string(),
                    source: ds.source(i).to_string(),
                    cluster: Some(clustering.assignment[i]),
                    provenance: Provenance::Topup,
                });
            }
        }
    } else {
        unmatched_shortfall += shortfall.values().sum::<usize>();
        shortfall.clear();
    }
    if unmatched_shortfall > 0 {
        let pool: Vec<usize> = (0..ds.n()).filter(|&i| !selected[i]).collect();
        for i in draw_from(&pool, unmatched_shortfall, "any source", &mut rng)? {
            selected[i] = true;
            samples.push(SelectedSample {
                index: i,
                sample_id: ds.sample_id(i).to_string(),
                source: ds.source(i).to_string(),
                cluster: Some(clustering.assignment[i]),
                provenance: Provenance::Topup,
            });
        }
    }

    Ok(SelectedSet::from_samples(samples))
}

/// Uniform draw without replacement of `quota` samples per source.
pub fn random_select(ds: &Dataset, quotas: &[(String, usize)], seed: u64) -> Result<SelectedSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    for (src, quota) in quotas {
        let pool: Vec<usize> = (0..ds.n()).filter(|&i| ds.source(i) == src).collect();
        if pool.len() < *quota {
            return Err(Error::Validation(format!(
                "source '{src}' has {} samples, quota asks for {quota}",
                pool.len()
            )));
        }
        for j in rand::seq::index::sample(&mut rng, pool.len(), *quota) {
            let i = pool[j];
            samples.push(SelectedSample {
                index: i,
                sample_id: ds.sample_id(i).to_string(),
                source: ds.source(i).to_string(),
                cluster: None,
                provenance: Provenance::RandomBaseline,
            });
        }
    }
    Ok(SelectedSet::from_samples(samples))
}

const SELECTION_HEADER: [&str; 4] = ["sample_id", "provenance", "cluster", "source"];

pub fn write_selection(
    path: &std::path::Path,
    set: &SelectedSet,
    provenance_comment: Option<&str>,
) -> Result<()> {
    let rows = set.samples.iter().map(|s| {
        vec![
            s.sample_id.clone(),
            s.provenance.name().to_string(),
            s.cluster.map(|c| c.to_string()).unwrap_or_default(),
            s.source.clone(),
        ]
    });
    write_table(path, provenance_comment, &SELECTION_HEADER, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{Centers, ClusteringConfig, ClusteringResult};
    use crate::dataio::{BlockSpec, SampleRecord};

    fn ds(rows: Vec<(&str, f64)>) -> Dataset {
        let records = rows
            .into_iter()
            .enumerate()
            .map(|(i, (src, x))| SampleRecord {
                sample_id: format!("s{i:03}"),
                source: src.into(),
                speaker_id: "spk".into(),
                duration_s: None,
                snr_db: None,
                features: vec![x],
            })
            .collect();
        Dataset::from_records(records, vec![BlockSpec::new("all", 0, 1)]).unwrap()
    }

    fn clustering(medoids: Vec<usize>, assignment: Vec<usize>) -> ClusteringResult {
        ClusteringResult {
            centers: Centers::Medoids(medoids),
            assignment,
            cost: 0.0,
            cost_trace: vec![0.0],
            converged: true,
        }
    }

    fn plan3() -> SelectionPlan {
        SelectionPlan::new(vec!["A".into(), "B".into(), "C".into()])
    }

    #[test]
    fn exact_fit_selects_whole_cluster() {
        // 2 of each source; medoid is sample 0 (source A)
        let data = ds(vec![
            ("A", 0.0),
            ("A", 1.0),
            ("B", 2.0),
            ("B", 3.0),
            ("C", 4.0),
            ("C", 5.0),
        ]);
        let cl = clustering(vec![0], vec![0; 6]);
        let set = medoid_neighborhood_select(&cl, &data, &plan3(), Metric::Euclidean).unwrap();
        assert_eq!(set.len(), 6);
        for src in ["A", "B", "C"] {
            assert_eq!(set.per_source[src], 2, "{src}");
        }
        assert_eq!(set.samples[0].provenance, Provenance::Medoid);
        assert!(set.samples[1..].iter().all(|s| s.provenance == Provenance::Neighbor));
    }

    #[test]
    fn quota_fills_by_nearness_within_source() {
        // medoid at x=0 (A); B members at 1, 2, 3: the two nearest B win
        let data = ds(vec![
            ("A", 0.0),
            ("B", 1.0),
            ("B", 2.0),
            ("B", 3.0),
            ("A", 0.5),
            ("A", 4.0),
        ]);
        let mut plan = SelectionPlan::new(vec!["A".into(), "B".into()]);
        plan.per_cluster = 4;
        let cl = clustering(vec![0], vec![0; 6]);
        let set = medoid_neighborhood_select(&cl, &data, &plan, Metric::Euclidean).unwrap();
        let ids: Vec<&str> = set.samples.iter().map(|s| s.sample_id.as_str()).collect();
        assert_eq!(ids, vec!["s000", "s004", "s001", "s002"]);
    }

    #[test]
    fn shortfall_tops_up_from_same_source_globally() {
        // cluster 0: A-heavy (A:4, B:1, C:1) -> B and C each short by 1
        // cluster 1: has spare B and C
        let data = ds(vec![
            ("A", 0.0),
            ("A", 0.1),
            ("A", 0.2),
            ("A", 0.3),
            ("B", 0.4),
            ("C", 0.5),
            // cluster 1
            ("A", 10.0),
            ("A", 10.1),
            ("B", 10.2),
            ("B", 10.3),
            ("B", 10.4),
            ("C", 10.5),
            ("C", 10.6),
            ("C", 10.7),
        ]);
        let assignment = vec![0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1];
        let cl = clustering(vec![0, 6], assignment);
        let set = medoid_neighborhood_select(&cl, &data, &plan3(), Metric::Euclidean).unwrap();
        assert_eq!(set.len(), 12);
        for src in ["A", "B", "C"] {
            assert_eq!(set.per_source[src], 4, "{src}");
        }
        let topups: Vec<&SelectedSample> = set
            .samples
            .iter()
            .filter(|s| s.provenance == Provenance::Topup)
            .collect();
        assert_eq!(topups.len(), 2);
        let mut topup_sources: Vec<&str> = topups.iter().map(|s| s.source.as_str()).collect();
        topup_sources.sort_unstable();
        assert_eq!(topup_sources, vec!["B", "C"]);
        // top-ups must come from cluster 1's spare members
        assert!(topups.iter().all(|s| s.cluster == Some(1)));
    }

    #[test]
    fn no_duplicates_and_medoids_always_present() {
        let data = ds((0..40)
            .map(|i| {
                let src = ["A", "B", "C"][i % 3];
                (src, i as f64 + (i % 5) as f64 * 0.01)
            })
            .collect());
        let res = crate::cluster::kmedoids(
            data.features(),
            &ClusteringConfig::new(5, Metric::Euclidean),
        )
        .unwrap();
        let mut plan = plan3();
        plan.random_topup_seed = 3;
        let set = medoid_neighborhood_select(&res, &data, &plan, Metric::Euclidean).unwrap();
        assert_eq!(set.len(), 5 * 6);
        let mut ids: Vec<&str> = set.samples.iter().map(|s| s.sample_id.as_str()).collect();
        ids.sort_unstable();
        let before = ids.len();
        ids.dedup();
        assert_eq!(ids.len(), before);
        for &m in res.medoid_ids().unwrap() {
            assert!(set.indices().contains(&m));
        }
    }

    #[test]
    fn zero_quota_reduces_to_nearest_neighborhood() {
        let data = ds(vec![
            ("A", 0.0),
            ("B", 0.2),
            ("A", 0.1),
            ("C", 5.0),
            ("B", 0.15),
        ]);
        let mut plan = SelectionPlan::new(vec![]);
        plan.per_cluster = 3;
        plan.per_source_quota = 0;
        let cl = clustering(vec![0], vec![0; 5]);
        let set = medoid_neighborhood_select(&cl, &data, &plan, Metric::Euclidean).unwrap();
        let ids: Vec<&str> = set.samples.iter().map(|s| s.sample_id.as_str()).collect();
        // medoid, then the two nearest regardless of source
        assert_eq!(ids, vec!["s000", "s002", "s004"]);
    }

    #[test]
    fn deficit_is_an_error_naming_the_source() {
        let data = ds(vec![("A", 0.0), ("A", 1.0), ("A", 2.0), ("B", 3.0)]);
        let mut plan = SelectionPlan::new(vec!["A".into(), "B".into()]);
        plan.per_cluster = 4;
        let cl = clustering(vec![0], vec![0; 4]);
        match medoid_neighborhood_select(&cl, &data, &plan, Metric::Euclidean) {
            Err(Error::Validation(msg)) => assert!(msg.contains("'B'"), "{msg}"),
            other => panic!("expected deficit error, got {other:?}"),
        }
    }

    #[test]
    fn random_select_exact_quotas_and_determinism() {
        let data = ds((0..30)
            .map(|i| (["A", "B", "C"][i % 3], i as f64))
            .collect());
        let quotas = vec![("A".to_string(), 4), ("B".to_string(), 5), ("C".to_string(), 6)];
        let a = random_select(&data, &quotas, 11).unwrap();
        let b = random_select(&data, &quotas, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 15);
        assert_eq!(a.per_source["A"], 4);
        assert_eq!(a.per_source["B"], 5);
        assert_eq!(a.per_source["C"], 6);
        let c = random_select(&data, &quotas, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_select_full_population_and_overflow() {
        let data = ds(vec![("A", 0.0), ("A", 1.0), ("B", 2.0)]);
        let set = random_select(&data, &[("A".to_string(), 2)], 0).unwrap();
        let mut idx = set.indices();
        idx.sort_unstable();
        assert_eq!(idx, vec![0, 1]);
        assert!(matches!(
            random_select(&data, &[("B".to_string(), 2)], 0),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn plan_validation() {
        let mut plan = plan3();
        plan.per_cluster = 5; // 2*3 = 6 > 5
        assert!(matches!(
            medoid_neighborhood_select(
                &clustering(vec![0], vec![0]),
                &ds(vec![("A", 0.0)]),
                &plan,
                Metric::Euclidean
            ),
            Err(Error::Config(_))
        ));
    }
}
