//! Mining an annotation set: cluster, then take each medoid plus its
//! nearest neighbors under per-source quotas, plus a random baseline.

use divmine::cluster::{clara, ClusteringConfig, Init};
use divmine::dataio::{gen_synthetic, BlockSpec, MixtureComponent, SynthConfig};
use divmine::metric::Metric;
use divmine::select::{medoid_neighborhood_select, random_select, SelectionPlan};

fn main() {
    let components = (0..6)
        .map(|c| {
            let center = vec![3.0 * c as f64, (c % 3) as f64 * 4.0];
            MixtureComponent::spherical(1.0 / 6.0, center, 0.8, 0.3 * (c as f64 - 2.5), 0.1)
        })
        .collect();
    let mut cfg = SynthConfig::new(900, vec![BlockSpec::new("all", 0, 2)], components);
    cfg.sources = vec![
        ("parl".into(), 0.5),
        ("argue".into(), 0.3),
        ("web".into(), 0.2),
    ];
    let (ds, _) = gen_synthetic(&cfg, 21).unwrap();

    let mut ccfg = ClusteringConfig::new(12, Metric::Euclidean);
    ccfg.init = Init::Faft;
    ccfg.seed = 4242;
    let clustering = clara(ds.features(), &ccfg).unwrap().result;

    let mut plan = SelectionPlan::new(vec!["parl".into(), "argue".into(), "web".into()]);
    plan.per_cluster = 6;
    plan.per_source_quota = 2;
    plan.random_topup_seed = 7;

    let mined = medoid_neighborhood_select(&clustering, &ds, &plan, Metric::Euclidean).unwrap();
    println!(
        "mined {} samples from {} clusters ({} per cluster)",
        mined.len(),
        clustering.k(),
        plan.per_cluster
    );
    println!("per source: {:?}", mined.per_source);
    let medoids = mined
        .samples
        .iter()
        .filter(|s| s.provenance.name() == "medoid")
        .count();
    println!("{medoids} medoids, rest nearest-neighbor fills");

    // a size-matched random pool drawn from the leftovers
    let chosen: std::collections::HashSet<usize> = mined.indices().into_iter().collect();
    let rest: Vec<usize> = (0..ds.n()).filter(|i| !chosen.contains(i)).collect();
    let pool = ds.subset(&rest);
    let quotas: Vec<(String, usize)> = mined
        .per_source
        .iter()
        .map(|(s, c)| (s.clone(), *c))
        .collect();
    let random = random_select(&pool, &quotas, 1234).unwrap();
    println!(
        "random baseline: {} samples, per source {:?}",
        random.len(),
        random.per_source
    );

    let first = &mined.samples[0];
    println!(
        "first pick: {} ({}, cluster {:?}, {})",
        first.sample_id,
        first.provenance.name(),
        first.cluster,
        first.source
    );
}
