//! The clustering algorithms side by side on planted blobs.

use divmine::cluster::{
    agglomerative, bisecting_kmeans, clara, kmedoids, kmeans, ClusteringConfig, Init, Linkage,
};
use divmine::dataio::{gen_synthetic, BlockSpec, MixtureComponent, SynthConfig};
use divmine::metric::Metric;
use divmine::posthoc::purity;

fn main() {
    let components = vec![
        MixtureComponent::spherical(0.4, vec![0.0, 0.0, 0.0], 0.6, -0.5, 0.0),
        MixtureComponent::spherical(0.35, vec![6.0, 0.0, 0.0], 0.6, 0.0, 0.3),
        MixtureComponent::spherical(0.25, vec![0.0, 6.0, 3.0], 0.6, 0.6, -0.2),
    ];
    let cfg = SynthConfig::new(240, vec![BlockSpec::new("all", 0, 3)], components);
    let (ds, latents) = gen_synthetic(&cfg, 5).unwrap();
    let truth: Vec<usize> = latents.iter().map(|l| l.component).collect();
    let data = ds.features();

    let mut ccfg = ClusteringConfig::new(3, Metric::Euclidean);
    ccfg.seed = 99;

    let report = |name: &str, assignment: &[usize], cost: f64, converged: bool| {
        let p = purity(assignment, &truth).unwrap();
        println!(
            "{name:<22} cost {cost:>9.3}  purity {:.3}  converged {converged}",
            p.purity
        );
    };

    let r = kmedoids(data, &ccfg).unwrap();
    report("k-medoids (heuristic)", &r.assignment, r.cost, r.converged);
    println!("  medoid ids: {:?}", r.medoid_ids().unwrap());

    let mut faft_cfg = ccfg.clone();
    faft_cfg.init = Init::Faft;
    faft_cfg.pam_swap = true;
    let r = kmedoids(data, &faft_cfg).unwrap();
    report("k-medoids (faft+swap)", &r.assignment, r.cost, r.converged);

    let outcome = clara(data, &ccfg).unwrap();
    println!(
        "clara: best of {} subsample rounds was round {}",
        outcome.round_costs.len(),
        outcome.best_round
    );
    report("clara", &outcome.result.assignment, outcome.result.cost, outcome.result.converged);

    let r = kmeans(data, &ccfg).unwrap();
    report("k-means", &r.assignment, r.cost, r.converged);

    let r = bisecting_kmeans(data, &ccfg).unwrap();
    report("bisecting k-means", &r.assignment, r.cost, r.converged);

    for linkage in [Linkage::Single, Linkage::Complete, Linkage::Average] {
        let r = agglomerative(data, 3, Metric::Euclidean, linkage).unwrap();
        report(&format!("agglomerative {linkage:?}"), &r.assignment, r.cost, r.converged);
    }
}
