//! Feature preparation: per-speaker z-scoring, PCA on one block, then
//! balancing so every block carries an equal share of the total variance.

use divmine::dataio::{gen_synthetic, BlockSpec, Dataset, MixtureComponent, SynthConfig};
use divmine::featprep::{balance_blocks, fit_pca, apply_pca, speaker_zscore};

fn variance_shares(ds: &Dataset) -> Vec<(String, f64)> {
    let n = ds.n() as f64;
    let mut shares = Vec::new();
    let mut total = 0.0;
    for b in ds.features().blocks() {
        let mut var = 0.0;
        for j in b.cols() {
            let mean: f64 = (0..ds.n()).map(|i| ds.features().row(i)[j]).sum::<f64>() / n;
            var += (0..ds.n())
                .map(|i| (ds.features().row(i)[j] - mean).powi(2))
                .sum::<f64>()
                / n;
        }
        total += var;
        shares.push((b.name.clone(), var));
    }
    shares.iter().map(|(name, v)| (name.clone(), v / total)).collect()
}

fn main() {
    let blocks = vec![
        BlockSpec::new("acoustic", 0, 6),
        BlockSpec::new("embedding", 6, 8),
        BlockSpec::new("text", 14, 2),
    ];
    // deliberately unequal scales so balancing has something to fix
    let mut mean_a = vec![0.0; 16];
    let mut mean_b = vec![0.0; 16];
    for j in 0..6 {
        mean_a[j] = 40.0;
        mean_b[j] = 44.0;
    }
    let components = vec![
        MixtureComponent::spherical(0.5, mean_a, 3.0, -0.4, 0.0),
        MixtureComponent::spherical(0.5, mean_b, 3.0, 0.4, 0.1),
    ];
    let cfg = SynthConfig::new(500, blocks, components);
    let (raw, _) = gen_synthetic(&cfg, 3).unwrap();

    println!("variance shares before:");
    for (name, s) in variance_shares(&raw) {
        println!("  {name:<9} {s:.3}");
    }

    let z = speaker_zscore(&raw, "acoustic").unwrap();
    let pca = fit_pca(&z, "embedding", 4).unwrap();
    println!(
        "pca keeps {} of 8 embedding dims, eigenvalue mass {:.3}",
        pca.n_components(),
        pca.explained_variance.iter().sum::<f64>()
    );
    let reduced = apply_pca(&z, &pca).unwrap();
    let (balanced, _weights) = balance_blocks(&reduced).unwrap();

    println!("variance shares after (target 1/3 each):");
    for (name, s) in variance_shares(&balanced) {
        println!("  {name:<9} {s:.3}");
    }
    println!("final width: {} dims", balanced.dim());
}
