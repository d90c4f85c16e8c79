//! Purity sweep: every clustering variant against known labels, then
//! rank-test which variants differ.

use divmine::annostats::Dimension;
use divmine::dataio::{gen_synthetic, BlockSpec, SynthConfig};
use divmine::posthoc::{compare_variants, purity_grid, CompareBy, GridConfig, GridLabels};

fn main() {
    let cfg = SynthConfig::with_random_components(
        400,
        vec![BlockSpec::new("a", 0, 4), BlockSpec::new("b", 4, 4)],
        4,
        0.0,
        12,
    )
    .unwrap();
    let (ds, latents) = gen_synthetic(&cfg, 12).unwrap();
    let labels = GridLabels {
        valence: latents
            .iter()
            .map(|l| if l.valence > 0.0 { "pos" } else { "neg" }.to_string())
            .collect(),
        arousal: latents
            .iter()
            .map(|l| if l.arousal > 0.0 { "high" } else { "low" }.to_string())
            .collect(),
    };

    let mut gcfg = GridConfig::new(
        vec!["a".into(), "b".into(), "all".into()],
        vec![4, 8],
        3,
        777,
    );
    // a handful of variants keeps the demo quick; the default is all 16
    gcfg.variants.retain(|v| {
        ["kmeans", "clara-euclidean-heuristic", "agglomerative-cosine"].contains(&v.name.as_str())
    });

    let cells = purity_grid(ds.features(), &labels, &gcfg).unwrap();
    println!(
        "{} cells -> {} rows (two affect dimensions per cell)",
        gcfg.n_cells(),
        cells.len()
    );
    for c in cells.iter().take(6) {
        println!(
            "  {:<26} {:<4} k={} rep={} {:<8} purity {:.3}",
            c.variant,
            c.feature_set,
            c.k,
            c.rep,
            c.dimension.name(),
            c.purity.unwrap()
        );
    }

    let valence_rows: Vec<_> = cells
        .iter()
        .filter(|c| c.dimension == Dimension::Valence)
        .cloned()
        .collect();
    let (tests, excluded) = compare_variants(&valence_rows, CompareBy::Variant).unwrap();
    println!("pairwise rank tests on valence purity:");
    for t in &tests {
        println!(
            "  {} vs {}: medians {:.3}/{:.3}, U={}, p={:.4}",
            t.group_a, t.group_b, t.median_a, t.median_b, t.u, t.p
        );
    }
    if !excluded.is_empty() {
        println!("excluded (too few observations): {excluded:?}");
    }
}
