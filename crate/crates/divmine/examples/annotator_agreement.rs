//! Annotator statistics: normalize ratings per annotator, aggregate a
//! gold standard, pick the valence threshold that maximizes agreement.

use divmine::annostats::{
    aggregate_gold, agreement_report, arousal_label, normalize_annotators,
    optimize_valence_threshold, valence_label, default_threshold_grid, KappaMode, RatingsTable,
};
use divmine::dataio::AnnotationRecord;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() {
    // five annotators rate 80 samples; each annotator has a bias and an
    // idiosyncratic scale, which normalization removes
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let truth: Vec<(f64, f64)> = (0..80)
        .map(|_| (rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9)))
        .collect();
    let mut records = Vec::new();
    for a in 0..5 {
        let bias = 0.12 * (a as f64 - 2.0);
        let scale = 0.6 + 0.2 * a as f64;
        for (i, &(v, ar)) in truth.iter().enumerate() {
            let nv: f64 = rng.sample(StandardNormal);
            let na: f64 = rng.sample(StandardNormal);
            records.push(AnnotationRecord {
                sample_id: format!("s{i:03}"),
                annotator_id: format!("ann{a}"),
                valence: (scale * v + bias + 0.08 * nv).clamp(-1.0, 1.0),
                arousal: (scale * ar + bias + 0.08 * na).clamp(-1.0, 1.0),
            });
        }
    }

    let normalized = normalize_annotators(&records);
    let table = RatingsTable::from_records(&normalized).unwrap();
    println!(
        "{} samples x {} annotators",
        table.n_samples(),
        table.n_annotators()
    );

    let gold = aggregate_gold(&table).unwrap();
    println!(
        "gold sample 0: valence {:.3}, arousal {:.3} ({} raters)",
        gold.valence[0], gold.arousal[0], gold.n_raters[0]
    );

    let search =
        optimize_valence_threshold(&table, &default_threshold_grid(), KappaMode::VsVote).unwrap();
    println!(
        "best valence threshold {:.3} with mean kappa {:.3}",
        search.best_t, search.best_kappa
    );

    let report = agreement_report(&table, search.best_t, KappaMode::VsVote).unwrap();
    println!(
        "spearman: valence {:.3} arousal {:.3}",
        report.valence_spearman, report.arousal_spearman
    );
    println!(
        "kappa:    valence {:.3} arousal {:.3}",
        report.valence_kappa, report.arousal_kappa
    );

    let t = search.best_t;
    println!(
        "labels at t={t:.3}: gold 0 -> {}/{}",
        valence_label(gold.valence[0], t).name(),
        arousal_label(gold.arousal[0]).name()
    );
}
