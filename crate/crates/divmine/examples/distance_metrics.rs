//! The five distance functions and the condensed pairwise matrix.

use divmine::dataio::FeatureMatrix;
use divmine::metric::{distance, pairwise, Metric};

fn main() {
    let a = [1.0, 2.0, 3.0, 4.0];
    let b = [2.0, 2.0, 1.0, 8.0];
    println!("distances between {a:?} and {b:?}:");
    for m in Metric::ALL {
        println!("  {:<10} {:.6}", m.name(), distance(&a, &b, m));
    }

    // cosine and pearson live in [0, 2]; an affine shift changes cosine
    // but leaves pearson alone
    let shifted: Vec<f64> = b.iter().map(|x| 10.0 * x + 5.0).collect();
    println!(
        "after affine shift of b: cosine {:.6}, pearson {:.6}",
        distance(&a, &shifted, Metric::Cosine),
        distance(&a, &shifted, Metric::Pearson)
    );

    let rows = vec![
        vec![0.0, 0.0],
        vec![1.0, 0.0],
        vec![0.0, 1.0],
        vec![3.0, 4.0],
    ];
    let data = FeatureMatrix::from_rows(rows).unwrap();
    let dm = pairwise(&data, Metric::Euclidean, 1000).unwrap();
    println!("condensed euclidean matrix (n=4, {} entries):", 4 * 3 / 2);
    for i in 0..4 {
        let row: Vec<String> = (0..4).map(|j| format!("{:.3}", dm.get(i, j))).collect();
        println!("  {}", row.join("  "));
    }

    // the cap guards against accidental O(n^2) blowups
    let err = pairwise(&data, Metric::Euclidean, 3).unwrap_err();
    println!("cap exceeded: {err}");
}
