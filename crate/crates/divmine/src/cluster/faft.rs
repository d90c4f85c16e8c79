//! Farthest-first traversal.

use rand::RngExt;
use rayon::prelude::*;

use super::{seeded_rng, DistSource};
use crate::dataio::FeatureMatrix;
use crate::metric::Metric;
use crate::{Error, Result};

/// Farthest-first traversal with a seeded uniform-random start.
///
/// After the start, each step picks the point maximizing the minimum
/// distance to everything already selected (ties to the lowest index).
/// The result is prefix-stable: the first m entries for n_select = M
/// equal the full result for n_select = m, given the same seed.
pub fn faft(data: &FeatureMatrix, n_select: usize, metric: Metric, seed: u64) -> Result<Vec<usize>> {
    let n = data.n();
    check_n_select(n, n_select)?;
    let mut rng = seeded_rng(seed);
    let start = rng.random_range(0..n);
    // lazy source: FAFT only needs one row of distances per step
    let ds = DistSource::Lazy { data, metric };
    Ok(faft_core(&ds, start, n_select))
}

/// Farthest-first traversal from a fixed start index.
pub fn faft_from(
    data: &FeatureMatrix,
    start: usize,
    n_select: usize,
    metric: Metric,
) -> Result<Vec<usize>> {
    let n = data.n();
    check_n_select(n, n_select)?;
    if start >= n {
        return Err(Error::Config(format!("start index {start} out of range (n={n})")));
    }
    let ds = DistSource::Lazy { data, metric };
    Ok(faft_core(&ds, start, n_select))
}

fn check_n_select(n: usize, n_select: usize) -> Result<()> {
    if n_select == 0 || n_select > n {
        return Err(Error::Config(format!(
            "n_select must satisfy 1 <= n_select <= n (n_select={n_select}, n={n})"
        )));
    }
    Ok(())
}

pub(crate) fn faft_core(ds: &DistSource, start: usize, n_select: usize) -> Vec<usize> {
    let n = ds.n();
    let mut selected = Vec::with_capacity(n_select);
    let mut chosen = vec![false; n];
    selected.push(start);
    chosen[start] = true;
    let mut dmin: Vec<f64> = (0..n).into_par_iter().map(|i| ds.dist(i, start)).collect();

    while selected.len() < n_select {
        let mut best: Option<(f64, usize)> = None;
        for i in 0..n {
            if chosen[i] {
                continue;
            }
            if best.is_none_or(|(d, _)| dmin[i] > d) {
                best = Some((dmin[i], i));
            }
        }
        let (_, next) = best.expect("n_select <= n leaves a candidate");
        selected.push(next);
        chosen[next] = true;
        dmin.par_iter_mut().enumerate().for_each(|(i, d)| {
            let dn = ds.dist(i, next);
            if dn < *d {
                *d = dn;
            }
        });
    }
    selected
}
