//! PCA over one feature block.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::dataio::{BlockSpec, Dataset, FeatureMatrix};
use crate::{Error, Result};

/// A fitted PCA: orthonormal component rows over one block's columns.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub block: String,
    pub mean: Vec<f64>,
    /// n_comp rows, each of the block's width.
    pub components: Vec<Vec<f64>>,
    /// Eigenvalues of the sample covariance, descending.
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }
}

/// Fits PCA on the named block. Requires `n_comp <= block width` and
/// `n_comp <= n - 1` (sample covariance needs n >= 2).
pub fn fit_pca(ds: &Dataset, block: &str, n_comp: usize) -> Result<PcaModel> {
    let b = ds
        .features()
        .block(block)
        .ok_or_else(|| Error::Config(format!("unknown feature block '{block}'")))?
        .clone();
    let n = ds.n();
    if n_comp == 0 {
        return Err(Error::Config("n_comp must be >= 1".into()));
    }
    if n_comp > b.width {
        return Err(Error::Config(format!(
            "n_comp {n_comp} exceeds block '{block}' width {}",
            b.width
        )));
    }
    if n < 2 || n_comp > n - 1 {
        return Err(Error::Config(format!(
            "n_comp {n_comp} needs at least {} samples, have {n}",
            n_comp + 1
        )));
    }

    let w = b.width;
    let m = ds.features();
    let mut mean = vec![0.0; w];
    for i in 0..n {
        let row = &m.row(i)[b.cols()];
        for (s, v) in mean.iter_mut().zip(row) {
            *s += v;
        }
    }
    for s in &mut mean {
        *s /= n as f64;
    }

    // sample covariance (divide by n-1)
    let mut cov = DMatrix::<f64>::zeros(w, w);
    for i in 0..n {
        let row = &m.row(i)[b.cols()];
        for p in 0..w {
            let dp = row[p] - mean[p];
            for q in p..w {
                cov[(p, q)] += dp * (row[q] - mean[q]);
            }
        }
    }
    let denom = (n - 1) as f64;
    for p in 0..w {
        for q in p..w {
            let v = cov[(p, q)] / denom;
            cov[(p, q)] = v;
            cov[(q, p)] = v;
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..w).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut components = Vec::with_capacity(n_comp);
    let mut explained_variance = Vec::with_capacity(n_comp);
    for &col in order.iter().take(n_comp) {
        let mut comp: Vec<f64> = eig.eigenvectors.column(col).iter().copied().collect();
        // sign convention: largest-magnitude coordinate is positive
        let pivot = comp
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| {
                a.abs()
                    .total_cmp(&b.abs())
                    .then(ib.cmp(ia)) // first index wins ties
            })
            .map(|(i, _)| i)
            .unwrap();
        if comp[pivot] < 0.0 {
            for v in &mut comp {
                *v = -*v;
            }
        }
        components.push(comp);
        explained_variance.push(eig.eigenvalues[col].max(0.0));
    }

    Ok(PcaModel {
        block: block.to_string(),
        mean,
        components,
        explained_variance,
    })
}

/// Replaces the model's block with its projection; other blocks keep their
/// values, with later blocks' start columns shifted accordingly.
pub fn apply_pca(ds: &Dataset, model: &PcaModel) -> Result<Dataset> {
    let m = ds.features();
    let b = m
        .block(&model.block)
        .ok_or_else(|| Error::Config(format!("unknown feature block '{}'", model.block)))?
        .clone();
    if model.mean.len() != b.width || model.components.iter().any(|c| c.len() != b.width) {
        return Err(Error::Validation(format!(
            "model for block '{}' expects width {}, dataset has {}",
            model.block,
            model.mean.len(),
            b.width
        )));
    }
    let n_comp = model.components.len();

    let mut rows = Vec::with_capacity(m.n());
    for i in 0..m.n() {
        let row = m.row(i);
        let mut out = Vec::with_capacity(m.dim() - b.width + n_comp);
        out.extend_from_slice(&row[..b.start_col]);
        for comp in &model.components {
            let mut y = 0.0;
            for (j, c) in b.cols().enumerate() {
                y += comp[j] * (row[c] - model.mean[j]);
            }
            out.push(y);
        }
        out.extend_from_slice(&row[b.start_col + b.width..]);
        rows.push(out);
    }

    let mut blocks = Vec::with_capacity(m.blocks().len());
    for blk in m.blocks() {
        if blk.name == b.name {
            blocks.push(BlockSpec::new(blk.name.clone(), blk.start_col, n_comp));
        } else if blk.start_col > b.start_col {
            blocks.push(BlockSpec::new(
                blk.name.clone(),
                blk.start_col + n_comp - b.width,
                blk.width,
            ));
        } else {
            blocks.push(blk.clone());
        }
    }
    let features = FeatureMatrix::from_rows_with_blocks(rows, blocks)?;
    ds.with_features(features)
}
