//! Feature preparation: per-speaker normalization, PCA compression, and
//! equal-variance block balancing.
//!
//! The intended pipeline order is z-score -> PCA -> balance. Each step is
//! independently callable; fitted transforms (PCA, balance) can be saved to
//! a plain-text model file and re-applied to held-out data.

mod pca;

pub use pca::{apply_pca, fit_pca, PcaModel};

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::dataio::{fmt_g9, Dataset, FeatureMatrix};
use crate::{Error, Result};

pub(crate) fn mean_and_pop_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Z-scores each column of `block` within each speaker's samples.
///
/// Uses population SD. Columns that are constant within a speaker (which
/// includes every singleton speaker) map to 0.
pub fn speaker_zscore(ds: &Dataset, block: &str) -> Result<Dataset> {
    let b = ds
        .features()
        .block(block)
        .ok_or_else(|| Error::Config(format!("unknown feature block '{block}'")))?
        .clone();
    let mut by_speaker: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for i in 0..ds.n() {
        let spk = ds.speaker_id(i);
        if spk.is_empty() {
            return Err(Error::Validation(format!(
                "sample '{}' has no speaker_id",
                ds.sample_id(i)
            )));
        }
        by_speaker.entry(spk).or_default().push(i);
    }

    let mut rows: Vec<Vec<f64>> = (0..ds.n()).map(|i| ds.features().row(i).to_vec()).collect();
    for members in by_speaker.values() {
        for c in b.cols() {
            let vals: Vec<f64> = members.iter().map(|&i| rows[i][c]).collect();
            let (mean, sd) = mean_and_pop_sd(&vals);
            for (&i, &v) in members.iter().zip(&vals) {
                rows[i][c] = if sd == 0.0 { 0.0 } else { (v - mean) / sd };
            }
        }
    }
    let features = FeatureMatrix::from_rows_with_blocks(rows, ds.features().blocks().to_vec())?;
    ds.with_features(features)
}

/// Per-block scale factors bringing every block to total variance 1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceWeights {
    /// (block name, scale) in block order.
    pub scales: Vec<(String, f64)>,
    pub target_per_block_variance: f64,
}

/// Fits balance weights on `ds`: each block's total population variance
/// (sum over its columns) becomes exactly 1.0, so with B blocks each
/// contributes 1/B of the combined variance.
pub fn fit_balance(ds: &Dataset) -> Result<BalanceWeights> {
    let m = ds.features();
    let mut scales = Vec::with_capacity(m.blocks().len());
    for b in m.blocks() {
        let mut total_var = 0.0;
        for c in b.cols() {
            let col: Vec<f64> = (0..m.n()).map(|i| m.row(i)[c]).collect();
            let (_, sd) = mean_and_pop_sd(&col);
            total_var += sd * sd;
        }
        if total_var == 0.0 {
            return Err(Error::Validation(format!(
                "block '{}' has zero total variance, cannot balance",
                b.name
            )));
        }
        scales.push((b.name.clone(), (1.0 / total_var).sqrt()));
    }
    Ok(BalanceWeights {
        scales,
        target_per_block_variance: 1.0,
    })
}

/// Applies fitted balance weights (block names must match the dataset).
pub fn apply_balance(ds: &Dataset, w: &BalanceWeights) -> Result<Dataset> {
    let m = ds.features();
    let mut rows: Vec<Vec<f64>> = (0..m.n()).map(|i| m.row(i).to_vec()).collect();
    for (name, scale) in &w.scales {
        let b = m
            .block(name)
            .ok_or_else(|| Error::Config(format!("balance weights name unknown block '{name}'")))?;
        for row in &mut rows {
            for c in b.cols() {
                row[c] *= scale;
            }
        }
    }
    let features = FeatureMatrix::from_rows_with_blocks(rows, m.blocks().to_vec())?;
    ds.with_features(features)
}

/// Fits and applies balance weights in one step.
pub fn balance_blocks(ds: &Dataset) -> Result<(Dataset, BalanceWeights)> {
    let w = fit_balance(ds)?;
    Ok((apply_balance(ds, &w)?, w))
}

/// Fitted transforms that can be re-applied to held-out data.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransformModel {
    pub pca: Option<PcaModel>,
    pub balance: Option<BalanceWeights>,
}

impl TransformModel {
    /// Applies PCA first (if present), then balance (if present).
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        let mut out = ds.clone();
        if let Some(p) = &self.pca {
            out = apply_pca(&out, p)?;
        }
        if let Some(b) = &self.balance {
            out = apply_balance(&out, b)?;
        }
        Ok(out)
    }
}

fn vec_g9(xs: &[f64]) -> String {
    xs.iter()
        .copied()
        .map(fmt_g9)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn save_model(path: &Path, model: &TransformModel) -> Result<()> {
    let mut out = String::new();
    if let Some(p) = &model.pca {
        let _ = writeln!(out, "pca.block = {}", p.block);
        let _ = writeln!(out, "pca.mean = {}", vec_g9(&p.mean));
        for (i, comp) in p.components.iter().enumerate() {
            let _ = writeln!(out, "pca.component.{i} = {}", vec_g9(comp));
        }
        let _ = writeln!(out, "pca.explained_variance = {}", vec_g9(&p.explained_variance));
    }
    if let Some(b) = &model.balance {
        let _ = writeln!(out, "balance.target = {}", fmt_g9(b.target_per_block_variance));
        for (name, scale) in &b.scales {
            let _ = writeln!(out, "balance.scale.{name} = {}", fmt_g9(*scale));
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<TransformModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut kv: Vec<(String, String, usize)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, i + 1, "expected 'key = value'"))?;
        kv.push((k.trim().to_string(), v.trim().to_string(), i + 1));
    }
    let parse_vec = |v: &str, line: usize| -> Result<Vec<f64>> {
        v.split_whitespace()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(path, line, format!("invalid number '{s}'")))
            })
            .collect()
    };

    let mut pca_block = None;
    let mut pca_mean = None;
    let mut pca_components: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut pca_ev = None;
    let mut bal_target = None;
    let mut bal_scales: Vec<(String, f64)> = Vec::new();
    for (k, v, line) in &kv {
        match k.as_str() {
            "pca.block" => pca_block = Some(v.clone()),
            "pca.mean" => pca_mean = Some(parse_vec(v, *line)?),
            "pca.explained_variance" => pca_ev = Some(parse_vec(v, *line)?),
            "balance.target" => {
                bal_target = Some(
                    v.parse::<f64>()
                        .map_err(|_| Error::parse(path, *line, "invalid target"))?,
                )
            }
            _ => {
                if let Some(idx) = k.strip_prefix("pca.component.") {
                    let idx: usize = idx
                        .parse()
                        .map_err(|_| Error::parse(path, *line, "bad component index"))?;
                    pca_components.push((idx, parse_vec(v, *line)?));
                } else if let Some(name) = k.strip_prefix("balance.scale.") {
                    let scale: f64 = v
                        .parse()
                        .map_err(|_| Error::parse(path, *line, "invalid scale"))?;
                    bal_scales.push((name.to_string(), scale));
                } else {
                    return Err(Error::parse(path, *line, format!("unknown key '{k}'")));
                }
            }
        }
    }

    let pca = match (pca_block, pca_mean, pca_ev) {
        (None, None, None) if pca_components.is_empty() => None,
        (Some(block), Some(mean), Some(explained_variance)) => {
            pca_components.sort_by_key(|(i, _)| *i);
            let components: Vec<Vec<f64>> = pca_components.into_iter().map(|(_, c)| c).collect();
            Some(PcaModel {
                block,
                mean,
                components,
                explained_variance,
            })
        }
        _ => return Err(Error::parse(path, 1, "incomplete pca section")),
    };
    let balance = match bal_target {
        None if bal_scales.is_empty() => None,
        Some(target_per_block_variance) => Some(BalanceWeights {
            scales: bal_scales,
            target_per_block_variance,
        }),
        None => return Err(Error::parse(path, 1, "balance scales without target")),
    };
    Ok(TransformModel { pca, balance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::BlockSpec;
    use crate::dataio::SampleRecord;
    use tempfile::tempdir;

    fn ds_with(rows: Vec<(&str, Vec<f64>)>, blocks: Vec<BlockSpec>) -> Dataset {
        let records = rows
            .into_iter()
            .enumerate()
            .map(|(i, (spk, features))| SampleRecord {
                sample_id: format!("s{i}"),
                source: "src".into(),
                speaker_id: spk.into(),
                duration_s: None,
                snr_db: None,
                features,
            })
            .collect();
        Dataset::from_records(records, blocks).unwrap()
    }

    #[test]
    fn two_point_speaker_maps_to_plus_minus_one() {
        let ds = ds_with(
            vec![("a", vec![0.0]), ("a", vec![2.0])],
            vec![BlockSpec::new("all", 0, 1)],
        );
        let z = speaker_zscore(&ds, "all").unwrap();
        assert_eq!(z.features().row(0), &[-1.0]);
        assert_eq!(z.features().row(1), &[1.0]);
    }

    #[test]
    fn singleton_speaker_maps_to_zero() {
        let ds = ds_with(vec![("solo", vec![5.0])], vec![BlockSpec::new("all", 0, 1)]);
        let z = speaker_zscore(&ds, "all").unwrap();
        assert_eq!(z.features().row(0), &[0.0]);
    }

    #[test]
    fn per_speaker_moments_match_direct_recomputation() {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let speakers = ["p0", "p1", "p2"];
        let rows: Vec<(&str, Vec<f64>)> = (0..30)
            .map(|i| {
                let spk = speakers[i % 3];
                let f: Vec<f64> = (0..4).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
                (spk, f)
            })
            .collect();
        let ds = ds_with(rows, vec![BlockSpec::new("all", 0, 4)]);
        let z = speaker_zscore(&ds, "all").unwrap();
        for spk in speakers {
            let idx: Vec<usize> = (0..z.n()).filter(|&i| z.speaker_id(i) == spk).collect();
            for c in 0..4 {
                let vals: Vec<f64> = idx.iter().map(|&i| z.features().row(i)[c]).collect();
                let (mean, sd) = mean_and_pop_sd(&vals);
                assert!(mean.abs() < 1e-9, "speaker {spk} col {c} mean {mean}");
                assert!((sd - 1.0).abs() < 1e-9, "speaker {spk} col {c} sd {sd}");
            }
        }
    }

    #[test]
    fn zscore_only_touches_named_block() {
        let ds = ds_with(
            vec![("a", vec![0.0, 7.0]), ("a", vec![2.0, 9.0])],
            vec![BlockSpec::new("x", 0, 1), BlockSpec::new("y", 1, 1)],
        );
        let z = speaker_zscore(&ds, "x").unwrap();
        assert_eq!(z.features().row(0), &[-1.0, 7.0]);
        assert_eq!(z.features().row(1), &[1.0, 9.0]);
    }

    #[test]
    fn zscore_is_idempotent() {
        let ds = ds_with(
            vec![
                ("a", vec![1.0, 2.0]),
                ("a", vec![3.0, 1.0]),
                ("a", vec![-2.0, 0.5]),
                ("b", vec![0.0, 4.0]),
                ("b", vec![1.0, -4.0]),
            ],
            vec![BlockSpec::new("all", 0, 2)],
        );
        let once = speaker_zscore(&ds, "all").unwrap();
        let twice = speaker_zscore(&once, "all").unwrap();
        for i in 0..once.n() {
            for (x, y) in once.features().row(i).iter().zip(twice.features().row(i)) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn balance_two_blocks_scale_factors() {
        // block x has per-column pop variance 4 (values -2,2 doubled), block y has 1
        let ds = ds_with(
            vec![("a", vec![-2.0, -1.0]), ("a", vec![2.0, 1.0])],
            vec![BlockSpec::new("x", 0, 1), BlockSpec::new("y", 1, 1)],
        );
        let (_, w) = balance_blocks(&ds).unwrap();
        assert!((w.scales[0].1 - 0.5).abs() < 1e-12);
        assert!((w.scales[1].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn balanced_blocks_contribute_equally() {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<(&str, Vec<f64>)> = (0..40)
            .map(|_| {
                let mut f = Vec::new();
                for scale in [0.1, 5.0, 40.0] {
                    f.push(rng.random::<f64>() * scale);
                    f.push(rng.random::<f64>() * scale);
                }
                ("spk", f)
            })
            .collect();
        let ds = ds_with(
            rows,
            vec![
                BlockSpec::new("a", 0, 2),
                BlockSpec::new("b", 2, 2),
                BlockSpec::new("c", 4, 2),
            ],
        );
        let (out, _) = balance_blocks(&ds).unwrap();
        let mut per_block = Vec::new();
        for b in out.features().blocks() {
            let mut v = 0.0;
            for c in b.cols() {
                let col: Vec<f64> = (0..out.n()).map(|i| out.features().row(i)[c]).collect();
                let (_, sd) = mean_and_pop_sd(&col);
                v += sd * sd;
            }
            per_block.push(v);
        }
        let total: f64 = per_block.iter().sum();
        for v in per_block {
            assert!((v / total - 1.0 / 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn balance_invariant_to_prescaling() {
        let base = ds_with(
            vec![
                ("a", vec![1.0, -3.0]),
                ("a", vec![2.0, 0.5]),
                ("a", vec![-1.0, 2.0]),
            ],
            vec![BlockSpec::new("x", 0, 1), BlockSpec::new("y", 1, 1)],
        );
        let scaled = ds_with(
            vec![
                ("a", vec![7.0 * 1.0, -3.0]),
                ("a", vec![7.0 * 2.0, 0.5]),
                ("a", vec![7.0 * -1.0, 2.0]),
            ],
            vec![BlockSpec::new("x", 0, 1), BlockSpec::new("y", 1, 1)],
        );
        let (out_a, _) = balance_blocks(&base).unwrap();
        let (out_b, _) = balance_blocks(&scaled).unwrap();
        for i in 0..out_a.n() {
            for (x, y) in out_a.features().row(i).iter().zip(out_b.features().row(i)) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_variance_block_is_named_in_error() {
        let ds = ds_with(
            vec![("a", vec![1.0, 5.0]), ("a", vec![2.0, 5.0])],
            vec![BlockSpec::new("ok", 0, 1), BlockSpec::new("flat", 1, 1)],
        );
        match balance_blocks(&ds) {
            Err(Error::Validation(msg)) => assert!(msg.contains("flat")),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn model_file_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.txt");
        let model = TransformModel {
            pca: Some(PcaModel {
                block: "acoustic".into(),
                mean: vec![0.5, -1.25],
                components: vec![vec![0.6, 0.8], vec![-0.8, 0.6]],
                explained_variance: vec![2.0, 0.5],
            }),
            balance: Some(BalanceWeights {
                scales: vec![("acoustic".into(), 0.25), ("rest".into(), 1.5)],
                target_per_block_variance: 1.0,
            }),
        };
        save_model(&path, &model).unwrap();
        assert_eq!(load_model(&path).unwrap(), model);
    }

    #[test]
    fn model_file_partial_sections() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.txt");
        let model = TransformModel {
            pca: None,
            balance: Some(BalanceWeights {
                scales: vec![("all".into(), 2.0)],
                target_per_block_variance: 1.0,
            }),
        };
        save_model(&path, &model).unwrap();
        assert_eq!(load_model(&path).unwrap(), model);
    }
}
