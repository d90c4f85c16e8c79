//! Seeded synthetic corpora with planted cluster structure.
//!
//! Samples are drawn from a Gaussian mixture whose components carry latent
//! valence/arousal scores, so downstream stages can be checked against a
//! known ground truth. Generation is a pure function of (config, seed).

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{BlockSpec, Dataset, SampleRecord};
use crate::{Error, Result};

/// One mixture component: a Gaussian blob with latent affect scores.
#[derive(Debug, Clone)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub valence: f64,
    pub arousal: f64,
}

impl MixtureComponent {
    /// Isotropic component: every coordinate has the same scale.
    pub fn spherical(
        weight: f64,
        mean: Vec<f64>,
        sigma: f64,
        valence: f64,
        arousal: f64,
    ) -> Self {
        let scale = vec![sigma; mean.len()];
        MixtureComponent {
            weight,
            mean,
            scale,
            valence,
            arousal,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n: usize,
    pub blocks: Vec<BlockSpec>,
    pub components: Vec<MixtureComponent>,
    pub n_speakers: usize,
    /// (source name, weight) pairs; samples are tagged proportionally.
    pub sources: Vec<(String, f64)>,
    pub duration_range: (f64, f64),
    pub snr_range: (f64, f64),
    /// SD of Gaussian noise added to each sample's latent scores.
    pub score_jitter: f64,
}

impl SynthConfig {
    pub fn new(n: usize, blocks: Vec<BlockSpec>, components: Vec<MixtureComponent>) -> Self {
        SynthConfig {
            n,
            blocks,
            components,
            n_speakers: 10,
            sources: vec![("synth".to_string(), 1.0)],
            duration_range: (1.0, 20.0),
            snr_range: (20.0, 40.0),
            score_jitter: 0.0,
        }
    }

    /// Mixture drawn from `seed`: `n_regular` blobs with moderate scores,
    /// plus one diffuse far-out component holding `extreme_weight` of the
    /// mass with scores pinned to ±0.95. `extreme_weight` of 0 drops the
    /// extreme component entirely.
    pub fn with_random_components(
        n: usize,
        blocks: Vec<BlockSpec>,
        n_regular: usize,
        extreme_weight: f64,
        seed: u64,
    ) -> Result<Self> {
        if n_regular == 0 {
            return Err(Error::Config("need at least one regular component".into()));
        }
        if !(0.0..1.0).contains(&extreme_weight) {
            return Err(Error::Config("extreme_weight must be in [0, 1)".into()));
        }
        let dim: usize = blocks.iter().map(|b| b.width).sum();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut components = Vec::with_capacity(n_regular + 1);
        let regular_weight = (1.0 - extreme_weight) / n_regular as f64;
        for _ in 0..n_regular {
            let mean: Vec<f64> = (0..dim)
                .map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let valence = rng.random_range(-0.7..0.7);
            let arousal = rng.random_range(-0.7..0.7);
            components.push(MixtureComponent::spherical(
                regular_weight,
                mean,
                1.0,
                valence,
                arousal,
            ));
        }
        if extreme_weight > 0.0 {
            // two diffuse far-out clouds, one per valence pole, so extreme
            // samples are mutually distant outliers with mixed labels
            // rather than one compact single-label cluster
            for valence in [0.95, -0.95] {
                let mean: Vec<f64> = (0..dim)
                    .map(|_| 6.0 * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let arousal = if rng.random::<bool>() { 0.95 } else { -0.95 };
                components.push(MixtureComponent::spherical(
                    extreme_weight / 2.0,
                    mean,
                    2.5,
                    valence,
                    arousal,
                ));
            }
        }
        Ok(SynthConfig::new(n, blocks, components))
    }
}

/// Ground truth attached to each generated sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentLabel {
    pub component: usize,
    pub valence: f64,
    pub arousal: f64,
}

fn weighted_pick(weights: &[f64], total: f64, u: f64) -> usize {
    let target = u * total;
    let mut cum = 0.0;
    for (i, w) in weights.iter().enumerate() {
        cum += w;
        if target < cum {
            return i;
        }
    }
    weights.len() - 1
}

pub fn gen_synthetic(cfg: &SynthConfig, seed: u64) -> Result<(Dataset, Vec<LatentLabel>)> {
    if cfg.components.is_empty() {
        return Err(Error::Config("mixture needs at least one component".into()));
    }
    let dim: usize = cfg.blocks.iter().map(|b| b.width).sum();
    for (i, c) in cfg.components.iter().enumerate() {
        if c.mean.len() != dim || c.scale.len() != dim {
            return Err(Error::Config(format!(
                "component {i}: mean/scale length must equal total block width {dim}"
            )));
        }
        if !(c.weight > 0.0) {
            return Err(Error::Config(format!("component {i}: weight must be > 0")));
        }
    }
    if cfg.n_speakers == 0 {
        return Err(Error::Config("n_speakers must be >= 1".into()));
    }
    if cfg.sources.is_empty() || cfg.sources.iter().any(|(_, w)| !(*w > 0.0)) {
        return Err(Error::Config("sources must be nonempty with positive weights".into()));
    }
    if cfg.duration_range.0 > cfg.duration_range.1 || cfg.snr_range.0 > cfg.snr_range.1 {
        return Err(Error::Config("metadata ranges inverted".into()));
    }
    if cfg.score_jitter < 0.0 {
        return Err(Error::Config("score_jitter must be >= 0".into()));
    }

    let comp_weights: Vec<f64> = cfg.components.iter().map(|c| c.weight).collect();
    let comp_total: f64 = comp_weights.iter().sum();
    let src_weights: Vec<f64> = cfg.sources.iter().map(|(_, w)| *w).collect();
    let src_total: f64 = src_weights.iter().sum();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(cfg.n);
    let mut labels = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let c = weighted_pick(&comp_weights, comp_total, rng.random::<f64>());
        let comp = &cfg.components[c];
        let mut features = Vec::with_capacity(dim);
        for j in 0..dim {
            let z: f64 = rng.sample(StandardNormal);
            features.push(comp.mean[j] + comp.scale[j] * z);
        }
        let speaker = rng.random_range(0..cfg.n_speakers);
        let source = weighted_pick(&src_weights, src_total, rng.random::<f64>());
        let (dlo, dhi) = cfg.duration_range;
        let duration = dlo + (dhi - dlo) * rng.random::<f64>();
        let (slo, shi) = cfg.snr_range;
        let snr = slo + (shi - slo) * rng.random::<f64>();
        let (valence, arousal) = if cfg.score_jitter > 0.0 {
            let zv: f64 = rng.sample(StandardNormal);
            let za: f64 = rng.sample(StandardNormal);
            (
                (comp.valence + cfg.score_jitter * zv).clamp(-1.0, 1.0),
                (comp.arousal + cfg.score_jitter * za).clamp(-1.0, 1.0),
            )
        } else {
            (comp.valence, comp.arousal)
        };

        records.push(SampleRecord {
            sample_id: format!("s{i:06}"),
            source: cfg.sources[source].0.clone(),
            speaker_id: format!("spk{speaker:03}"),
            duration_s: Some(duration),
            snr_db: Some(snr),
            features,
        });
        labels.push(LatentLabel {
            component: c,
            valence,
            arousal,
        });
    }
    let ds = Dataset::from_records(records, cfg.blocks.clone())?;
    Ok((ds, labels))
}
