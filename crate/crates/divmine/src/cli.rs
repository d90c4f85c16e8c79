//! Stage runner: wires INI-style config files to the library.
//!
//! Each stage reads its inputs from `[paths]`, its knobs from a section
//! named after the stage, and writes its outputs plus a
//! `manifest-<stage>.txt` into the output directory. Every output file
//! carries a `# config=<hash> seed=<seed>` comment, and manifests contain
//! no timestamps, so a rerun with the same config and seed is
//! byte-identical. On error, files already written by the failing stage
//! are removed.
//!
//! Stage seeds are derived from the master seed per purpose, so changing
//! one stage's knobs does not shift another stage's random draws.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::annostats::{
    aggregate_gold, agreement_report, arousal_label, default_threshold_grid, normalize_annotators,
    optimize_valence_threshold, valence_label, Dimension, KappaMode, RatingsTable,
};
use crate::cluster::{
    agglomerative, bisecting_kmeans, clara, kmedoids, kmeans, Centers, ClusteringConfig,
    ClusteringResult, Init, Linkage,
};
use crate::config::{RawConfig, RunConfig};
use crate::dataio::{
    check_header, csv_reader, filter_metadata, fmt_g9, gen_synthetic, load_annotations,
    load_blocks, load_features, parse_f64, record_line, write_annotations, write_blocks,
    write_features, write_table, AnnotationRecord, BlockSpec, Dataset, FeatureMatrix, SynthConfig,
};
use crate::featprep::{balance_blocks, fit_pca, apply_pca, save_model, speaker_zscore, TransformModel};
use crate::metric::{Metric, DEFAULT_PAIRWISE_CAP};
use crate::posthoc::{
    compare_variants, default_size_grid, diversity_curve, purity_grid, standard_variants,
    CompareBy, DiversityConfig, DiversityCurve, GridConfig, GridLabels, PairwiseTest, PurityCell,
    Strategy,
};
use crate::select::{
    medoid_neighborhood_select, random_select, write_selection, SelectedSet, SelectionPlan,
};
use crate::{derive_seed, Error, Result};

// ---------------------------------------------------------------------------
// stages

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Synth,
    Ingest,
    Prep,
    Cluster,
    Select,
    Annostats,
    Diversity,
    PurityGrid,
    Compare,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Synth,
        Stage::Ingest,
        Stage::Prep,
        Stage::Cluster,
        Stage::Select,
        Stage::Annostats,
        Stage::Diversity,
        Stage::PurityGrid,
        Stage::Compare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Ingest => "ingest",
            Stage::Prep => "prep",
            Stage::Cluster => "cluster",
            Stage::Select => "select",
            Stage::Annostats => "annostats",
            Stage::Diversity => "diversity",
            Stage::PurityGrid => "purity-grid",
            Stage::Compare => "compare",
        }
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Stage> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown stage '{s}' (expected one of: {})",
                    Stage::ALL.map(Stage::name).join(", ")
                ))
            })
    }
}

#[derive(Debug)]
pub struct StageOutcome {
    /// Data files written, in write order.
    pub outputs: Vec<PathBuf>,
    pub manifest: PathBuf,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    out_dir: PathBuf,
    provenance: String,
    created: Vec<PathBuf>,
    extras: Vec<(String, String)>,
}

impl<'a> Ctx<'a> {
    /// Registers an output path; on stage failure it gets cleaned up.
    fn out(&mut self, name: &str) -> PathBuf {
        let p = self.out_dir.join(name);
        self.created.push(p.clone());
        p
    }

    fn prov(&self) -> Option<&str> {
        Some(&self.provenance)
    }

    fn note(&mut self, key: &str, value: impl std::fmt::Display) {
        self.extras.push((key.to_string(), value.to_string()));
    }

    fn raw(&self) -> &'a RawConfig {
        &self.cfg.raw
    }
}

/// Runs one stage against a config file. `seed_override` takes precedence
/// over `[run] seed`; both default to 0.
pub fn run_stage(stage: Stage, config_path: &Path, seed_override: Option<u64>) -> Result<StageOutcome> {
    let cfg = RunConfig::load(config_path, seed_override)?;
    let out_dir = cfg.out_dir();
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let provenance = format!("config={} seed={}", cfg.raw.hash(), cfg.master_seed);
    let mut ctx = Ctx {
        cfg: &cfg,
        out_dir,
        provenance,
        created: Vec::new(),
        extras: Vec::new(),
    };
    let run = match stage {
        Stage::Synth => stage_synth(&mut ctx),
        Stage::Ingest => stage_ingest(&mut ctx),
        Stage::Prep => stage_prep(&mut ctx),
        Stage::Cluster => stage_cluster(&mut ctx),
        Stage::Select => stage_select(&mut ctx),
        Stage::Annostats => stage_annostats(&mut ctx),
        Stage::Diversity => stage_diversity(&mut ctx),
        Stage::PurityGrid => stage_purity_grid(&mut ctx),
        Stage::Compare => stage_compare(&mut ctx),
    };
    match run {
        Ok(()) => {
            let manifest = write_manifest(&ctx, stage, config_path)?;
            Ok(StageOutcome {
                outputs: ctx.created,
                manifest,
            })
        }
        Err(e) => {
            for p in &ctx.created {
                let _ = std::fs::remove_file(p);
            }
            Err(e)
        }
    }
}

fn write_manifest(ctx: &Ctx, stage: Stage, config_path: &Path) -> Result<PathBuf> {
    let path = ctx.out_dir.join(format!("manifest-{}.txt", stage.name()));
    let mut out = String::new();
    let _ = writeln!(out, "stage = {}", stage.name());
    let _ = writeln!(out, "tool_version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "config = {}", config_path.display());
    let _ = writeln!(out, "config_hash = {}", ctx.cfg.raw.hash());
    let _ = writeln!(out, "seed = {}", ctx.cfg.master_seed);
    for p in &ctx.created {
        let _ = writeln!(out, "output = {}", p.display());
    }
    for (k, v) in &ctx.extras {
        let _ = writeln!(out, "{k} = {v}");
    }
    std::fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// config helpers

/// "name:width" list to blocks with cumulative start columns.
fn parse_block_list(items: &[String]) -> Result<Vec<BlockSpec>> {
    let mut blocks = Vec::with_capacity(items.len());
    let mut start = 0;
    for item in items {
        let (name, width) = item
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("block '{item}': expected name:width")))?;
        let width: usize = width
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("block '{item}': bad width")))?;
        if width == 0 {
            return Err(Error::Config(format!("block '{item}': width must be >= 1")));
        }
        blocks.push(BlockSpec::new(name.trim(), start, width));
        start += width;
    }
    Ok(blocks)
}

/// "lo:hi" pair of floats.
fn parse_range(s: &str, key: &str) -> Result<(f64, f64)> {
    let parse = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("{key}: bad number '{}'", t.trim())))
    };
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("{key}: expected lo:hi")))?;
    Ok((parse(lo)?, parse(hi)?))
}

/// Inclusive bound that the literal value "none" disables.
fn bound(raw: &RawConfig, section: &str, key: &str, default: f64) -> Result<Option<f64>> {
    match raw.get(section, key) {
        None => Ok(Some(default)),
        Some("none") => Ok(None),
        Some(_) => Ok(raw.get_f64(section, key)?),
    }
}

fn features_path(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.check_input_paths(&["features"])?;
    cfg.path("features")
}

/// Loads the features table; block layout comes from `[paths] blocks`
/// when given, otherwise the whole width becomes one block named "all".
fn load_input_features(cfg: &RunConfig) -> Result<Dataset> {
    let fpath = features_path(cfg)?;
    let blocks = match cfg.raw.get("paths", "blocks") {
        Some(_) => {
            cfg.check_input_paths(&["blocks"])?;
            load_blocks(&cfg.path("blocks")?)?
        }
        None => {
            let dim = peek_feature_dim(&fpath)?;
            vec![BlockSpec::new("all", 0, dim)]
        }
    };
    load_features(&fpath, blocks)
}

fn peek_feature_dim(path: &Path) -> Result<usize> {
    let mut rdr = csv_reader(path)?;
    let header = rdr
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?;
    if header.len() <= 5 {
        return Err(Error::parse(path, 1, "header has no feature columns"));
    }
    Ok(header.len() - 5)
}

/// Block names plus "all" for the full concatenation; just the block
/// names when the table is a single block already covering everything.
fn default_feature_sets(ds: &Dataset) -> Vec<String> {
    let mut sets: Vec<String> = ds.features().blocks().iter().map(|b| b.name.clone()).collect();
    if sets.len() > 1 {
        sets.push("all".to_string());
    }
    sets
}

/// "all" means the full matrix, anything else is a block name.
fn feature_view(ds: &Dataset, set: &str) -> Result<FeatureMatrix> {
    if set == "all" {
        Ok(ds.features().clone())
    } else {
        ds.features().restrict_to_block(set)
    }
}

/// Positions of `ids` in the dataset's sample order. Ids the dataset does
/// not contain are skipped (the file may predate a filtering step); every
/// dataset sample must be covered.
fn align_to_dataset<'a>(
    ds: &Dataset,
    ids: impl Iterator<Item = &'a str>,
    what: &str,
) -> Result<Vec<Option<usize>>> {
    let by_id: HashMap<&str, usize> = (0..ds.n()).map(|i| (ds.sample_id(i), i)).collect();
    let mut pos = vec![None; ds.n()];
    let mut row = 0usize;
    for id in ids {
        if let Some(&i) = by_id.get(id) {
            if pos[i].is_some() {
                return Err(Error::Validation(format!(
                    "{what}: duplicate entry for sample '{id}'"
                )));
            }
            pos[i] = Some(row);
        }
        row += 1;
    }
    if let Some(i) = pos.iter().position(Option::is_none) {
        return Err(Error::Validation(format!(
            "{what}: no entry for sample '{}'",
            ds.sample_id(i)
        )));
    }
    Ok(pos)
}

// ---------------------------------------------------------------------------
// stage file formats

const SCORES_HEADER: [&str; 3] = ["sample_id", "valence", "arousal"];
const LABELS_HEADER: [&str; 3] = ["sample_id", "valence", "arousal"];
const ASSIGNMENT_HEADER: [&str; 3] = ["sample_id", "cluster", "is_medoid"];
const PURITY_HEADER: [&str; 7] = [
    "variant",
    "feature_set",
    "k",
    "rep",
    "dimension",
    "purity",
    "n_excluded",
];
const CURVES_HEADER: [&str; 6] = [
    "strategy",
    "feature_set",
    "dimension",
    "n_samples",
    "sd_mean",
    "sd_stderr",
];
const TESTS_HEADER: [&str; 3] = ["comparison", "U", "p"];

/// Continuous per-sample valence/arousal in [-1, 1].
pub fn load_scores(path: &Path) -> Result<Vec<(String, f64, f64)>> {
    let mut rdr = csv_reader(path)?;
    let header = rdr
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    check_header(path, &header, &SCORES_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(path, i + 2, e.to_string()))?;
        let line = record_line(&rec, i + 2);
        if rec.len() != 3 {
            return Err(Error::parse(
                path,
                line,
                format!("expected 3 fields, got {}", rec.len()),
            ));
        }
        let v = parse_f64(path, line, "valence", &rec[1])?;
        let a = parse_f64(path, line, "arousal", &rec[2])?;
        for (name, x) in [("valence", v), ("arousal", a)] {
            if !(-1.0..=1.0).contains(&x) {
                return Err(Error::parse(path, line, format!("{name} {x} outside [-1, 1]")));
            }
        }
        out.push((rec[0].to_string(), v, a));
    }
    Ok(out)
}

pub fn write_scores(path: &Path, rows: &[(String, f64, f64)], provenance: Option<&str>) -> Result<()> {
    let table = rows
        .iter()
        .map(|(id, v, a)| vec![id.clone(), fmt_g9(*v), fmt_g9(*a)]);
    write_table(path, provenance, &SCORES_HEADER, table)
}

/// Categorical per-sample valence/arousal labels. Label vocabularies are
/// free-form strings.
pub fn load_labels(path: &Path) -> Result<Vec<(String, String, String)>> {
    let mut rdr = csv_reader(path)?;
    let header = rdr
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    check_header(path, &header, &LABELS_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(path, i + 2, e.to_string()))?;
        let line = record_line(&rec, i + 2);
        if rec.len() != 3 {
            return Err(Error::parse(
                path,
                line,
                format!("expected 3 fields, got {}", rec.len()),
            ));
        }
        out.push((rec[0].to_string(), rec[1].to_string(), rec[2].to_string()));
    }
    Ok(out)
}

pub fn write_labels(
    path: &Path,
    rows: &[(String, String, String)],
    provenance: Option<&str>,
) -> Result<()> {
    let table = rows
        .iter()
        .map(|(id, v, a)| vec![id.clone(), v.clone(), a.clone()]);
    write_table(path, provenance, &LABELS_HEADER, table)
}

/// Per-sample cluster index with medoid rows flagged.
pub fn load_assignment(path: &Path) -> Result<Vec<(String, usize, bool)>> {
    let mut rdr = csv_reader(path)?;
    let header = rdr
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    check_header(path, &header, &ASSIGNMENT_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(path, i + 2, e.to_string()))?;
        let line = record_line(&rec, i + 2);
        if rec.len() != 3 {
            return Err(Error::parse(
                path,
                line,
                format!("expected 3 fields, got {}", rec.len()),
            ));
        }
        let cluster: usize = rec[1]
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad cluster '{}'", &rec[1])))?;
        let is_medoid = match &rec[2] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::parse(
                    path,
                    line,
                    format!("is_medoid must be 0 or 1, got '{other}'"),
                ))
            }
        };
        out.push((rec[0].to_string(), cluster, is_medoid));
    }
    Ok(out)
}

pub fn write_assignment(
    path: &Path,
    ds: &Dataset,
    result: &ClusteringResult,
    provenance: Option<&str>,
) -> Result<()> {
    let rows = (0..ds.n()).map(|i| {
        vec![
            ds.sample_id(i).to_string(),
            result.assignment[i].to_string(),
            if result.is_medoid(i) { "1" } else { "0" }.to_string(),
        ]
    });
    write_table(path, provenance, &ASSIGNMENT_HEADER, rows)
}

/// Failed grid cells keep their row with empty purity/n_excluded fields.
pub fn load_purity_rows(path: &Path) -> Result<Vec<PurityCell>> {
    let mut rdr = csv_reader(path)?;
    let header = rdr
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    check_header(path, &header, &PURITY_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(path, i + 2, e.to_string()))?;
        let line = record_line(&rec, i + 2);
        if rec.len() != 7 {
            return Err(Error::parse(
                path,
                line,
                format!("expected 7 fields, got {}", rec.len()),
            ));
        }
        let k: usize = rec[2]
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad k '{}'", &rec[2])))?;
        let rep: usize = rec[3]
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad rep '{}'", &rec[3])))?;
        let dimension: Dimension = rec[4]
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad dimension '{}'", &rec[4])))?;
        let purity = if rec[5].is_empty() {
            None
        } else {
            Some(parse_f64(path, line, "purity", &rec[5])?)
        };
        let n_excluded = if rec[6].is_empty() {
            None
        } else {
            Some(rec[6].parse().map_err(|_| {
                Error::parse(path, line, format!("bad n_excluded '{}'", &rec[6]))
            })?)
        };
        out.push(PurityCell {
            variant: rec[0].to_string(),
            feature_set: rec[1].to_string(),
            k,
            rep,
            dimension,
            purity,
            n_excluded,
        });
    }
    Ok(out)
}

pub fn write_purity_rows(path: &Path, cells: &[PurityCell], provenance: Option<&str>) -> Result<()> {
    let rows = cells.iter().map(|c| {
        vec![
            c.variant.clone(),
            c.feature_set.clone(),
            c.k.to_string(),
            c.rep.to_string(),
            c.dimension.name().to_string(),
            c.purity.map(fmt_g9).unwrap_or_default(),
            c.n_excluded.map(|x| x.to_string()).unwrap_or_default(),
        ]
    });
    write_table(path, provenance, &PURITY_HEADER, rows)
}

pub fn write_curves(path: &Path, curves: &[DiversityCurve], provenance: Option<&str>) -> Result<()> {
    let rows = curves.iter().flat_map(|c| {
        c.points.iter().map(move |p| {
            vec![
                c.strategy.name().to_string(),
                c.feature_set.clone(),
                c.dimension.name().to_string(),
                p.n_samples.to_string(),
                fmt_g9(p.sd_mean),
                fmt_g9(p.sd_stderr),
            ]
        })
    });
    write_table(path, provenance, &CURVES_HEADER, rows)
}

pub fn write_tests(path: &Path, tests: &[PairwiseTest], provenance: Option<&str>) -> Result<()> {
    let rows = tests.iter().map(|t| {
        vec![
            format!("{}_vs_{}", t.group_a, t.group_b),
            fmt_g9(t.u),
            fmt_g9(t.p),
        ]
    });
    write_table(path, provenance, &TESTS_HEADER, rows)
}

// ---------------------------------------------------------------------------
// synth

fn stage_synth(ctx: &mut Ctx) -> Result<()> {
    let raw = ctx.raw();
    let n = raw
        .get_usize("synth", "n")?
        .ok_or_else(|| Error::Config("[synth] n is required".into()))?;
    let block_list = raw
        .get_list("synth", "blocks")
        .unwrap_or_else(|| {
            ["acoustic:25", "embedding:16", "text:10"]
                .map(String::from)
                .to_vec()
        });
    let blocks = parse_block_list(&block_list)?;
    let n_components = raw.get_usize("synth", "components")?.unwrap_or(8);
    let extreme_weight = raw.get_f64("synth", "extreme_weight")?.unwrap_or(0.0);
    let label_threshold = raw.get_f64("synth", "label_threshold")?.unwrap_or(0.1);
    crate::annostats::validate_threshold(label_threshold)?;

    let comp_seed = derive_seed(ctx.cfg.master_seed, "synth", "components");
    let mut scfg =
        SynthConfig::with_random_components(n, blocks, n_components, extreme_weight, comp_seed)?;
    if let Some(s) = raw.get_usize("synth", "n_speakers")? {
        scfg.n_speakers = s;
    }
    if let Some(items) = raw.get_list("synth", "sources") {
        let mut sources = Vec::with_capacity(items.len());
        for item in &items {
            match item.split_once(':') {
                Some((name, w)) => {
                    let w: f64 = w.trim().parse().map_err(|_| {
                        Error::Config(format!("[synth] sources: bad weight in '{item}'"))
                    })?;
                    sources.push((name.trim().to_string(), w));
                }
                None => sources.push((item.clone(), 1.0)),
            }
        }
        scfg.sources = sources;
    }
    scfg.score_jitter = raw.get_f64("synth", "score_jitter")?.unwrap_or(0.05);
    if let Some(s) = raw.get("synth", "duration_range") {
        scfg.duration_range = parse_range(s, "[synth] duration_range")?;
    }
    if let Some(s) = raw.get("synth", "snr_range") {
        scfg.snr_range = parse_range(s, "[synth] snr_range")?;
    }

    let corpus_seed = derive_seed(ctx.cfg.master_seed, "synth", "corpus");
    let (ds, latents) = gen_synthetic(&scfg, corpus_seed)?;

    write_features(&ctx.out("features.csv"), &ds, ctx.prov())?;
    write_blocks(&ctx.out("blocks.txt"), ds.features().blocks(), ctx.prov())?;
    let scores: Vec<(String, f64, f64)> = (0..ds.n())
        .map(|i| (ds.sample_id(i).to_string(), latents[i].valence, latents[i].arousal))
        .collect();
    write_scores(&ctx.out("scores.csv"), &scores, ctx.prov())?;
    let labels: Vec<(String, String, String)> = scores
        .iter()
        .map(|(id, v, a)| {
            (
                id.clone(),
                valence_label(*v, label_threshold).name().to_string(),
                arousal_label(*a).name().to_string(),
            )
        })
        .collect();
    write_labels(&ctx.out("labels.csv"), &labels, ctx.prov())?;

    let annotators = raw.get_usize("synth", "annotators")?.unwrap_or(0);
    if annotators > 0 {
        let noise = raw.get_f64("synth", "annotator_noise")?.unwrap_or(0.15);
        if noise < 0.0 {
            return Err(Error::Config("[synth] annotator_noise must be >= 0".into()));
        }
        let ann_seed = derive_seed(ctx.cfg.master_seed, "synth", "annotations");
        let records = synth_annotations(&ds, &latents, annotators, noise, ann_seed);
        write_annotations(&ctx.out("annotations.csv"), &records, ctx.prov())?;
        ctx.note("annotators", annotators);
    }

    ctx.note("n", ds.n());
    ctx.note("dim", ds.dim());
    ctx.note("components", scfg.components.len());
    Ok(())
}

/// Each annotator rates every sample: truth plus a per-annotator bias in
/// (-0.1, 0.1) plus Gaussian noise, clamped to [-1, 1].
fn synth_annotations(
    ds: &Dataset,
    latents: &[crate::dataio::LatentLabel],
    annotators: usize,
    noise: f64,
    seed: u64,
) -> Vec<AnnotationRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let biases: Vec<(f64, f64)> = (0..annotators)
        .map(|_| (rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)))
        .collect();
    let mut records = Vec::with_capacity(ds.n() * annotators);
    for i in 0..ds.n() {
        for (a, &(bv, ba)) in biases.iter().enumerate() {
            let zv: f64 = rng.sample(StandardNormal);
            let za: f64 = rng.sample(StandardNormal);
            records.push(AnnotationRecord {
                sample_id: ds.sample_id(i).to_string(),
                annotator_id: format!("a{a:02}"),
                valence: (latents[i].valence + bv + noise * zv).clamp(-1.0, 1.0),
                arousal: (latents[i].arousal + ba + noise * za).clamp(-1.0, 1.0),
            });
        }
    }
    records
}

// ---------------------------------------------------------------------------
// ingest

fn stage_ingest(ctx: &mut Ctx) -> Result<()> {
    let ds = load_input_features(ctx.cfg)?;
    let raw = ctx.raw();
    let min_dur = bound(raw, "ingest", "min_duration_s", 1.0)?;
    let max_dur = bound(raw, "ingest", "max_duration_s", 20.0)?;
    let min_snr = bound(raw, "ingest", "min_snr_db", 20.0)?;
    let kept = filter_metadata(&ds, min_dur, max_dur, min_snr)?;
    write_features(&ctx.out("features_filtered.csv"), &kept, ctx.prov())?;
    ctx.note("n_in", ds.n());
    ctx.note("n_kept", kept.n());
    Ok(())
}

// ---------------------------------------------------------------------------
// prep

fn stage_prep(ctx: &mut Ctx) -> Result<()> {
    let mut ds = load_input_features(ctx.cfg)?;
    let raw = ctx.raw();
    let dim_in = ds.dim();

    let zscore = raw.get_list("prep", "zscore_blocks").unwrap_or_default();
    for b in &zscore {
        ds = speaker_zscore(&ds, b)?;
    }

    let mut model = TransformModel {
        pca: None,
        balance: None,
    };
    if let Some(block) = raw.get("prep", "pca_block") {
        let block = block.to_string();
        let n_comp = raw.get_usize("prep", "pca_components")?.ok_or_else(|| {
            Error::Config("[prep] pca_components is required with pca_block".into())
        })?;
        let pca = fit_pca(&ds, &block, n_comp)?;
        ds = apply_pca(&ds, &pca)?;
        model.pca = Some(pca);
    }
    if raw.get_bool("prep", "balance")?.unwrap_or(true) {
        let (balanced, w) = balance_blocks(&ds)?;
        ds = balanced;
        model.balance = Some(w);
    }

    write_features(&ctx.out("features_prepped.csv"), &ds, ctx.prov())?;
    write_blocks(&ctx.out("blocks_prepped.txt"), ds.features().blocks(), ctx.prov())?;
    save_model(&ctx.out("model.txt"), &model)?;
    ctx.note("n", ds.n());
    ctx.note("dim_in", dim_in);
    ctx.note("dim_out", ds.dim());
    Ok(())
}

// ---------------------------------------------------------------------------
// cluster

fn stage_cluster(ctx: &mut Ctx) -> Result<()> {
    let ds = load_input_features(ctx.cfg)?;
    let raw = ctx.raw();
    let algorithm = raw.get("cluster", "algorithm").unwrap_or("clara").to_string();
    let k = raw
        .get_usize("cluster", "k")?
        .ok_or_else(|| Error::Config("[cluster] k is required".into()))?;
    let metric: Metric = raw.get_enum("cluster", "metric")?.unwrap_or(Metric::Euclidean);
    let feature_set = raw.get("cluster", "feature_set").unwrap_or("all").to_string();
    let data = feature_view(&ds, &feature_set)?;

    let mut ccfg = ClusteringConfig::new(k, metric);
    ccfg.init = raw.get_enum("cluster", "init")?.unwrap_or(Init::Faft);
    ccfg.seed = derive_seed(ctx.cfg.master_seed, "cluster", "main");
    if let Some(m) = raw.get_usize("cluster", "max_iter")? {
        ccfg.max_iter = m;
    }
    if let Some(s) = raw.get_usize("cluster", "subsamples")? {
        ccfg.clara_subsamples = s;
    }
    ccfg.clara_subsample_size = raw.get_usize("cluster", "subsample_size")?;
    ccfg.pam_swap = raw.get_bool("cluster", "pam_swap")?.unwrap_or(false);
    if let Some(cap) = raw.get_usize("cluster", "pairwise_cap")? {
        ccfg.pairwise_cap = cap;
    }

    let result = match algorithm.as_str() {
        "kmedoids" => kmedoids(&data, &ccfg)?,
        "clara" => {
            let outcome = clara(&data, &ccfg)?;
            ctx.note("best_round", outcome.best_round);
            outcome.result
        }
        "kmeans" => kmeans(&data, &ccfg)?,
        "bisecting" => bisecting_kmeans(&data, &ccfg)?,
        "agglomerative" => {
            let linkage: Linkage = raw
                .get_enum("cluster", "linkage")?
                .unwrap_or(Linkage::Average);
            agglomerative(&data, k, metric, linkage)?
        }
        other => {
            return Err(Error::Config(format!(
                "[cluster] unknown algorithm '{other}' (expected kmedoids, clara, kmeans, bisecting, or agglomerative)"
            )))
        }
    };

    write_assignment(&ctx.out("assignment.csv"), &ds, &result, ctx.prov())?;
    ctx.note("algorithm", &algorithm);
    ctx.note("k", result.k());
    ctx.note("feature_set", &feature_set);
    ctx.note("cost", fmt_g9(result.cost));
    ctx.note("converged", result.converged);
    ctx.note("iterations", result.cost_trace.len());
    Ok(())
}

/// Rebuilds a medoid clustering from an assignment table, restricted to
/// the dataset's samples. Cluster indices must be 0..k and every cluster
/// must still contain its flagged medoid.
fn clustering_from_assignment(
    ds: &Dataset,
    rows: &[(String, usize, bool)],
) -> Result<ClusteringResult> {
    let pos = align_to_dataset(ds, rows.iter().map(|r| r.0.as_str()), "assignment")?;
    let assignment: Vec<usize> = pos
        .iter()
        .map(|p| rows[p.expect("aligned")].1)
        .collect();
    let k = match assignment.iter().max() {
        Some(&m) => m + 1,
        None => return Err(Error::Validation("assignment table is empty".into())),
    };
    let mut medoids: Vec<Option<usize>> = vec![None; k];
    let mut seen = vec![false; k];
    for (i, p) in pos.iter().enumerate() {
        let row = &rows[p.expect("aligned")];
        seen[row.1] = true;
        if row.2 {
            if let Some(prev) = medoids[row.1] {
                return Err(Error::Validation(format!(
                    "cluster {} has two medoids: '{}' and '{}'",
                    row.1,
                    ds.sample_id(prev),
                    ds.sample_id(i)
                )));
            }
            medoids[row.1] = Some(i);
        }
    }
    if let Some(c) = seen.iter().position(|s| !s) {
        return Err(Error::Validation(format!("cluster {c} has no samples")));
    }
    let medoids: Vec<usize> = medoids
        .into_iter()
        .enumerate()
        .map(|(c, m)| m.ok_or_else(|| Error::Validation(format!("cluster {c} has no medoid"))))
        .collect::<Result<_>>()?;
    Ok(ClusteringResult {
        centers: Centers::Medoids(medoids),
        assignment,
        cost: 0.0,
        cost_trace: Vec::new(),
        converged: true,
    })
}

// ---------------------------------------------------------------------------
// select

fn stage_select(ctx: &mut Ctx) -> Result<()> {
    let ds = load_input_features(ctx.cfg)?;
    ctx.cfg.check_input_paths(&["assignment"])?;
    let rows = load_assignment(&ctx.cfg.path("assignment")?)?;
    let clustering = clustering_from_assignment(&ds, &rows)?;
    let raw = ctx.raw();

    let sources = match raw.get_list("select", "sources") {
        Some(s) => s,
        None => {
            let mut s: Vec<String> = (0..ds.n()).map(|i| ds.source(i).to_string()).collect();
            s.sort();
            s.dedup();
            s
        }
    };
    let mut plan = SelectionPlan::new(sources);
    if let Some(p) = raw.get_usize("select", "per_cluster")? {
        plan.per_cluster = p;
    }
    if let Some(q) = raw.get_usize("select", "per_source_quota")? {
        plan.per_source_quota = q;
    }
    if let Some(m) = raw.get_bool("select", "source_matched_topup")? {
        plan.source_matched_topup = m;
    }
    plan.random_topup_seed = derive_seed(ctx.cfg.master_seed, "select", "topup");
    let metric: Metric = raw.get_enum("select", "metric")?.unwrap_or(Metric::Euclidean);

    let mined = medoid_neighborhood_select(&clustering, &ds, &plan, metric)?;

    let random_total = raw.get_usize("select", "random_total")?.unwrap_or(0);
    let per_source_list = raw.get_list("select", "random_per_source");
    if random_total > 0 && per_source_list.is_some() {
        return Err(Error::Config(
            "[select] give random_total or random_per_source, not both".into(),
        ));
    }
    let quotas: Vec<(String, usize)> = if let Some(items) = per_source_list {
        let mut quotas = Vec::with_capacity(items.len());
        for item in &items {
            let (name, count) = item.split_once(':').ok_or_else(|| {
                Error::Config(format!(
                    "[select] random_per_source: expected source:count, got '{item}'"
                ))
            })?;
            let count: usize = count.trim().parse().map_err(|_| {
                Error::Config(format!("[select] random_per_source: bad count in '{item}'"))
            })?;
            quotas.push((name.trim().to_string(), count));
        }
        quotas
    } else if random_total > 0 {
        // split as evenly as possible, remainder to the earliest sources
        let k = plan.sources.len();
        plan.sources
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), random_total / k + usize::from(i < random_total % k)))
            .collect()
    } else {
        Vec::new()
    };

    let merged = if quotas.iter().any(|(_, c)| *c > 0) {
        let chosen: std::collections::HashSet<usize> = mined.indices().into_iter().collect();
        let unselected: Vec<usize> = (0..ds.n()).filter(|i| !chosen.contains(i)).collect();
        let pool = ds.subset(&unselected);
        let random = random_select(
            &pool,
            &quotas,
            derive_seed(ctx.cfg.master_seed, "select", "random"),
        )?;
        ctx.note("n_random", random.len());
        let mut samples = mined.samples.clone();
        samples.extend(random.samples);
        let mut per_source = mined.per_source.clone();
        for (s, c) in &random.per_source {
            *per_source.entry(s.clone()).or_insert(0) += c;
        }
        SelectedSet { samples, per_source }
    } else {
        ctx.note("n_random", 0);
        mined.clone()
    };

    write_selection(&ctx.out("selection.csv"), &merged, ctx.prov())?;
    ctx.note("n_mined", mined.len());
    ctx.note("n_total", merged.len());
    for (s, c) in &merged.per_source {
        ctx.note(&format!("selected_{s}"), c);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// annostats

fn stage_annostats(ctx: &mut Ctx) -> Result<()> {
    ctx.cfg.check_input_paths(&["annotations"])?;
    let mut records = load_annotations(&ctx.cfg.path("annotations")?)?;
    let raw = ctx.raw();
    if raw.get_bool("annostats", "normalize")?.unwrap_or(true) {
        records = normalize_annotators(&records);
    }
    let table = RatingsTable::from_records(&records)?;
    let mode: KappaMode = raw
        .get_enum("annostats", "kappa_mode")?
        .unwrap_or(KappaMode::VsVote);

    let threshold = match raw.get_f64("annostats", "valence_threshold")? {
        Some(t) => {
            crate::annostats::validate_threshold(t)?;
            ctx.note("threshold_searched", false);
            t
        }
        None => {
            let grid = match raw.get("annostats", "threshold_grid") {
                Some(spec) => parse_grid(spec)?,
                None => default_threshold_grid(),
            };
            let search = optimize_valence_threshold(&table, &grid, mode)?;
            let rows = search
                .grid_scores
                .iter()
                .map(|(t, k)| vec![fmt_g9(*t), fmt_g9(*k)]);
            write_table(
                &ctx.out("thresholds.csv"),
                ctx.prov(),
                &["threshold", "mean_kappa"],
                rows,
            )?;
            ctx.note("threshold_searched", true);
            ctx.note("best_kappa", fmt_g9(search.best_kappa));
            search.best_t
        }
    };

    let gold = aggregate_gold(&table)?;
    let score_rows: Vec<Vec<String>> = (0..gold.sample_ids.len())
        .map(|i| {
            vec![
                gold.sample_ids[i].clone(),
                fmt_g9(gold.valence[i]),
                fmt_g9(gold.arousal[i]),
                gold.n_raters[i].to_string(),
            ]
        })
        .collect();
    write_table(
        &ctx.out("gold_scores.csv"),
        ctx.prov(),
        &["sample_id", "valence", "arousal", "n_raters"],
        score_rows,
    )?;
    let label_rows: Vec<(String, String, String)> = (0..gold.sample_ids.len())
        .map(|i| {
            (
                gold.sample_ids[i].clone(),
                valence_label(gold.valence[i], threshold).name().to_string(),
                arousal_label(gold.arousal[i]).name().to_string(),
            )
        })
        .collect();
    write_labels(&ctx.out("gold_labels.csv"), &label_rows, ctx.prov())?;

    let report = agreement_report(&table, threshold, mode)?;
    write_table(
        &ctx.out("agreement.csv"),
        ctx.prov(),
        &[
            "n_samples",
            "n_annotators",
            "valence_threshold",
            "valence_spearman",
            "arousal_spearman",
            "valence_kappa",
            "arousal_kappa",
        ],
        [vec![
            report.n_samples.to_string(),
            report.n_annotators.to_string(),
            fmt_g9(report.valence_threshold),
            fmt_g9(report.valence_spearman),
            fmt_g9(report.arousal_spearman),
            fmt_g9(report.valence_kappa),
            fmt_g9(report.arousal_kappa),
        ]],
    )?;

    ctx.note("threshold", fmt_g9(threshold));
    ctx.note("n_samples", report.n_samples);
    ctx.note("n_annotators", report.n_annotators);
    Ok(())
}

/// "start:stop:step" inclusive float grid.
fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!(
            "threshold_grid: expected start:stop:step, got '{spec}'"
        )));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("threshold_grid: bad number '{}'", p.trim())))
        })
        .collect::<Result<_>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || stop < start {
        return Err(Error::Config(
            "threshold_grid: need stop >= start and step > 0".into(),
        ));
    }
    let mut grid = Vec::new();
    let mut i = 0u32;
    loop {
        let t = start + f64::from(i) * step;
        if t > stop + 1e-12 {
            break;
        }
        grid.push(t);
        i += 1;
    }
    Ok(grid)
}

// ---------------------------------------------------------------------------
// diversity

fn stage_diversity(ctx: &mut Ctx) -> Result<()> {
    let ds = load_input_features(ctx.cfg)?;
    ctx.cfg.check_input_paths(&["scores"])?;
    let score_rows = load_scores(&ctx.cfg.path("scores")?)?;
    let pos = align_to_dataset(&ds, score_rows.iter().map(|r| r.0.as_str()), "scores")?;
    let valence: Vec<f64> = pos.iter().map(|p| score_rows[p.expect("aligned")].1).collect();
    let arousal: Vec<f64> = pos.iter().map(|p| score_rows[p.expect("aligned")].2).collect();
    let raw = ctx.raw();

    let sizes = match raw.get_usize_list("diversity", "sizes")? {
        Some(s) => s,
        None => {
            let s: Vec<usize> = default_size_grid().into_iter().filter(|&m| m <= ds.n()).collect();
            if s.is_empty() {
                return Err(Error::Config(format!(
                    "dataset of {} samples is below the default size grid; set [diversity] sizes",
                    ds.n()
                )));
            }
            s
        }
    };
    let strategies: Vec<Strategy> = match raw.get_list("diversity", "strategies") {
        Some(names) => names
            .iter()
            .map(|s| s.parse())
            .collect::<Result<_>>()?,
        None => Strategy::ALL.to_vec(),
    };
    let feature_sets = raw
        .get_list("diversity", "feature_sets")
        .unwrap_or_else(|| default_feature_sets(&ds));
    let dimensions: Vec<Dimension> = match raw.get_list("diversity", "dimensions") {
        Some(names) => names.iter().map(|s| s.parse()).collect::<Result<_>>()?,
        None => Dimension::ALL.to_vec(),
    };
    let runs_random = raw.get_usize("diversity", "runs_random")?.unwrap_or(100);
    let runs_other = raw.get_usize("diversity", "runs_other")?.unwrap_or(5);
    let metric: Metric = raw.get_enum("diversity", "metric")?.unwrap_or(Metric::Euclidean);
    let cap = raw
        .get_usize("diversity", "pairwise_cap")?
        .unwrap_or(DEFAULT_PAIRWISE_CAP);

    let mut curves = Vec::new();
    for &strategy in &strategies {
        for fs in &feature_sets {
            let view = feature_view(&ds, fs)?;
            for &dim in &dimensions {
                let scores = match dim {
                    Dimension::Valence => &valence,
                    Dimension::Arousal => &arousal,
                };
                let mut dcfg = DiversityConfig::new(
                    sizes.clone(),
                    if strategy == Strategy::Random { runs_random } else { runs_other },
                    ctx.cfg.master_seed,
                );
                dcfg.metric = metric;
                dcfg.pairwise_cap = cap;
                curves.push(diversity_curve(&view, fs, scores, dim, strategy, &dcfg)?);
            }
        }
    }

    write_curves(&ctx.out("curves.csv"), &curves, ctx.prov())?;
    ctx.note("n", ds.n());
    ctx.note("n_curves", curves.len());
    ctx.note("n_sizes", sizes.len());
    Ok(())
}

// ---------------------------------------------------------------------------
// purity grid

fn stage_purity_grid(ctx: &mut Ctx) -> Result<()> {
    let ds = load_input_features(ctx.cfg)?;
    ctx.cfg.check_input_paths(&["labels"])?;
    let label_rows = load_labels(&ctx.cfg.path("labels")?)?;
    let pos = align_to_dataset(&ds, label_rows.iter().map(|r| r.0.as_str()), "labels")?;
    let labels = GridLabels {
        valence: pos
            .iter()
            .map(|p| label_rows[p.expect("aligned")].1.clone())
            .collect(),
        arousal: pos
            .iter()
            .map(|p| label_rows[p.expect("aligned")].2.clone())
            .collect(),
    };
    let raw = ctx.raw();

    let k_list = raw
        .get_usize_list("purity", "k_list")?
        .ok_or_else(|| Error::Config("[purity] k_list is required".into()))?;
    let feature_sets = raw
        .get_list("purity", "feature_sets")
        .unwrap_or_else(|| default_feature_sets(&ds));
    let reps = raw.get_usize("purity", "reps")?.unwrap_or(10);
    let mut cfg = GridConfig::new(feature_sets, k_list, reps, ctx.cfg.master_seed);
    if let Some(names) = raw.get_list("purity", "variants") {
        let known = standard_variants();
        cfg.variants = names
            .iter()
            .map(|n| {
                known
                    .iter()
                    .find(|v| v.name == *n)
                    .cloned()
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "[purity] unknown variant '{n}' (known: {})",
                            known.iter().map(|v| v.name.as_str()).collect::<Vec<_>>().join(", ")
                        ))
                    })
            })
            .collect::<Result<_>>()?;
    }
    if let Some(cap) = raw.get_usize("purity", "pairwise_cap")? {
        cfg.pairwise_cap = cap;
    }

    let cells = purity_grid(ds.features(), &labels, &cfg)?;
    write_purity_rows(&ctx.out("purity.csv"), &cells, ctx.prov())?;
    ctx.note("n_cells", cfg.n_cells());
    ctx.note("n_rows", cells.len());
    ctx.note("n_failed_rows", cells.iter().filter(|c| c.purity.is_none()).count());
    Ok(())
}

// ---------------------------------------------------------------------------
// compare

fn stage_compare(ctx: &mut Ctx) -> Result<()> {
    ctx.cfg.check_input_paths(&["purity"])?;
    let cells = load_purity_rows(&ctx.cfg.path("purity")?)?;
    let by: CompareBy = ctx
        .raw()
        .get_enum("compare", "by")?
        .unwrap_or(CompareBy::Variant);
    let (tests, excluded) = compare_variants(&cells, by)?;
    write_tests(&ctx.out("tests.csv"), &tests, ctx.prov())?;
    ctx.note("n_tests", tests.len());
    if !excluded.is_empty() {
        ctx.note("excluded_groups", excluded.join("; "));
    }
    Ok(())
}
