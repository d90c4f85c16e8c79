//! On-disk tables and in-memory dataset types.
//!
//! All files are UTF-8 CSV with a header row, LF line endings, and '.' as
//! the decimal separator. Floats are written with 9 significant digits in
//! scientific notation, which round-trips bit-exactly through the readers
//! here. Writers may prepend `#`-prefixed comment lines (provenance);
//! readers skip them.

mod synth;

pub use synth::{gen_synthetic, LatentLabel, MixtureComponent, SynthConfig};

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

/// One data point: identity, grouping metadata, and its feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub sample_id: String,
    pub source: String,
    pub speaker_id: String,
    pub duration_s: Option<f64>,
    pub snr_db: Option<f64>,
    pub features: Vec<f64>,
}

/// A named contiguous column range of the feature matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSpec {
    pub name: String,
    pub start_col: usize,
    pub width: usize,
}

impl BlockSpec {
    pub fn new(name: impl Into<String>, start_col: usize, width: usize) -> Self {
        BlockSpec {
            name: name.into(),
            start_col,
            width,
        }
    }

    pub fn cols(&self) -> std::ops::Range<usize> {
        self.start_col..self.start_col + self.width
    }
}

/// Checks that blocks are contiguous, non-overlapping, uniquely named, and
/// jointly cover columns `0..dim`.
fn validate_blocks(blocks: &[BlockSpec], dim: usize) -> Result<()> {
    if blocks.is_empty() {
        return Err(Error::Validation("no feature blocks declared".into()));
    }
    let mut names = HashSet::new();
    for b in blocks {
        if b.width == 0 {
            return Err(Error::Validation(format!("block '{}' has width 0", b.name)));
        }
        if !names.insert(b.name.as_str()) {
            return Err(Error::Validation(format!("duplicate block name '{}'", b.name)));
        }
    }
    let mut sorted: Vec<&BlockSpec> = blocks.iter().collect();
    sorted.sort_by_key(|b| b.start_col);
    let mut next = 0;
    for b in sorted {
        if b.start_col != next {
            return Err(Error::Validation(format!(
                "blocks must tile the columns: expected next block at column {next}, \
                 but '{}' starts at {}",
                b.name, b.start_col
            )));
        }
        next += b.width;
    }
    if next != dim {
        return Err(Error::Validation(format!(
            "blocks cover {next} columns but the matrix has {dim}"
        )));
    }
    Ok(())
}

/// One annotator's rating of one sample on both affect dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRecord {
    pub sample_id: String,
    pub annotator_id: String,
    pub valence: f64,
    pub arousal: f64,
}

/// Immutable n×D feature matrix with block structure metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    dim: usize,
    data: Vec<f64>,
    blocks: Vec<BlockSpec>,
}

impl FeatureMatrix {
    /// Single implicit block named "all".
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        Self::from_rows_with_blocks(rows, vec![BlockSpec::new("all", 0, dim)])
    }

    pub fn from_rows_with_blocks(rows: Vec<Vec<f64>>, blocks: Vec<BlockSpec>) -> Result<Self> {
        let n = rows.len();
        let dim: usize = blocks.iter().map(|b| b.width).sum();
        validate_blocks(&blocks, dim)?;
        let mut data = Vec::with_capacity(n * dim);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Validation(format!(
                    "row {i} has {} features, expected {dim}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        Ok(FeatureMatrix { n, dim, data, blocks })
    }

    pub fn from_flat(n: usize, data: Vec<f64>, blocks: Vec<BlockSpec>) -> Result<Self> {
        let dim: usize = blocks.iter().map(|b| b.width).sum();
        validate_blocks(&blocks, dim)?;
        if data.len() != n * dim {
            return Err(Error::Validation(format!(
                "flat data length {} does not match {n}x{dim}",
                data.len()
            )));
        }
        Ok(FeatureMatrix { n, dim, data, blocks })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Option<&BlockSpec> {
        self.blocks.iter().find(|b| b.name == name)
    }

    /// New matrix holding the given rows, in the given order.
    pub fn rows_subset(&self, idx: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            n: idx.len(),
            dim: self.dim,
            data,
            blocks: self.blocks.clone(),
        }
    }

    /// New matrix containing only the named block's columns (single block).
    pub fn restrict_to_block(&self, name: &str) -> Result<FeatureMatrix> {
        let b = self
            .block(name)
            .ok_or_else(|| Error::Config(format!("unknown feature block '{name}'")))?
            .clone();
        let mut data = Vec::with_capacity(self.n * b.width);
        for i in 0..self.n {
            data.extend_from_slice(&self.row(i)[b.cols()]);
        }
        Ok(FeatureMatrix {
            n: self.n,
            dim: b.width,
            data,
            blocks: vec![BlockSpec::new(b.name, 0, b.width)],
        })
    }
}

/// Metadata plus features for a set of samples; ids are unique.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    ids: Vec<String>,
    sources: Vec<String>,
    speakers: Vec<String>,
    durations: Vec<Option<f64>>,
    snrs: Vec<Option<f64>>,
    features: FeatureMatrix,
}

impl Dataset {
    pub fn from_records(records: Vec<SampleRecord>, blocks: Vec<BlockSpec>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.sample_id.clone()) {
                return Err(Error::Validation(format!(
                    "duplicate sample_id '{}'",
                    r.sample_id
                )));
            }
        }
        let mut ids = Vec::with_capacity(records.len());
        let mut sources = Vec::with_capacity(records.len());
        let mut speakers = Vec::with_capacity(records.len());
        let mut durations = Vec::with_capacity(records.len());
        let mut snrs = Vec::with_capacity(records.len());
        let mut rows = Vec::with_capacity(records.len());
        for r in records {
            ids.push(r.sample_id);
            sources.push(r.source);
            speakers.push(r.speaker_id);
            durations.push(r.duration_s);
            snrs.push(r.snr_db);
            rows.push(r.features);
        }
        let features = FeatureMatrix::from_rows_with_blocks(rows, blocks)?;
        Ok(Dataset {
            ids,
            sources,
            speakers,
            durations,
            snrs,
            features,
        })
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn sample_id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn source(&self, i: usize) -> &str {
        &self.sources[i]
    }

    pub fn speaker_id(&self, i: usize) -> &str {
        &self.speakers[i]
    }

    pub fn duration_s(&self, i: usize) -> Option<f64> {
        self.durations[i]
    }

    pub fn snr_db(&self, i: usize) -> Option<f64> {
        self.snrs[i]
    }

    pub fn record(&self, i: usize) -> SampleRecord {
        SampleRecord {
            sample_id: self.ids[i].clone(),
            source: self.sources[i].clone(),
            speaker_id: self.speakers[i].clone(),
            duration_s: self.durations[i],
            snr_db: self.snrs[i],
            features: self.features.row(i).to_vec(),
        }
    }

    /// Same metadata with a replacement feature matrix (row counts must match).
    pub fn with_features(&self, features: FeatureMatrix) -> Result<Dataset> {
        if features.n() != self.n() {
            return Err(Error::Validation(format!(
                "replacement features have {} rows, dataset has {}",
                features.n(),
                self.n()
            )));
        }
        Ok(Dataset {
            ids: self.ids.clone(),
            sources: self.sources.clone(),
            speakers: self.speakers.clone(),
            durations: self.durations.clone(),
            snrs: self.snrs.clone(),
            features,
        })
    }

    /// Rows at the given indices, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            sources: idx.iter().map(|&i| self.sources[i].clone()).collect(),
            speakers: idx.iter().map(|&i| self.speakers[i].clone()).collect(),
            durations: idx.iter().map(|&i| self.durations[i]).collect(),
            snrs: idx.iter().map(|&i| self.snrs[i]).collect(),
            features: self.features.rows_subset(idx),
        }
    }
}

/// Keeps records whose duration and SNR fall inside the given inclusive
/// bounds. A `None` bound is disabled; records missing a metadata field
/// pass only the disabled bounds on that field.
pub fn filter_metadata(
    ds: &Dataset,
    min_dur_s: Option<f64>,
    max_dur_s: Option<f64>,
    min_snr_db: Option<f64>,
) -> Result<Dataset> {
    if let (Some(lo), Some(hi)) = (min_dur_s, max_dur_s) {
        if lo > hi {
            return Err(Error::Config(format!(
                "duration bounds inverted: min {lo} > max {hi}"
            )));
        }
    }
    let keep: Vec<usize> = (0..ds.n())
        .filter(|&i| {
            let dur_ok = match (ds.duration_s(i), min_dur_s, max_dur_s) {
                (None, None, None) => true,
                (None, _, _) => false,
                (Some(d), lo, hi) => lo.is_none_or(|lo| d >= lo) && hi.is_none_or(|hi| d <= hi),
            };
            let snr_ok = match (ds.snr_db(i), min_snr_db) {
                (_, None) => true,
                (None, Some(_)) => false,
                (Some(s), Some(lo)) => s >= lo,
            };
            dur_ok && snr_ok
        })
        .collect();
    Ok(ds.subset(&keep))
}

// ---------------------------------------------------------------------------
// float formatting

/// Formats with 9 significant digits; round-trips exactly through `parse`.
pub fn fmt_g9(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x }; // fold -0.0 into 0.0
    format!("{x:.8e}")
}

pub(crate) fn parse_f64(path: &Path, line: usize, field: &str, s: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::parse(path, line, format!("{field}: invalid number '{s}'")))?;
    if !v.is_finite() {
        return Err(Error::parse(path, line, format!("{field}: non-finite value '{s}'")));
    }
    Ok(v)
}

fn parse_opt_f64(path: &Path, line: usize, field: &str, s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_f64(path, line, field, s).map(Some)
    }
}

// ---------------------------------------------------------------------------
// generic CSV plumbing

pub(crate) fn record_line(rec: &csv::StringRecord, fallback: usize) -> usize {
    rec.position().map_or(fallback, |p| p.line() as usize)
}

pub(crate) fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(file))
}

/// Writes a CSV table with an optional leading `# ...` provenance comment.
pub(crate) fn write_table(
    path: &Path,
    provenance: Option<&str>,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut out = String::new();
    if let Some(p) = provenance {
        let _ = writeln!(out, "# {p}");
    }
    let _ = writeln!(out, "{}", header.join(","));
    for row in rows {
        let _ = writeln!(out, "{}", row.join(","));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub(crate) fn check_header(path: &Path, got: &csv::StringRecord, want: &[&str]) -> Result<()> {
    let got_fields: Vec<&str> = got.iter().collect();
    if got_fields != want {
        return Err(Error::parse(
            path,
            record_line(got, 1),
            format!("bad header: expected '{}', got '{}'", want.join(","), got_fields.join(",")),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// features table

fn features_header(dim: usize) -> Vec<String> {
    let mut h = vec![
        "sample_id".to_string(),
        "source".to_string(),
        "speaker_id".to_string(),
        "duration_s".to_string(),
        "snr_db".to_string(),
    ];
    for j in 0..dim {
        h.push(format!("f_{j}"));
    }
    h
}

/// Loads a features table whose layout is declared by `blocks`.
pub fn load_features(path: &Path, blocks: Vec<BlockSpec>) -> Result<Dataset> {
    let dim: usize = blocks.iter().map(|b| b.width).sum();
    validate_blocks(&blocks, dim)?;
    let mut rdr = csv_reader(path)?;
    let header = rdr
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    let want = features_header(dim);
    let want_refs: Vec<&str> = want.iter().map(String::as_str).collect();
    check_header(path, &header, &want_refs)?;

    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(path, i + 2, e.to_string()))?;
        let line = record_line(&rec, i + 2);
        if rec.len() != 5 + dim {
            return Err(Error::parse(
                path,
                line,
                format!("expected {} fields, got {}", 5 + dim, rec.len()),
            ));
        }
        let mut features = Vec::with_capacity(dim);
        for j in 0..dim {
            features.push(parse_f64(path, line, &format!("f_{j}"), &rec[5 + j])?);
        }
        records.push(SampleRecord {
            sample_id: rec[0].to_string(),
            source: rec[1].to_string(),
            speaker_id: rec[2].to_string(),
            duration_s: parse_opt_f64(path, line, "duration_s", &rec[3])?,
            snr_db: parse_opt_f64(path, line, "snr_db", &rec[4])?,
            features,
        });
    }
    Dataset::from_records(records, blocks)
}

pub fn write_features(path: &Path, ds: &Dataset, provenance: Option<&str>) -> Result<()> {
    let header = features_header(ds.dim());
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..ds.n()).map(|i| {
        let mut row = vec![
            ds.sample_id(i).to_string(),
            ds.source(i).to_string(),
            ds.speaker_id(i).to_string(),
            ds.duration_s(i).map(fmt_g9).unwrap_or_default(),
            ds.snr_db(i).map(fmt_g9).unwrap_or_default(),
        ];
        row.extend(ds.features().row(i).iter().copied().map(fmt_g9));
        row
    });
    write_table(path, provenance, &header_refs, rows)
}

// ---------------------------------------------------------------------------
// annotations table

const ANNOTATIONS_HEADER: [&str; 4] = ["sample_id", "annotator_id", "valence", "arousal"];

pub fn load_annotations(path: &Path) -> Result<Vec<AnnotationRecord>> {
    let mut rdr = csv_reader(path)?;
    let header = rdr
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    check_header(path, &header, &ANNOTATIONS_HEADER)?;

    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(path, i + 2, e.to_string()))?;
        let line = record_line(&rec, i + 2);
        if rec.len() != 4 {
            return Err(Error::parse(
                path,
                line,
                format!("expected 4 fields, got {}", rec.len()),
            ));
        }
        let valence = parse_f64(path, line, "valence", &rec[2])?;
        let arousal = parse_f64(path, line, "arousal", &rec[3])?;
        for (name, v) in [("valence", valence), ("arousal", arousal)] {
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::parse(
                    path,
                    line,
                    format!("{name} {v} outside [-1, 1]"),
                ));
            }
        }
        out.push(AnnotationRecord {
            sample_id: rec[0].to_string(),
            annotator_id: rec[1].to_string(),
            valence,
            arousal,
        });
    }
    Ok(out)
}

pub fn write_annotations(
    path: &Path,
    records: &[AnnotationRecord],
    provenance: Option<&str>,
) -> Result<()> {
    let rows = records.iter().map(|r| {
        vec![
            r.sample_id.clone(),
            r.annotator_id.clone(),
            fmt_g9(r.valence),
            fmt_g9(r.arousal),
        ]
    });
    write_table(path, provenance, &ANNOTATIONS_HEADER, rows)
}

// ---------------------------------------------------------------------------
// block config file: one `name = start:width` line per block

pub fn load_blocks(path: &Path) -> Result<Vec<BlockSpec>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut blocks = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, range) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, i + 1, "expected 'name = start:width'"))?;
        let (start, width) = range
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::parse(path, i + 1, "expected 'name = start:width'"))?;
        let start: usize = start
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, i + 1, format!("invalid start '{}'", start.trim())))?;
        let width: usize = width
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, i + 1, format!("invalid width '{}'", width.trim())))?;
        blocks.push(BlockSpec::new(name.trim(), start, width));
    }
    if blocks.is_empty() {
        return Err(Error::parse(path, 1, "no blocks defined"));
    }
    let dim = blocks.iter().map(|b| b.width).sum();
    validate_blocks(&blocks, dim)?;
    Ok(blocks)
}

pub fn write_blocks(path: &Path, blocks: &[BlockSpec], provenance: Option<&str>) -> Result<()> {
    let mut out = String::new();
    if let Some(p) = provenance {
        let _ = writeln!(out, "# {p}");
    }
    for b in blocks {
        let _ = writeln!(out, "{} = {}:{}", b.name, b.start_col, b.width);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
