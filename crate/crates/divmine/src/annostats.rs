//! Annotator-score normalization, gold-standard aggregation, discretization,
//! and agreement statistics (Cohen's kappa, Spearman rank correlation,
//! majority vote, valence-threshold search).

use std::collections::BTreeMap;

use crate::dataio::AnnotationRecord;
use crate::metric::{distance, Metric};
use crate::ranks::midranks;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dimension {
    Valence,
    Arousal,
}

impl Dimension {
    pub const ALL: [Dimension; 2] = [Dimension::Valence, Dimension::Arousal];

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Valence => "valence",
            Dimension::Arousal => "arousal",
        }
    }
}

impl std::fmt::Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "valence" => Ok(Dimension::Valence),
            "arousal" => Ok(Dimension::Arousal),
            other => Err(Error::Config(format!("unknown dimension '{other}'"))),
        }
    }
}

/// Rescales each annotator's scores, per dimension, to mean 0 and max
/// absolute value 1 over that annotator's record list (repeats counted).
/// A constant score list maps to all zeros.
pub fn normalize_annotators(records: &[AnnotationRecord]) -> Vec<AnnotationRecord> {
    let mut by_annotator: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_annotator.entry(&r.annotator_id).or_default().push(i);
    }
    let mut out = records.to_vec();
    for (annotator, idxs) in &by_annotator {
        for dim in Dimension::ALL {
            let get = |r: &AnnotationRecord| match dim {
                Dimension::Valence => r.valence,
                Dimension::Arousal => r.arousal,
            };
            let vals: Vec<f64> = idxs.iter().map(|&i| get(&records[i])).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let max_dev = vals
                .iter()
                .map(|v| (v - mean).abs())
                .fold(0.0_f64, f64::max);
            if max_dev == 0.0 {
                log::debug!("annotator {annotator} has constant {dim} scores; normalized to 0");
            }
            for &i in idxs {
                let z = if max_dev == 0.0 {
                    0.0
                } else {
                    (get(&records[i]) - mean) / max_dev
                };
                match dim {
                    Dimension::Valence => out[i].valence = z,
                    Dimension::Arousal => out[i].arousal = z,
                }
            }
        }
    }
    out
}

/// Dense sample-by-annotator rating grid, both axes sorted ascending.
/// Duplicate (sample, annotator) records are averaged.
#[derive(Debug, Clone)]
pub struct RatingsTable {
    samples: Vec<String>,
    annotators: Vec<String>,
    valence: Vec<Option<f64>>,
    arousal: Vec<Option<f64>>,
}

impl RatingsTable {
    pub fn from_records(records: &[AnnotationRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Validation("no annotation records".into()));
        }
        let mut acc: BTreeMap<(&str, &str), (f64, f64, usize)> = BTreeMap::new();
        for r in records {
            let e = acc
                .entry((r.sample_id.as_str(), r.annotator_id.as_str()))
                .or_insert((0.0, 0.0, 0));
            e.0 += r.valence;
            e.1 += r.arousal;
            e.2 += 1;
        }
        let mut samples: Vec<String> = acc.keys().map(|(s, _)| s.to_string()).collect();
        samples.dedup();
        let mut annotators: Vec<String> = acc.keys().map(|(_, a)| a.to_string()).collect();
        annotators.sort_unstable();
        annotators.dedup();
        let sample_pos: BTreeMap<&str, usize> = samples
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let annot_pos: BTreeMap<&str, usize> = annotators
            .iter()
            .enumerate()
            .map(|(j, a)| (a.as_str(), j))
            .collect();
        let cells = samples.len() * annotators.len();
        let mut valence = vec![None; cells];
        let mut arousal = vec![None; cells];
        for ((s, a), (v, ar, cnt)) in &acc {
            let idx = sample_pos[s] * annotators.len() + annot_pos[a];
            valence[idx] = Some(v / *cnt as f64);
            arousal[idx] = Some(ar / *cnt as f64);
        }
        Ok(RatingsTable {
            samples,
            annotators,
            valence,
            arousal,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn n_annotators(&self) -> usize {
        self.annotators.len()
    }

    pub fn samples(&self) -> &[String] {
        &self.samples
    }

    pub fn annotators(&self) -> &[String] {
        &self.annotators
    }

    pub fn get(&self, dim: Dimension, sample: usize, annotator: usize) -> Option<f64> {
        let idx = sample * self.annotators.len() + annotator;
        match dim {
            Dimension::Valence => self.valence[idx],
            Dimension::Arousal => self.arousal[idx],
        }
    }

    fn ratings_count(&self, sample: usize) -> usize {
        (0..self.annotators.len())
            .filter(|&j| self.get(Dimension::Valence, sample, j).is_some())
            .count()
    }
}

/// Per-sample mean over the annotators that rated it.
#[derive(Debug, Clone)]
pub struct GoldStandard {
    pub sample_ids: Vec<String>,
    pub valence: Vec<f64>,
    pub arousal: Vec<f64>,
    pub n_raters: Vec<usize>,
}

/// Averages each sample's available ratings. Any sample rated by fewer than
/// two annotators is an error.
pub fn aggregate_gold(table: &RatingsTable) -> Result<GoldStandard> {
    let mut under: Vec<&str> = Vec::new();
    for i in 0..table.n_samples() {
        if table.ratings_count(i) < 2 {
            under.push(&table.samples[i]);
        }
    }
    if !under.is_empty() {
        return Err(Error::Validation(format!(
            "samples with fewer than 2 ratings: {}",
            under.join(", ")
        )));
    }
    let mut gs = GoldStandard {
        sample_ids: table.samples.clone(),
        valence: Vec::with_capacity(table.n_samples()),
        arousal: Vec::with_capacity(table.n_samples()),
        n_raters: Vec::with_capacity(table.n_samples()),
    };
    for i in 0..table.n_samples() {
        for dim in Dimension::ALL {
            let vals: Vec<f64> = (0..table.n_annotators())
                .filter_map(|j| table.get(dim, i, j))
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            match dim {
                Dimension::Valence => gs.valence.push(mean),
                Dimension::Arousal => gs.arousal.push(mean),
            }
        }
        gs.n_raters.push(table.ratings_count(i));
    }
    Ok(gs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArousalLabel {
    Low,
    High,
}

impl ArousalLabel {
    pub fn name(self) -> &'static str {
        match self {
            ArousalLabel::Low => "low",
            ArousalLabel::High => "high",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ValenceLabel {
    Negative,
    Neutral,
    Positive,
}

impl ValenceLabel {
    pub fn name(self) -> &'static str {
        match self {
            ValenceLabel::Negative => "negative",
            ValenceLabel::Neutral => "neutral",
            ValenceLabel::Positive => "positive",
        }
    }
}

/// Scores at or below zero are low.
pub fn arousal_label(x: f64) -> ArousalLabel {
    if x <= 0.0 {
        ArousalLabel::Low
    } else {
        ArousalLabel::High
    }
}

/// Scores at or below -t are negative, strictly above +t positive,
/// neutral between. Callers validate t with [`validate_threshold`].
pub fn valence_label(x: f64, t: f64) -> ValenceLabel {
    if x <= -t {
        ValenceLabel::Negative
    } else if x > t {
        ValenceLabel::Positive
    } else {
        ValenceLabel::Neutral
    }
}

pub fn validate_threshold(t: f64) -> Result<()> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::Config(format!(
            "valence threshold must be finite and non-negative, got {t}"
        )));
    }
    Ok(())
}

/// Chance-corrected agreement between two equally long label sequences.
/// Two identical constant sequences agree perfectly (kappa 1).
pub fn cohens_kappa<T: Eq + Ord>(a: &[T], b: &[T]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Validation(format!(
            "label sequences differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Validation("kappa of empty sequences".into()));
    }
    let n = a.len() as f64;
    let p_o = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let mut count_a: BTreeMap<&T, usize> = BTreeMap::new();
    let mut count_b: BTreeMap<&T, usize> = BTreeMap::new();
    for x in a {
        *count_a.entry(x).or_insert(0) += 1;
    }
    for y in b {
        *count_b.entry(y).or_insert(0) += 1;
    }
    let p_e: f64 = count_a
        .iter()
        .map(|(l, &ca)| {
            let cb = count_b.get(l).copied().unwrap_or(0);
            (ca as f64 / n) * (cb as f64 / n)
        })
        .sum();
    if p_e >= 1.0 {
        return Ok(1.0);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Spearman rank correlation: Pearson correlation of mid-ranks.
/// A constant input yields 0.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Validation(format!(
            "sequences differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Validation(
            "rank correlation needs at least 2 points".into(),
        ));
    }
    let rx = midranks(x);
    let ry = midranks(y);
    Ok(1.0 - distance(&rx, &ry, Metric::Pearson))
}

/// Most frequent label; `tie` wins when the maximum is shared.
pub fn majority_vote<T: Eq + Ord + Copy>(labels: &[T], tie: T) -> Result<T> {
    if labels.is_empty() {
        return Err(Error::Validation("majority vote over no labels".into()));
    }
    let mut counts: BTreeMap<T, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0) += 1;
    }
    let max = *counts.values().max().expect("nonempty");
    let winners: Vec<T> = counts
        .iter()
        .filter(|(_, &c)| c == max)
        .map(|(&l, _)| l)
        .collect();
    Ok(if winners.len() == 1 { winners[0] } else { tie })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KappaMode {
    /// Each annotator against the per-sample majority vote.
    VsVote,
    /// All annotator pairs on their jointly rated samples.
    AllPairs,
}

impl std::str::FromStr for KappaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vs_vote" => Ok(KappaMode::VsVote),
            "all_pairs" => Ok(KappaMode::AllPairs),
            other => Err(Error::Config(format!("unknown kappa mode '{other}'"))),
        }
    }
}

/// Mean kappa over a sample-major grid of optional labels.
fn mean_kappa<L: Eq + Ord + Copy>(
    labels: &[Option<L>],
    n_samples: usize,
    n_annotators: usize,
    tie: L,
    mode: KappaMode,
) -> Result<f64> {
    if n_annotators < 2 {
        return Err(Error::Validation(
            "agreement needs at least 2 annotators".into(),
        ));
    }
    let cell = |i: usize, j: usize| labels[i * n_annotators + j];
    let mut kappas = Vec::new();
    match mode {
        KappaMode::VsVote => {
            let mut votes = Vec::with_capacity(n_samples);
            for i in 0..n_samples {
                let present: Vec<L> = (0..n_annotators).filter_map(|j| cell(i, j)).collect();
                votes.push(if present.is_empty() {
                    None
                } else {
                    Some(majority_vote(&present, tie)?)
                });
            }
            for j in 0..n_annotators {
                let mut mine = Vec::new();
                let mut vote = Vec::new();
                for i in 0..n_samples {
                    if let (Some(l), Some(v)) = (cell(i, j), votes[i]) {
                        mine.push(l);
                        vote.push(v);
                    }
                }
                if !mine.is_empty() {
                    kappas.push(cohens_kappa(&mine, &vote)?);
                }
            }
        }
        KappaMode::AllPairs => {
            for j in 0..n_annotators {
                for j2 in (j + 1)..n_annotators {
                    let mut a = Vec::new();
                    let mut b = Vec::new();
                    for i in 0..n_samples {
                        if let (Some(x), Some(y)) = (cell(i, j), cell(i, j2)) {
                            a.push(x);
                            b.push(y);
                        }
                    }
                    if !a.is_empty() {
                        kappas.push(cohens_kappa(&a, &b)?);
                    }
                }
            }
        }
    }
    if kappas.is_empty() {
        return Err(Error::Validation(
            "no annotator overlap to compute agreement".into(),
        ));
    }
    Ok(kappas.iter().sum::<f64>() / kappas.len() as f64)
}

#[derive(Debug, Clone)]
pub struct ThresholdSearch {
    pub best_t: f64,
    pub best_kappa: f64,
    /// (threshold, mean kappa) for every grid point, ascending.
    pub grid_scores: Vec<(f64, f64)>,
}

/// 0.000, 0.005, ..., 0.500.
pub fn default_threshold_grid() -> Vec<f64> {
    (0..=100).map(|i| i as f64 * 0.005).collect()
}

/// Scans candidate valence thresholds and keeps the one maximizing mean
/// kappa; the lowest threshold wins ties.
pub fn optimize_valence_threshold(
    table: &RatingsTable,
    grid: &[f64],
    mode: KappaMode,
) -> Result<ThresholdSearch> {
    if grid.is_empty() {
        return Err(Error::Config("threshold grid is empty".into()));
    }
    for &t in grid {
        validate_threshold(t)?;
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();

    let n_s = table.n_samples();
    let n_a = table.n_annotators();
    let mut grid_scores = Vec::with_capacity(sorted.len());
    let mut best: Option<(f64, f64)> = None;
    for &t in &sorted {
        let labels: Vec<Option<ValenceLabel>> = (0..n_s)
            .flat_map(|i| {
                (0..n_a).map(move |j| {
                    table
                        .get(Dimension::Valence, i, j)
                        .map(|v| valence_label(v, t))
                })
            })
            .collect();
        let kappa = mean_kappa(&labels, n_s, n_a, ValenceLabel::Neutral, mode)?;
        grid_scores.push((t, kappa));
        if best.is_none_or(|(_, bk)| kappa > bk) {
            best = Some((t, kappa));
        }
    }
    let (best_t, best_kappa) = best.expect("nonempty grid");
    Ok(ThresholdSearch {
        best_t,
        best_kappa,
        grid_scores,
    })
}

#[derive(Debug, Clone)]
pub struct AgreementReport {
    pub n_samples: usize,
    pub n_annotators: usize,
    pub valence_threshold: f64,
    /// Mean pairwise Spearman correlation per dimension.
    pub valence_spearman: f64,
    pub arousal_spearman: f64,
    /// Mean kappa per dimension under the given mode.
    pub valence_kappa: f64,
    pub arousal_kappa: f64,
}

/// Continuous (Spearman) and categorical (kappa) agreement on a ratings
/// table, using threshold `t` for valence labels.
pub fn agreement_report(table: &RatingsTable, t: f64, mode: KappaMode) -> Result<AgreementReport> {
    validate_threshold(t)?;
    let n_s = table.n_samples();
    let n_a = table.n_annotators();
    if n_a < 2 {
        return Err(Error::Validation(
            "agreement needs at least 2 annotators".into(),
        ));
    }

    let mean_pairwise_spearman = |dim: Dimension| -> Result<f64> {
        let mut rhos = Vec::new();
        for j in 0..n_a {
            for j2 in (j + 1)..n_a {
                let mut a = Vec::new();
                let mut b = Vec::new();
                for i in 0..n_s {
                    if let (Some(x), Some(y)) = (table.get(dim, i, j), table.get(dim, i, j2)) {
                        a.push(x);
                        b.push(y);
                    }
                }
                if a.len() >= 2 {
                    rhos.push(spearman(&a, &b)?);
                }
            }
        }
        if rhos.is_empty() {
            return Err(Error::Validation(
                "no annotator overlap to compute agreement".into(),
            ));
        }
        Ok(rhos.iter().sum::<f64>() / rhos.len() as f64)
    };

    let valence_labels: Vec<Option<ValenceLabel>> = (0..n_s)
        .flat_map(|i| {
            (0..n_a).map(move |j| {
                table
                    .get(Dimension::Valence, i, j)
                    .map(|v| valence_label(v, t))
            })
        })
        .collect();
    let arousal_labels: Vec<Option<ArousalLabel>> = (0..n_s)
        .flat_map(|i| (0..n_a).map(move |j| table.get(Dimension::Arousal, i, j).map(arousal_label)))
        .collect();

    Ok(AgreementReport {
        n_samples: n_s,
        n_annotators: n_a,
        valence_threshold: t,
        valence_spearman: mean_pairwise_spearman(Dimension::Valence)?,
        arousal_spearman: mean_pairwise_spearman(Dimension::Arousal)?,
        valence_kappa: mean_kappa(&valence_labels, n_s, n_a, ValenceLabel::Neutral, mode)?,
        arousal_kappa: mean_kappa(&arousal_labels, n_s, n_a, ArousalLabel::Low, mode)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rec(sample: &str, annot: &str, v: f64, a: f64) -> AnnotationRecord {
        AnnotationRecord {
            sample_id: sample.into(),
            annotator_id: annot.into(),
            valence: v,
            arousal: a,
        }
    }

    #[test]
    fn normalize_centers_and_scales_to_unit_max() {
        let recs = vec![
            rec("s1", "a", -0.5, 0.0),
            rec("s2", "a", 0.0, 0.0),
            rec("s3", "a", 1.0, 0.0),
        ];
        let out = normalize_annotators(&recs);
        let v: Vec<f64> = out.iter().map(|r| r.valence).collect();
        assert_abs_diff_eq!(v[0], -0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], -0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(v[2], 1.0, epsilon = 1e-12);
        // constant arousal collapses to zero
        assert!(out.iter().all(|r| r.arousal == 0.0));
    }

    #[test]
    fn normalize_is_per_annotator_and_affine_invariant() {
        let base = vec![
            rec("s1", "a", 0.1, 0.3),
            rec("s2", "a", -0.4, 0.9),
            rec("s3", "a", 0.7, -0.2),
        ];
        let shifted: Vec<AnnotationRecord> = base
            .iter()
            .map(|r| rec(&r.sample_id, "b", 0.5 * r.valence + 0.2, 2.0 * r.arousal - 0.1))
            .collect();
        let mut all = base.clone();
        all.extend(shifted);
        let out = normalize_annotators(&all);
        for i in 0..3 {
            assert_abs_diff_eq!(out[i].valence, out[i + 3].valence, epsilon = 1e-12);
            assert_abs_diff_eq!(out[i].arousal, out[i + 3].arousal, epsilon = 1e-12);
        }
        let max_abs = out[..3]
            .iter()
            .map(|r| r.valence.abs())
            .fold(0.0_f64, f64::max);
        assert_abs_diff_eq!(max_abs, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn normalize_preserves_order() {
        let recs: Vec<AnnotationRecord> = (0..10)
            .map(|i| rec(&format!("s{i}"), "a", (i as f64 * 7.3).sin(), 0.0))
            .collect();
        let out = normalize_annotators(&recs);
        let mut raw: Vec<(f64, usize)> = recs.iter().enumerate().map(|(i, r)| (r.valence, i)).collect();
        let mut norm: Vec<(f64, usize)> = out.iter().enumerate().map(|(i, r)| (r.valence, i)).collect();
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        norm.sort_by(|a, b| a.0.total_cmp(&b.0));
        let raw_order: Vec<usize> = raw.iter().map(|&(_, i)| i).collect();
        let norm_order: Vec<usize> = norm.iter().map(|&(_, i)| i).collect();
        assert_eq!(raw_order, norm_order);
    }

    #[test]
    fn table_sorts_axes_and_averages_duplicates() {
        let recs = vec![
            rec("s2", "b", 0.5, 0.5),
            rec("s1", "a", 0.1, 0.2),
            rec("s2", "b", 0.7, 0.1),
            rec("s1", "b", -0.3, 0.0),
        ];
        let t = RatingsTable::from_records(&recs).unwrap();
        assert_eq!(t.samples(), &["s1".to_string(), "s2".to_string()]);
        assert_eq!(t.annotators(), &["a".to_string(), "b".to_string()]);
        assert_abs_diff_eq!(t.get(Dimension::Valence, 1, 1).unwrap(), 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(t.get(Dimension::Arousal, 1, 1).unwrap(), 0.3, epsilon = 1e-12);
        assert!(t.get(Dimension::Valence, 1, 0).is_none());
    }

    #[test]
    fn gold_is_mean_of_available_raters() {
        let recs = vec![
            rec("s1", "a", 0.2, 0.4),
            rec("s1", "b", 0.4, 0.0),
            rec("s1", "c", 0.6, -0.4),
            rec("s2", "a", -1.0, 1.0),
            rec("s2", "b", 0.0, 0.0),
        ];
        let gs = aggregate_gold(&RatingsTable::from_records(&recs).unwrap()).unwrap();
        assert_abs_diff_eq!(gs.valence[0], 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(gs.arousal[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gs.valence[1], -0.5, epsilon = 1e-12);
        assert_eq!(gs.n_raters, vec![3, 2]);
    }

    #[test]
    fn gold_rejects_underrated_samples_by_name() {
        let recs = vec![
            rec("s1", "a", 0.2, 0.4),
            rec("s1", "b", 0.4, 0.0),
            rec("lonely", "a", 0.1, 0.1),
        ];
        match aggregate_gold(&RatingsTable::from_records(&recs).unwrap()) {
            Err(Error::Validation(msg)) => assert!(msg.contains("lonely"), "{msg}"),
            other => panic!("expected error, got {other:?}"),
        }
    }

    #[test]
    fn label_boundaries() {
        assert_eq!(arousal_label(0.0), ArousalLabel::Low);
        assert_eq!(arousal_label(-0.3), ArousalLabel::Low);
        assert_eq!(arousal_label(1e-9), ArousalLabel::High);
        let t = 0.08;
        assert_eq!(valence_label(-0.08, t), ValenceLabel::Negative);
        assert_eq!(valence_label(0.08, t), ValenceLabel::Neutral);
        assert_eq!(valence_label(0.080001, t), ValenceLabel::Positive);
        assert_eq!(valence_label(0.0, 0.0), ValenceLabel::Negative);
        assert!(validate_threshold(-0.01).is_err());
    }

    #[test]
    fn kappa_worked_example() {
        use ValenceLabel::{Negative as N, Positive as P};
        let a = [P, P, N, N];
        let b = [P, N, N, N];
        assert_abs_diff_eq!(cohens_kappa(&a, &b).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn kappa_degenerate_and_invariance() {
        let same = [1, 1, 1, 1];
        assert_eq!(cohens_kappa(&same, &same).unwrap(), 1.0);
        let a = [0, 0, 1, 2, 1];
        let b = [0, 1, 1, 2, 2];
        let k1 = cohens_kappa(&a, &b).unwrap();
        // relabeling both sequences consistently leaves kappa unchanged
        let relabel = |v: &[i32]| -> Vec<i32> { v.iter().map(|x| (x + 5) * 3).collect() };
        let k2 = cohens_kappa(&relabel(&a), &relabel(&b)).unwrap();
        assert_abs_diff_eq!(k1, k2, epsilon = 1e-12);
        assert!(cohens_kappa(&a[..3], &b).is_err());
    }

    #[test]
    fn spearman_worked_example_and_properties() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 3.0, 2.0, 4.0];
        assert_abs_diff_eq!(spearman(&x, &y).unwrap(), 0.8, epsilon = 1e-12);
        // invariant under strictly monotone transforms
        let y2: Vec<f64> = y.iter().map(|v| v.exp() + 7.0).collect();
        assert_abs_diff_eq!(spearman(&x, &y2).unwrap(), 0.8, epsilon = 1e-12);
        let konst = [2.0, 2.0, 2.0, 2.0];
        assert_eq!(spearman(&x, &konst).unwrap(), 0.0);
        assert_abs_diff_eq!(spearman(&x, &x).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn vote_modal_and_tie_rules() {
        use ValenceLabel::*;
        assert_eq!(
            majority_vote(&[Positive, Positive, Negative], Neutral).unwrap(),
            Positive
        );
        assert_eq!(
            majority_vote(&[Positive, Negative], Neutral).unwrap(),
            Neutral
        );
        use ArousalLabel::*;
        assert_eq!(majority_vote(&[High, Low], Low).unwrap(), Low);
        assert!(majority_vote::<i32>(&[], 0).is_err());
    }

    fn plateau_table() -> RatingsTable {
        // samples 0..4: all three annotators strongly positive or negative
        // samples 5..8: raters disagree in sign but put |v| < 0.06, so any
        // threshold >= 0.06 labels them all neutral and kappa hits 1
        let mut recs = Vec::new();
        let strong: [f64; 5] = [0.5, -0.5, 0.4, -0.4, 0.45];
        for (i, &s) in strong.iter().enumerate() {
            for (j, ann) in ["a", "b", "c"].iter().enumerate() {
                let v = s + (j as f64 - 1.0) * 0.01 * s.signum();
                recs.push(rec(&format!("s{i}"), ann, v, 0.0));
            }
        }
        for i in 0..4 {
            for (j, ann) in ["a", "b", "c"].iter().enumerate() {
                let v = match (i + j) % 3 {
                    0 => 0.05,
                    1 => -0.04,
                    _ => 0.02,
                };
                recs.push(rec(&format!("t{i}"), ann, v, 0.0));
            }
        }
        RatingsTable::from_records(&recs).unwrap()
    }

    #[test]
    fn threshold_search_finds_plateau_start() {
        let table = plateau_table();
        let grid = default_threshold_grid();
        for mode in [KappaMode::VsVote, KappaMode::AllPairs] {
            let res = optimize_valence_threshold(&table, &grid, mode).unwrap();
            // kappa is 1 for all t in [0.05, 0.4); the lowest such grid point wins
            assert_abs_diff_eq!(res.best_kappa, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(res.best_t, 0.05, epsilon = 1e-12);
            assert!(grid.iter().any(|&t| t == res.best_t));
            assert_eq!(res.grid_scores.len(), grid.len());
        }
    }

    #[test]
    fn threshold_search_errors() {
        let table = plateau_table();
        assert!(matches!(
            optimize_valence_threshold(&table, &[], KappaMode::VsVote),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            optimize_valence_threshold(&table, &[0.1, -0.2], KappaMode::VsVote),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn default_grid_shape() {
        let g = default_threshold_grid();
        assert_eq!(g.len(), 101);
        assert_eq!(g[0], 0.0);
        assert_abs_diff_eq!(g[100], 0.5, epsilon = 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn agreement_report_perfect_and_structure() {
        let mut recs = Vec::new();
        let scores = [0.5, -0.5, 0.1, -0.1, 0.3, -0.3];
        for (i, &s) in scores.iter().enumerate() {
            recs.push(rec(&format!("s{i}"), "a", s, -s));
            recs.push(rec(&format!("s{i}"), "b", s, -s));
        }
        let table = RatingsTable::from_records(&recs).unwrap();
        let rep = agreement_report(&table, 0.08, KappaMode::VsVote).unwrap();
        assert_abs_diff_eq!(rep.valence_spearman, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.arousal_spearman, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.valence_kappa, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.arousal_kappa, 1.0, epsilon = 1e-12);
        assert_eq!(rep.n_annotators, 2);
        assert_eq!(rep.n_samples, 6);
    }
}
