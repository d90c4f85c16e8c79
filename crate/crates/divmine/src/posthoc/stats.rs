//! Levene's variance-homogeneity test and the two-sided Mann-Whitney U test.

use crate::posthoc::special::{f_sf, normal_sf};
use crate::ranks::{midranks, tie_group_sizes};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeveneCenter {
    Mean,
    /// Brown-Forsythe variant.
    Median,
}

impl std::str::FromStr for LeveneCenter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(LeveneCenter::Mean),
            "median" => Ok(LeveneCenter::Median),
            other => Err(Error::Config(format!("unknown levene center '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LeveneResult {
    pub w: f64,
    pub p: f64,
    pub df1: f64,
    pub df2: f64,
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// W statistic on absolute deviations from each group's center, with the
/// upper tail of F(k-1, N-k) as p-value.
pub fn levene(groups: &[Vec<f64>], center: LeveneCenter) -> Result<LeveneResult> {
    if groups.len() < 2 {
        return Err(Error::Validation(format!(
            "levene needs at least 2 groups, got {}",
            groups.len()
        )));
    }
    for (i, g) in groups.iter().enumerate() {
        if g.len() < 2 {
            return Err(Error::Validation(format!(
                "levene group {i} has {} observations, needs at least 2",
                g.len()
            )));
        }
    }
    let k = groups.len();
    let n_total: usize = groups.iter().map(Vec::len).sum();

    let z: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            let c = match center {
                LeveneCenter::Mean => g.iter().sum::<f64>() / g.len() as f64,
                LeveneCenter::Median => median(g),
            };
            g.iter().map(|x| (x - c).abs()).collect()
        })
        .collect();

    let group_means: Vec<f64> = z.iter().map(|g| g.iter().sum::<f64>() / g.len() as f64).collect();
    let grand_mean =
        z.iter().flatten().sum::<f64>() / n_total as f64;

    let between: f64 = z
        .iter()
        .zip(&group_means)
        .map(|(g, m)| g.len() as f64 * (m - grand_mean).powi(2))
        .sum();
    let within: f64 = z
        .iter()
        .zip(&group_means)
        .map(|(g, m)| g.iter().map(|v| (v - m).powi(2)).sum::<f64>())
        .sum();

    let df1 = (k - 1) as f64;
    let df2 = (n_total - k) as f64;
    let (w, p) = if within == 0.0 {
        if between == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY, 0.0)
        }
    } else {
        let w = (df2 / df1) * between / within;
        (w, f_sf(w, df1, df2))
    };
    Ok(LeveneResult { w, p, df1, df2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MwuMode {
    /// Exact when the pooled size is at most 12, else normal.
    Auto,
    Exact,
    Normal,
}

impl std::str::FromStr for MwuMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(MwuMode::Auto),
            "exact" => Ok(MwuMode::Exact),
            "normal" => Ok(MwuMode::Normal),
            other => Err(Error::Config(format!("unknown mwu mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MwuResult {
    pub u_x: f64,
    pub u_y: f64,
    pub p: f64,
    /// True when p came from full permutation enumeration.
    pub exact: bool,
}

const EXACT_LIMIT: usize = 12;

/// Two-sided Mann-Whitney U with mid-ranks for ties. Exact p enumerates
/// every assignment of the pooled values to the two groups; the normal
/// path applies the tie-corrected variance and a 0.5 continuity correction.
pub fn mann_whitney_u(x: &[f64], y: &[f64], mode: MwuMode) -> Result<MwuResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Validation(
            "mann-whitney needs two nonempty groups".into(),
        ));
    }
    let n_x = x.len();
    let n_y = y.len();
    let n = n_x + n_y;
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = midranks(&pooled);
    let r_x: f64 = ranks[..n_x].iter().sum();
    let u_x = r_x - (n_x * (n_x + 1)) as f64 / 2.0;
    let u_y = (n_x * n_y) as f64 - u_x;

    let exact = match mode {
        MwuMode::Exact => true,
        MwuMode::Normal => false,
        MwuMode::Auto => n <= EXACT_LIMIT,
    };
    let mu = (n_x * n_y) as f64 / 2.0;
    let p = if exact {
        exact_two_sided(&ranks, n_x, (u_x - mu).abs())
    } else {
        let tie_term: f64 = tie_group_sizes(&pooled)
            .iter()
            .map(|&t| (t * t * t - t) as f64)
            .sum();
        let var = (n_x * n_y) as f64 / 12.0
            * ((n + 1) as f64 - tie_term / (n * (n - 1)) as f64);
        if var <= 0.0 {
            1.0
        } else {
            let z = ((u_x - mu).abs() - 0.5).max(0.0) / var.sqrt();
            (2.0 * normal_sf(z)).min(1.0)
        }
    };
    Ok(MwuResult { u_x, u_y, p, exact })
}

/// Fraction of n-choose-n_x rank subsets whose |U - mu| reaches the
/// observed deviation. Rank assignments permute the observed pool, so ties
/// are handled exactly.
fn exact_two_sided(ranks: &[f64], n_x: usize, observed_dev: f64) -> f64 {
    let n = ranks.len();
    let mu = (n_x * (n - n_x)) as f64 / 2.0;
    let base = (n_x * (n_x + 1)) as f64 / 2.0;
    let mut hits = 0usize;
    let mut total = 0usize;
    // lexicographic combination walk
    let mut idx: Vec<usize> = (0..n_x).collect();
    loop {
        let r_sum: f64 = idx.iter().map(|&i| ranks[i]).sum();
        let u = r_sum - base;
        total += 1;
        if (u - mu).abs() >= observed_dev - 1e-12 {
            hits += 1;
        }
        // advance the combination
        let mut pos = n_x;
        while pos > 0 {
            pos -= 1;
            if idx[pos] != pos + n - n_x {
                idx[pos] += 1;
                for j in pos + 1..n_x {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
            if pos == 0 {
                return hits as f64 / total as f64;
            }
        }
    }
}
