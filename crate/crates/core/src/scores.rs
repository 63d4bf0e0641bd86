//! Interventional robustness scores: IRS, per-feature disentanglement, the
//! full dependency matrix, domain-shift robustness, and the crossed
//! noise-free fast path.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{is_fully_crossed, LabeledDataset};
use crate::error::{Error, Result};
use crate::estimator::{empida, empida_per_feature, EmpidaOutcome, ScoreConfig};
use crate::partition::IndexSpec;

/// Result of one IRS query.
#[derive(Debug, Clone, Serialize)]
pub struct IrsOutcome {
    /// The score, absent when the feature set is inactive.
    pub score: Option<f64>,
    pub numerator: f64,
    pub normalizer: f64,
    pub active: bool,
    pub clamped: bool,
    pub warnings: Vec<String>,
}

fn max_abs_code(d: &LabeledDataset, features: &[usize]) -> f64 {
    features
        .iter()
        .flat_map(|&l| d.codes().column(l).to_vec())
        .fold(0.0f64, |m, v| m.max(v.abs()))
}

fn finish_irs(
    numerator: EmpidaOutcome,
    normalizer: EmpidaOutcome,
    max_abs: f64,
    cfg: &ScoreConfig,
) -> IrsOutcome {
    let mut warnings = Vec::new();
    let skipped = numerator.skipped_cells + normalizer.skipped_cells;
    if skipped > 0 {
        warnings.push(format!(
            "{skipped} under-supported cells excluded from the sup (min_cell_size = {})",
            cfg.min_cell_size
        ));
    }
    if normalizer.value <= cfg.activity_rel_threshold * max_abs {
        return IrsOutcome {
            score: None,
            numerator: numerator.value,
            normalizer: normalizer.value,
            active: false,
            clamped: false,
            warnings,
        };
    }
    let raw = 1.0 - numerator.value / normalizer.value;
    let (score, clamped) = if cfg.clamp {
        (raw.clamp(0.0, 1.0), raw < 0.0 || raw > 1.0)
    } else {
        if raw < 0.0 {
            warnings.push(format!(
                "IRS {raw:.6} below 0: the worst-case disagreement exceeds the normalizer on this finite sample"
            ));
        }
        (raw, false)
    };
    IrsOutcome {
        score: Some(score),
        numerator: numerator.value,
        normalizer: normalizer.value,
        active: true,
        clamped,
        warnings,
    }
}

/// IRS(L | I, J) = 1 - EMPIDA(L | I, J) / EMPIDA(L | none, all factors).
pub fn irs(d: &LabeledDataset, spec: &IndexSpec, cfg: &ScoreConfig) -> Result<IrsOutcome> {
    let numerator = empida(d, spec, cfg)?;
    let all_factors: Vec<usize> = (0..d.num_factors()).collect();
    let norm_spec = IndexSpec::new(spec.features().to_vec(), vec![], all_factors, d)?;
    let normalizer = empida(d, &norm_spec, cfg)?;
    Ok(finish_irs(
        numerator,
        normalizer,
        max_abs_code(d, spec.features()),
        cfg,
    ))
}

/// Domain-shift robustness of Z_L against shifts in factors S:
/// IRS(L | all factors except S, S).
pub fn domain_shift_score(
    d: &LabeledDataset,
    features: Vec<usize>,
    shift_factors: &[usize],
    cfg: &ScoreConfig,
) -> Result<IrsOutcome> {
    if shift_factors.is_empty() || shift_factors.len() >= d.num_factors() {
        return Err(Error::InvalidDomainShiftSet);
    }
    let held: Vec<usize> = (0..d.num_factors())
        .filter(|i| !shift_factors.contains(i))
        .collect();
    let spec = IndexSpec::new(features, held, shift_factors.to_vec(), d)?;
    irs(d, &spec, cfg)
}

/// Per-feature entry of an `IrsReport`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureScore {
    pub feature: usize,
    #[serde(rename = "D")]
    pub d: Option<f64>,
    pub i_star: Option<usize>,
    pub weight: f64,
    pub active: bool,
}

/// Echo of the configuration a report was computed with.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub metric: String,
    #[serde(flatten)]
    pub score: ScoreConfig,
    pub fast_path_used: bool,
}

/// Dependency matrix plus per-feature disentanglement scores and the
/// overall weighted score.
#[derive(Debug, Clone, Serialize)]
pub struct IrsReport {
    /// K' x K matrix of IRS values; rows of inactive features are null.
    pub matrix: Vec<Vec<Option<f64>>>,
    pub per_feature: Vec<FeatureScore>,
    /// Weighted average of D_l over active features; absent when all
    /// features are inactive.
    pub overall: Option<f64>,
    pub config: ConfigEcho,
    pub warnings: Vec<String>,
}

/// Whether the crossed noise-free fast path is used for matrix queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FastPath {
    #[default]
    Auto,
    On,
    Off,
}

impl std::str::FromStr for FastPath {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(FastPath::Auto),
            "on" => Ok(FastPath::On),
            "off" => Ok(FastPath::Off),
            other => Err(format!("unknown fast-path setting '{other}'")),
        }
    }
}

/// Row of per-factor EMPIDA values for one feature, computed on the crossed
/// noise-free path: per-cell conditional means, per-sample sup, per-sample
/// normalizer.
#[derive(Debug, Clone)]
pub struct CrossedFeatureRow {
    pub empida_row: Vec<f64>,
    pub normalizer: f64,
    pub d: Option<f64>,
    pub i_star: Option<usize>,
    pub active: bool,
}

/// Crossed fast path for one feature: EMPIDA_li averaged over realizations
/// of each factor with per-sample sups, and the per-sample normalizer.
pub fn crossed_fast_path(
    d: &LabeledDataset,
    feature: usize,
    cfg: &ScoreConfig,
) -> Result<CrossedFeatureRow> {
    if feature >= d.num_features() {
        return Err(Error::FeatureIndexOutOfRange {
            index: feature,
            k_prime: d.num_features(),
        });
    }
    if !is_fully_crossed(d) {
        return Err(Error::NotFullyCrossed);
    }
    let rows = crossed_rows(d, cfg)?;
    Ok(rows.into_iter().nth(feature).expect("row per feature"))
}

/// Fast-path rows for every feature at once (single sweep per factor).
fn crossed_rows(d: &LabeledDataset, cfg: &ScoreConfig) -> Result<Vec<CrossedFeatureRow>> {
    let n = d.n();
    let k = d.num_factors();
    let k_prime = d.num_features();

    // global mean and per-sample normalizer, per feature
    let mut global = vec![0.0f64; k_prime];
    for row in 0..n {
        for (slot, l) in global.iter_mut().zip(0..k_prime) {
            *slot += d.code(row, l);
        }
    }
    for slot in &mut global {
        *slot /= n as f64;
    }
    let mut normalizer = vec![0.0f64; k_prime];
    for row in 0..n {
        for l in 0..k_prime {
            normalizer[l] = normalizer[l].max((d.code(row, l) - global[l]).abs());
        }
    }

    // EMPIDA_li = (1/N_i) sum_k sup_{x in D_i^(k)} |E[Z_l|g_i^(k)] - z_l(x)|
    let empida_rows: Vec<Vec<f64>> = (0..k)
        .into_par_iter()
        .map(|i| {
            let card = d.factor_cardinalities()[i] as usize;
            let mut sums = vec![vec![0.0f64; k_prime]; card];
            let mut counts = vec![0usize; card];
            for row in 0..n {
                let g = d.factor(row, i) as usize;
                counts[g] += 1;
                for l in 0..k_prime {
                    sums[g][l] += d.code(row, l);
                }
            }
            let means: Vec<Vec<f64>> = sums
                .iter()
                .zip(&counts)
                .map(|(s, &c)| s.iter().map(|v| v / c as f64).collect())
                .collect();
            let mut sups = vec![vec![0.0f64; k_prime]; card];
            for row in 0..n {
                let g = d.factor(row, i) as usize;
                for l in 0..k_prime {
                    let dev = (d.code(row, l) - means[g][l]).abs();
                    sups[g][l] = sups[g][l].max(dev);
                }
            }
            (0..k_prime)
                .map(|l| sups.iter().map(|s| s[l]).sum::<f64>() / card as f64)
                .collect()
        })
        .collect();

    Ok((0..k_prime)
        .map(|l| {
            let row: Vec<f64> = empida_rows.iter().map(|r| r[l]).collect();
            let max_abs = d.codes().column(l).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if normalizer[l] <= cfg.activity_rel_threshold * max_abs {
                return CrossedFeatureRow {
                    empida_row: row,
                    normalizer: normalizer[l],
                    d: None,
                    i_star: None,
                    active: false,
                };
            }
            let mut best = f64::NEG_INFINITY;
            let mut best_i = 0usize;
            for (i, &e) in row.iter().enumerate() {
                let irs = 1.0 - e / normalizer[l];
                if irs > best {
                    best = irs;
                    best_i = i;
                }
            }
            CrossedFeatureRow {
                empida_row: row,
                normalizer: normalizer[l],
                d: Some(best),
                i_star: Some(best_i),
                active: true,
            }
        })
        .collect())
}

/// Disentanglement score of one feature: the best IRS over single-factor
/// conditioning sets, with the maximizing factor (smallest index on ties).
pub fn disentanglement_score(
    d: &LabeledDataset,
    feature: usize,
    cfg: &ScoreConfig,
) -> Result<(Option<(f64, usize)>, bool)> {
    if feature >= d.num_features() {
        return Err(Error::FeatureIndexOutOfRange {
            index: feature,
            k_prime: d.num_features(),
        });
    }
    let report = dependency_matrix(d, cfg, FastPath::Off)?;
    let entry = &report.per_feature[feature];
    Ok((entry.d.map(|v| (v, entry.i_star.unwrap())), entry.active))
}

/// Compute the full K' x K dependency matrix R with R[l][i] =
/// IRS({l} | {i}, all others), plus per-feature scores, normalizer weights
/// and the overall weighted score.
pub fn dependency_matrix(
    d: &LabeledDataset,
    cfg: &ScoreConfig,
    fast_path: FastPath,
) -> Result<IrsReport> {
    let use_fast = match fast_path {
        FastPath::Off => false,
        FastPath::Auto => is_fully_crossed(d),
        FastPath::On => {
            if !is_fully_crossed(d) {
                return Err(Error::NotFullyCrossed);
            }
            true
        }
    };

    let k = d.num_factors();
    let k_prime = d.num_features();
    let mut warnings = Vec::new();

    let (matrix, per_feature) = if use_fast {
        let rows = crossed_rows(d, cfg)?;
        let matrix: Vec<Vec<Option<f64>>> = rows
            .iter()
            .map(|r| {
                if r.active {
                    r.empida_row
                        .iter()
                        .map(|e| Some(1.0 - e / r.normalizer))
                        .collect()
                } else {
                    vec![None; k]
                }
            })
            .collect();
        let per_feature: Vec<FeatureScore> = rows
            .iter()
            .enumerate()
            .map(|(l, r)| FeatureScore {
                feature: l,
                d: r.d,
                i_star: r.i_star,
                weight: if r.active { r.normalizer } else { 0.0 },
                active: r.active,
            })
            .collect();
        (matrix, per_feature)
    } else {
        // shared per-feature normalizers, then one sweep per factor
        let all_factors: Vec<usize> = (0..k).collect();
        let (normalizers, norm_skipped, _) =
            empida_per_feature(d, vec![], all_factors.clone(), cfg)?;
        let mut numerators = vec![vec![0.0f64; k]; k_prime];
        let mut total_skipped = norm_skipped;
        for i in 0..k {
            let nuisance: Vec<usize> = (0..k).filter(|&j| j != i).collect();
            let (col, skipped, _) = empida_per_feature(d, vec![i], nuisance, cfg)?;
            total_skipped += skipped;
            for (l, v) in col.into_iter().enumerate() {
                numerators[l][i] = v;
            }
        }
        if total_skipped > 0 {
            warnings.push(format!(
                "{total_skipped} under-supported cells excluded from the sup (min_cell_size = {})",
                cfg.min_cell_size
            ));
        }
        let mut matrix = Vec::with_capacity(k_prime);
        let mut per_feature = Vec::with_capacity(k_prime);
        for l in 0..k_prime {
            let max_abs = d.codes().column(l).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let active = normalizers[l] > cfg.activity_rel_threshold * max_abs;
            if !active {
                matrix.push(vec![None; k]);
                per_feature.push(FeatureScore {
                    feature: l,
                    d: None,
                    i_star: None,
                    weight: 0.0,
                    active: false,
                });
                continue;
            }
            let mut row = Vec::with_capacity(k);
            let mut best = f64::NEG_INFINITY;
            let mut best_i = 0usize;
            for i in 0..k {
                let raw = 1.0 - numerators[l][i] / normalizers[l];
                let value = if cfg.clamp { raw.clamp(0.0, 1.0) } else { raw };
                if raw < 0.0 && !cfg.clamp {
                    warnings.push(format!(
                        "IRS[{l}][{i}] = {raw:.6} below 0 on this finite sample"
                    ));
                }
                if value > best {
                    best = value;
                    best_i = i;
                }
                row.push(Some(value));
            }
            matrix.push(row);
            per_feature.push(FeatureScore {
                feature: l,
                d: Some(best),
                i_star: Some(best_i),
                weight: normalizers[l],
                active: true,
            });
        }
        (matrix, per_feature)
    };

    // overall score: D_l weighted by the worst-case deviation normalizer
    let weight_sum: f64 = per_feature.iter().filter(|f| f.active).map(|f| f.weight).sum();
    let overall = if weight_sum > 0.0 {
        Some(
            per_feature
                .iter()
                .filter(|f| f.active)
                .map(|f| f.weight * f.d.unwrap())
                .sum::<f64>()
                / weight_sum,
        )
    } else {
        warnings.push("all features inactive; no overall score".to_string());
        None
    };

    Ok(IrsReport {
        matrix,
        per_feature,
        overall,
        config: ConfigEcho {
            metric: "irs".to_string(),
            score: cfg.clone(),
            fast_path_used: use_fast,
        },
        warnings,
    })
}
