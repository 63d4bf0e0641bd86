//! Interventional mean estimation and the PIDA/MPIDA/EMPIDA ladder
//! (general importance-weighted path).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::partition::{build_frequencies, build_partition, FrequencyTable, IndexSpec, PartitionTable};

/// Distance between mean encodings. Defaults to the Euclidean norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    #[default]
    L2,
    L1,
    LInf,
}

impl Distance {
    pub fn eval(self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                left: a.len(),
                right: b.len(),
            });
        }
        Ok(match self {
            Distance::L2 => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Distance::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Distance::LInf => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max),
        })
    }
}

impl std::str::FromStr for Distance {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(Distance::L2),
            "l1" => Ok(Distance::L1),
            "linf" | "l_inf" | "inf" => Ok(Distance::LInf),
            other => Err(format!("unknown distance '{other}' (expected l2, l1 or linf)")),
        }
    }
}

/// How cell means are estimated: importance-weighted (confounding-corrected)
/// or plain conditional (valid without confounding).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MeanMode {
    #[default]
    Weighted,
    Conditional,
}

impl std::str::FromStr for MeanMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "weighted" => Ok(MeanMode::Weighted),
            "conditional" => Ok(MeanMode::Conditional),
            other => Err(format!(
                "unknown mode '{other}' (expected weighted or conditional)"
            )),
        }
    }
}

/// Importance weights are self-normalized within each cell by default so
/// the mean stays a convex combination of observed codes; the literal
/// raw-weight estimator is selectable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightNorm {
    #[default]
    SelfNormalized,
    Raw,
}

/// Configuration shared by all score computations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub distance: Distance,
    pub mode: MeanMode,
    pub weight_norm: WeightNorm,
    /// Inner cells with fewer rows are excluded from the sup (with a warning count).
    pub min_cell_size: usize,
    /// Clamp reported IRS values into [0, 1].
    pub clamp: bool,
    /// A feature set is inactive when its normalizer falls below
    /// `activity_rel_threshold * max |code|` over its columns.
    pub activity_rel_threshold: f64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            distance: Distance::L2,
            mode: MeanMode::Weighted,
            weight_norm: WeightNorm::SelfNormalized,
            min_cell_size: 1,
            clamp: false,
            activity_rel_threshold: 1e-8,
        }
    }
}

/// An estimated mean encoding E[Z_L | do(...)] over one partition cell.
#[derive(Debug, Clone, Serialize)]
pub struct InterventionalMean {
    pub value: Vec<f64>,
    pub held_key: Vec<u32>,
    pub nuisance_key: Option<Vec<u32>>,
    /// Effective sample size (sum of weights squared diagnostic).
    pub ess: f64,
    pub count: usize,
}

pub(crate) fn cell_mean(
    d: &LabeledDataset,
    freqs: &FrequencyTable,
    rows: &[usize],
    features: &[usize],
    both: bool,
    mode: MeanMode,
    norm: WeightNorm,
) -> Result<(Vec<f64>, f64)> {
    debug_assert!(!rows.is_empty());
    let mut acc = vec![0.0f64; features.len()];
    let mut wsum = 0.0f64;
    let mut wsq = 0.0f64;
    for &row in rows {
        let w = match mode {
            MeanMode::Conditional => 1.0 / rows.len() as f64,
            MeanMode::Weighted => freqs.raw_weight(d, row, both),
        };
        wsum += w;
        wsq += w * w;
        for (slot, &l) in acc.iter_mut().zip(features) {
            *slot += w * d.code(row, l);
        }
    }
    if wsum <= 0.0 {
        return Err(Error::ZeroTotalWeight);
    }
    let ess = wsum * wsum / wsq;
    if mode == MeanMode::Weighted && norm == WeightNorm::SelfNormalized {
        for slot in &mut acc {
            *slot /= wsum;
        }
    }
    Ok((acc, ess))
}

/// Estimate one interventional mean from an already-built partition:
/// `(k, None)` is the reference mean of outer cell k under do(G_I <- g_I);
/// `(k, Some(l))` additionally intervenes on the l-th nuisance realization.
pub fn interventional_mean(
    d: &LabeledDataset,
    parts: &PartitionTable,
    freqs: &FrequencyTable,
    spec: &IndexSpec,
    cell: (usize, Option<usize>),
    mode: MeanMode,
    norm: WeightNorm,
) -> Result<InterventionalMean> {
    let (k, l) = cell;
    let outer = parts.outer.get(k).ok_or(Error::MissingCell { outer: k, inner: l })?;
    match l {
        None => {
            let (value, ess) = cell_mean(d, freqs, &outer.rows, spec.features(), false, mode, norm)?;
            Ok(InterventionalMean {
                value,
                held_key: outer.key.clone(),
                nuisance_key: None,
                ess,
                count: outer.rows.len(),
            })
        }
        Some(l) => {
            let inner = outer
                .inner
                .get(l)
                .ok_or(Error::MissingCell { outer: k, inner: Some(l) })?;
            let (value, ess) = cell_mean(d, freqs, &inner.rows, spec.features(), true, mode, norm)?;
            Ok(InterventionalMean {
                value,
                held_key: outer.key.clone(),
                nuisance_key: Some(inner.key.clone()),
                ess,
                count: inner.rows.len(),
            })
        }
    }
}

/// Post-interventional disagreement: distance between a reference and a
/// nuisance-intervened mean.
pub fn pida(
    ref_mean: &InterventionalMean,
    int_mean: &InterventionalMean,
    distance: Distance,
) -> Result<f64> {
    distance.eval(&ref_mean.value, &int_mean.value)
}

/// Worst-case disagreement for one outer cell.
#[derive(Debug, Clone, Serialize)]
pub struct CellMpida {
    pub key: Vec<u32>,
    /// Empirical occurrence weight |D_I^(k)| / N.
    pub weight: f64,
    pub mpida: f64,
    /// Nuisance realization attaining the sup, if any cell passed the
    /// minimum-size filter.
    pub argmax_nuisance: Option<Vec<u32>>,
}

/// Result of one EMPIDA query.
#[derive(Debug, Clone, Serialize)]
pub struct EmpidaOutcome {
    pub value: f64,
    pub per_cell: Vec<CellMpida>,
    /// Inner cells excluded from the sup by the minimum-size filter.
    pub skipped_cells: usize,
    /// Instrumented row-visit count for the whole query.
    pub row_visits: u64,
}

/// Expected maximal post-interventional disagreement EMPIDA(L | I, J),
/// estimated in O(N): nested hash partition, per-cell weighted means, sup
/// over observed nuisance realizations, occurrence-weighted average over
/// realizations of G_I.
pub fn empida(d: &LabeledDataset, spec: &IndexSpec, cfg: &ScoreConfig) -> Result<EmpidaOutcome> {
    let (parts, visits_p) = build_partition(d, spec);
    let (freqs, visits_f) = build_frequencies(d, spec);
    let n = d.n() as f64;

    let cells: Vec<Result<(CellMpida, usize, u64)>> = parts
        .outer
        .par_iter()
        .map(|outer| {
            let mut visits = 0u64;
            let (ref_value, _ess) = cell_mean(
                d,
                &freqs,
                &outer.rows,
                spec.features(),
                false,
                cfg.mode,
                cfg.weight_norm,
            )?;
            visits += outer.rows.len() as u64;
            let mut mpida = 0.0f64;
            let mut argmax: Option<Vec<u32>> = None;
            let mut skipped = 0usize;
            for inner in &outer.inner {
                visits += inner.rows.len() as u64;
                if inner.rows.len() < cfg.min_cell_size {
                    skipped += 1;
                    continue;
                }
                let (int_value, _) = cell_mean(
                    d,
                    &freqs,
                    &inner.rows,
                    spec.features(),
                    true,
                    cfg.mode,
                    cfg.weight_norm,
                )?;
                let dist = cfg.distance.eval(&ref_value, &int_value)?;
                if argmax.is_none() || dist > mpida {
                    mpida = dist;
                    argmax = Some(inner.key.clone());
                }
            }
            // when every inner cell was filtered out, the sup contributes nothing
            // and argmax stays None
            Ok((
                CellMpida {
                    key: outer.key.clone(),
                    weight: outer.rows.len() as f64 / n,
                    mpida,
                    argmax_nuisance: argmax,
                },
                skipped,
                visits,
            ))
        })
        .collect();

    let mut per_cell = Vec::with_capacity(cells.len());
    let mut skipped_cells = 0usize;
    let mut row_visits = visits_p + visits_f;
    for cell in cells {
        let (cell, skipped, visits) = cell?;
        skipped_cells += skipped;
        row_visits += visits;
        per_cell.push(cell);
    }
    // cells arrive in sorted key order; the reduction is deterministic
    let value = per_cell.iter().map(|c| c.weight * c.mpida).sum();
    Ok(EmpidaOutcome {
        value,
        per_cell,
        skipped_cells,
        row_visits,
    })
}

/// Per-feature scalar EMPIDA for every latent column at once, sharing one
/// partition and one frequency table. For scalar features every distance
/// in {l2, l1, linf} coincides with |.|, so this matches per-feature
/// `empida` queries exactly.
pub(crate) fn empida_per_feature(
    d: &LabeledDataset,
    held: Vec<usize>,
    nuisance: Vec<usize>,
    cfg: &ScoreConfig,
) -> Result<(Vec<f64>, usize, u64)> {
    let all_features: Vec<usize> = (0..d.num_features()).collect();
    let spec = IndexSpec::new(all_features.clone(), held, nuisance, d)?;
    let (parts, visits_p) = build_partition(d, &spec);
    let (freqs, visits_f) = build_frequencies(d, &spec);
    let n = d.n() as f64;

    let cells: Vec<Result<(Vec<f64>, f64, usize, u64)>> = parts
        .outer
        .par_iter()
        .map(|outer| {
            let mut visits = outer.rows.len() as u64;
            let (ref_value, _) = cell_mean(
                d,
                &freqs,
                &outer.rows,
                &all_features,
                false,
                cfg.mode,
                cfg.weight_norm,
            )?;
            let mut sup = vec![0.0f64; d.num_features()];
            let mut skipped = 0usize;
            for inner in &outer.inner {
                visits += inner.rows.len() as u64;
                if inner.rows.len() < cfg.min_cell_size {
                    skipped += 1;
                    continue;
                }
                let (int_value, _) = cell_mean(
                    d,
                    &freqs,
                    &inner.rows,
                    &all_features,
                    true,
                    cfg.mode,
                    cfg.weight_norm,
                )?;
                for (s, (r, i)) in sup.iter_mut().zip(ref_value.iter().zip(&int_value)) {
                    *s = s.max((r - i).abs());
                }
            }
            Ok((sup, outer.rows.len() as f64 / n, skipped, visits))
        })
        .collect();

    let mut acc = vec![0.0f64; d.num_features()];
    let mut skipped_cells = 0usize;
    let mut row_visits = visits_p + visits_f;
    for cell in cells {
        let (sup, weight, skipped, visits) = cell?;
        for (a, s) in acc.iter_mut().zip(&sup) {
            *a += weight * s;
        }
        skipped_cells += skipped;
        row_visits += visits;
    }
    Ok((acc, skipped_cells, row_visits))
}
