//! Latent-response summaries for plotting: for one latent dimension, how its
//! interventional mean moves along its dominant factor versus along every
//! other factor. A disentangled feature shows a structured profile in the
//! star panel and flat curves everywhere else.

use serde::Serialize;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::estimator::{cell_mean, ScoreConfig};
use crate::partition::{build_frequencies, build_partition, IndexSpec};
use crate::scores::{dependency_matrix, FastPath};

/// One point on a response curve: the intervened level of a factor and the
/// resulting mean of the latent dimension.
#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub level: u32,
    pub mean: f64,
    pub count: usize,
}

/// Response of the latent to interventions on one off factor, conditioned
/// on a fixed realization of the dominant factor.
#[derive(Debug, Clone, Serialize)]
pub struct Curve {
    /// Realization of the dominant factor this curve is conditioned on.
    pub star_level: u32,
    pub points: Vec<CurvePoint>,
}

/// All curves for one off factor, with their joint flatness: the largest
/// mean spread across any single curve. Near-zero flatness means the factor
/// does not move this latent.
#[derive(Debug, Clone, Serialize)]
pub struct FactorPanel {
    pub factor: usize,
    pub factor_name: String,
    pub curves: Vec<Curve>,
    pub flatness: f64,
}

/// Profile along the dominant factor: conditional mean, spread band and
/// support per realization.
#[derive(Debug, Clone, Serialize)]
pub struct StarPoint {
    pub level: u32,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Plot-ready summary for one latent dimension.
#[derive(Debug, Clone, Serialize)]
pub struct VizReport {
    pub feature: usize,
    pub feature_name: String,
    /// "ok" for active features, "inactive" when the latent never deviates
    /// from its mean (panels are then empty).
    pub status: String,
    pub i_star: Option<usize>,
    pub score: Option<f64>,
    pub star: Vec<StarPoint>,
    pub panels: Vec<FactorPanel>,
}

/// Build the response summary for one latent dimension. The dominant factor
/// is the one maximizing the single-factor robustness score.
pub fn viz_report(d: &LabeledDataset, feature: usize, cfg: &ScoreConfig) -> Result<VizReport> {
    if feature >= d.num_features() {
        return Err(Error::FeatureIndexOutOfRange {
            index: feature,
            k_prime: d.num_features(),
        });
    }
    let report = dependency_matrix(d, cfg, FastPath::Auto)?;
    let entry = &report.per_feature[feature];
    let feature_name = d
        .feature_names()
        .map(|n| n[feature].clone())
        .unwrap_or_else(|| format!("z_{feature}"));
    if !entry.active {
        return Ok(VizReport {
            feature,
            feature_name,
            status: "inactive".to_string(),
            i_star: None,
            score: None,
            star: Vec::new(),
            panels: Vec::new(),
        });
    }
    let i_star = entry.i_star.expect("active feature has a dominant factor");

    // star profile: conditional mean / std / count per realization of i*
    let mut star = Vec::new();
    {
        let card = d.factor_cardinalities()[i_star] as usize;
        let mut sums = vec![0.0f64; card];
        let mut sq = vec![0.0f64; card];
        let mut counts = vec![0usize; card];
        for row in 0..d.n() {
            let g = d.factor(row, i_star) as usize;
            let z = d.code(row, feature);
            sums[g] += z;
            sq[g] += z * z;
            counts[g] += 1;
        }
        for level in 0..card {
            let c = counts[level];
            if c == 0 {
                continue;
            }
            let mean = sums[level] / c as f64;
            let var = (sq[level] / c as f64 - mean * mean).max(0.0);
            star.push(StarPoint {
                level: level as u32,
                mean,
                std: var.sqrt(),
                count: c,
            });
        }
    }

    // off panels: curves of E[Z_l | g_{i*}, do(G_j <- level)] over levels
    let mut panels = Vec::new();
    for j in 0..d.num_factors() {
        if j == i_star {
            continue;
        }
        let spec = IndexSpec::new(vec![feature], vec![i_star], vec![j], d)?;
        let (parts, _) = build_partition(d, &spec);
        let (freqs, _) = build_frequencies(d, &spec);
        let mut curves = Vec::new();
        let mut flatness = 0.0f64;
        for outer in &parts.outer {
            let mut points = Vec::new();
            for inner in &outer.inner {
                if inner.rows.len() < cfg.min_cell_size {
                    continue;
                }
                let (value, _) = cell_mean(
                    d,
                    &freqs,
                    &inner.rows,
                    spec.features(),
                    true,
                    cfg.mode,
                    cfg.weight_norm,
                )?;
                points.push(CurvePoint {
                    level: inner.key[0],
                    mean: value[0],
                    count: inner.rows.len(),
                });
            }
            if points.is_empty() {
                continue;
            }
            let lo = points.iter().map(|p| p.mean).fold(f64::INFINITY, f64::min);
            let hi = points
                .iter()
                .map(|p| p.mean)
                .fold(f64::NEG_INFINITY, f64::max);
            flatness = flatness.max(hi - lo);
            curves.push(Curve {
                star_level: outer.key[0],
                points,
            });
        }
        panels.push(FactorPanel {
            factor: j,
            factor_name: d
                .factor_names()
                .map(|n| n[j].clone())
                .unwrap_or_else(|| format!("g_{j}")),
            curves,
            flatness,
        });
    }

    Ok(VizReport {
        feature,
        feature_name,
        status: "ok".to_string(),
        i_star: Some(i_star),
        score: entry.d,
        star,
        panels,
    })
}
