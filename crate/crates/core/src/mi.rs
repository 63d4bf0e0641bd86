//! Discrete mutual-information baseline: each latent dimension is bucketed
//! into equal-width bins and MI with each factor is computed from the joint
//! histogram (natural log). Row scores compare each row of the MI matrix to
//! its one-hot idealization.

use serde::Serialize;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::scores::FeatureScore;

/// MI matrix and disentanglement summary mirroring `IrsReport`'s shape.
#[derive(Debug, Clone, Serialize)]
pub struct MiReport {
    /// K' x K matrix of mutual-information estimates in nats.
    pub matrix: Vec<Vec<f64>>,
    pub per_feature: Vec<FeatureScore>,
    /// Unweighted average of the per-feature scores.
    pub overall: f64,
    pub config: MiConfigEcho,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MiConfigEcho {
    pub metric: String,
    pub buckets: usize,
    /// The row-idealization normalization is one reading of a verbal
    /// description; recorded here for reproducibility.
    pub normalization: String,
}

/// Bucket a latent column into `buckets` equal-width bins over its observed
/// range; boundary values go to the lower bucket. A constant column lands
/// entirely in bucket 0.
fn bucketize(values: &[f64], buckets: usize) -> Vec<usize> {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return vec![0; values.len()];
    }
    let width = (max - min) / buckets as f64;
    values
        .iter()
        .map(|&v| {
            // count edges strictly below v
            let mut b = ((v - min) / width).ceil() as isize - 1;
            if v == min {
                b = 0;
            }
            b.clamp(0, buckets as isize - 1) as usize
        })
        .collect()
}

fn mi_from_joint(joint: &[Vec<usize>], n: usize) -> f64 {
    let rows = joint.len();
    let cols = joint[0].len();
    let row_sums: Vec<usize> = joint.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<usize> = (0..cols).map(|c| joint.iter().map(|r| r[c]).sum()).collect();
    let nf = n as f64;
    let mut mi = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let count = joint[r][c];
            if count == 0 {
                continue;
            }
            let p = count as f64 / nf;
            let px = row_sums[r] as f64 / nf;
            let py = col_sums[c] as f64 / nf;
            mi += p * (p / (px * py)).ln();
        }
    }
    mi.max(0.0)
}

/// MI matrix: R[l][i] is the discrete mutual information (nats) between the
/// bucketed latent Z_l and factor G_i.
pub fn mi_matrix(d: &LabeledDataset, buckets: usize) -> Result<Vec<Vec<f64>>> {
    if buckets < 2 {
        return Err(Error::InvalidPlan(format!(
            "MI bucket count must be at least 2, got {buckets}"
        )));
    }
    let n = d.n();
    let mut matrix = Vec::with_capacity(d.num_features());
    for l in 0..d.num_features() {
        let values: Vec<f64> = d.codes().column(l).to_vec();
        let z_bins = bucketize(&values, buckets);
        let mut row = Vec::with_capacity(d.num_factors());
        for i in 0..d.num_factors() {
            let card = d.factor_cardinalities()[i] as usize;
            let mut joint = vec![vec![0usize; card]; buckets];
            for r in 0..n {
                joint[z_bins[r]][d.factor(r, i) as usize] += 1;
            }
            row.push(mi_from_joint(&joint, n));
        }
        matrix.push(row);
    }
    Ok(matrix)
}

/// Per-row disentanglement from an MI matrix: 1 minus the squared mass off
/// the largest entry, relative to the row's total squared mass. All-zero
/// rows score 0.
pub fn mi_disentanglement(matrix: &[Vec<f64>]) -> (Vec<(f64, usize)>, f64) {
    let scores: Vec<(f64, usize)> = matrix
        .iter()
        .map(|row| {
            let total: f64 = row.iter().map(|v| v * v).sum();
            if total <= 0.0 {
                return (0.0, 0);
            }
            let (i_max, _) = row
                .iter()
                .enumerate()
                .fold((0usize, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                    if v > bv {
                        (i, v)
                    } else {
                        (bi, bv)
                    }
                });
            let off: f64 = row
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != i_max)
                .map(|(_, v)| v * v)
                .sum();
            (1.0 - off / total, i_max)
        })
        .collect();
    let average = if scores.is_empty() {
        0.0
    } else {
        scores.iter().map(|(s, _)| s).sum::<f64>() / scores.len() as f64
    };
    (scores, average)
}

/// Full MI baseline report (conventional default: 20 buckets).
pub fn mi_report(d: &LabeledDataset, buckets: usize) -> Result<MiReport> {
    let matrix = mi_matrix(d, buckets)?;
    let (scores, overall) = mi_disentanglement(&matrix);
    let per_feature = scores
        .iter()
        .enumerate()
        .map(|(l, &(score, i_star))| FeatureScore {
            feature: l,
            d: Some(score),
            i_star: Some(i_star),
            weight: 1.0,
            active: true,
        })
        .collect();
    Ok(MiReport {
        matrix,
        per_feature,
        overall,
        config: MiConfigEcho {
            metric: "mi".to_string(),
            buckets,
            normalization: "squared-mass ratio against the one-hot idealized row".to_string(),
        },
        warnings: Vec::new(),
    })
}

pub const DEFAULT_MI_BUCKETS: usize = 20;

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn crossed(cards: &[u32], code: impl Fn(&[u32]) -> Vec<f64>) -> LabeledDataset {
        let mut tuples: Vec<Vec<u32>> = vec![vec![]];
        for &c in cards {
            tuples = tuples
                .into_iter()
                .flat_map(|t| {
                    (0..c).map(move |v| {
                        let mut t = t.clone();
                        t.push(v);
                        t
                    })
                })
                .collect();
        }
        let n = tuples.len();
        let factors = Array2::from_shape_fn((n, cards.len()), |(r, c)| tuples[r][c]);
        let first = code(&tuples[0]);
        let codes = Array2::from_shape_fn((n, first.len()), |(r, c)| code(&tuples[r])[c]);
        LabeledDataset::new(codes, factors).unwrap()
    }

    #[test]
    fn identity_feature_has_log_card_mi() {
        // Z0 = G0 over uniform cardinality 4, independent second factor
        let d = crossed(&[4, 3], |g| vec![g[0] as f64]);
        let matrix = mi_matrix(&d, 20).unwrap();
        assert!((matrix[0][0] - 4.0f64.ln()).abs() < 1e-9);
        assert!(matrix[0][1].abs() < 1e-12);
    }

    #[test]
    fn mi_matches_exhaustive_histogram_oracle() {
        // Z0 = g0 + 0.5 g1 on crossed 2x2: four distinct values, one per tuple
        let d = crossed(&[2, 2], |g| vec![g[0] as f64 + 0.5 * g[1] as f64]);
        let matrix = mi_matrix(&d, 20).unwrap();
        // oracle: joint of (z value, g) computed directly; z identifies the
        // tuple so MI(Z;G_i) = H(G_i) = ln 2
        for i in 0..2 {
            assert!((matrix[0][i] - 2.0f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn row_idealization_scores() {
        let (scores, _) = mi_disentanglement(&[
            vec![1.5, 0.0, 0.0],       // one-hot
            vec![0.8, 0.8, 0.0],       // two equal entries
            vec![0.0, 0.0, 0.0],       // dead feature
        ]);
        assert_eq!(scores[0].0, 1.0);
        assert!((scores[1].0 - 0.5).abs() < 1e-12);
        assert_eq!(scores[2].0, 0.0);
    }

    #[test]
    fn constant_latent_gives_zero_row() {
        let d = crossed(&[2, 2], |g| vec![g[0] as f64, 42.0]);
        let matrix = mi_matrix(&d, 20).unwrap();
        assert!(matrix[1].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mi_bounded_by_min_entropy() {
        let d = crossed(&[4, 3], |g| vec![g[0] as f64 * 2.0 + g[1] as f64]);
        let matrix = mi_matrix(&d, 20).unwrap();
        for (i, &card) in d.factor_cardinalities().iter().enumerate() {
            let bound = (20.0f64.ln()).min((card as f64).ln()) + 1e-9;
            assert!(matrix[0][i] <= bound);
        }
    }

    #[test]
    fn mi_symmetric_under_transposed_joint() {
        let joint = vec![vec![3, 1, 0], vec![0, 2, 4]];
        let n = 10;
        let transposed: Vec<Vec<usize>> =
            (0..3).map(|c| (0..2).map(|r| joint[r][c]).collect()).collect();
        assert!((mi_from_joint(&joint, n) - mi_from_joint(&transposed, n)).abs() < 1e-12);
    }
}
