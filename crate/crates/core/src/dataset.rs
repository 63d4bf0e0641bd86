//! Labeled datasets pairing real-valued codes with discrete generative factors,
//! plus discretization of continuous factor columns.

use std::collections::HashSet;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How one factor column is turned into a finite realization alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum Strategy {
    /// Values are already discrete; distinct values are mapped to dense
    /// indices in ascending value order.
    Discrete,
    /// Equal-width bins over the observed min-max range.
    EqualWidth { bins: usize },
    /// Equal-mass bins at empirical quantiles.
    Quantile { bins: usize },
}

/// Per-factor discretization plan, parsed from JSON as
/// `{"factors": [{"name": ..., "strategy": ..., "bins": ...}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscretizationPlan {
    pub factors: Vec<PlanEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanEntry {
    pub name: String,
    #[serde(flatten)]
    pub strategy: Strategy,
}

impl DiscretizationPlan {
    pub fn from_json(text: &str) -> Result<Self> {
        let plan: DiscretizationPlan =
            serde_json::from_str(text).map_err(|e| Error::InvalidPlan(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        for entry in &self.factors {
            match entry.strategy {
                Strategy::EqualWidth { bins } | Strategy::Quantile { bins } if bins < 2 => {
                    return Err(Error::InvalidPlan(format!(
                        "factor '{}': bin count must be at least 2, got {bins}",
                        entry.name
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Resolve a strategy per factor column. Columns absent from the plan
    /// fall back to `default_continuous` when their values are not integral,
    /// and to `Discrete` otherwise.
    pub fn resolve(
        &self,
        names: &[String],
        raw: &Array2<f64>,
        default_continuous: Strategy,
    ) -> Result<Vec<Strategy>> {
        for entry in &self.factors {
            if !names.iter().any(|n| n == &entry.name) {
                return Err(Error::InvalidPlan(format!(
                    "plan names unknown factor column '{}'",
                    entry.name
                )));
            }
        }
        Ok(names
            .iter()
            .enumerate()
            .map(|(col, name)| {
                self.factors
                    .iter()
                    .find(|e| &e.name == name)
                    .map(|e| e.strategy)
                    .unwrap_or_else(|| {
                        if column_is_integral(raw.column(col)) {
                            Strategy::Discrete
                        } else {
                            default_continuous
                        }
                    })
            })
            .collect())
    }
}

/// Default bin count for continuous factors when no plan is given.
pub const DEFAULT_BINS: usize = 10;

pub fn column_is_integral(col: ArrayView1<'_, f64>) -> bool {
    col.iter().all(|v| v.is_finite() && v.fract() == 0.0)
}

/// N rows pairing a code vector (dim K') with a discrete factor-realization
/// vector (dim K). Immutable after construction; all scores are computed
/// over this universe.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    codes: Array2<f64>,
    factors: Array2<u32>,
    factor_cardinalities: Vec<u32>,
    factor_names: Option<Vec<String>>,
    feature_names: Option<Vec<String>>,
}

impl LabeledDataset {
    /// Build a dataset from already-discrete factor indices, validating all
    /// invariants (matching row counts, finite codes, tight cardinalities).
    pub fn new(codes: Array2<f64>, factors: Array2<u32>) -> Result<Self> {
        if codes.nrows() != factors.nrows() {
            return Err(Error::RowCountMismatch {
                codes: codes.nrows(),
                factors: factors.nrows(),
            });
        }
        if codes.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        for ((row, col), v) in codes.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFiniteCode { row, col });
            }
        }
        let mut cardinalities = Vec::with_capacity(factors.ncols());
        for col in 0..factors.ncols() {
            let mut seen = HashSet::new();
            let mut max = 0u32;
            for &v in factors.column(col) {
                seen.insert(v);
                max = max.max(v);
            }
            // tight alphabet: every index below the max must occur
            if seen.len() as u32 != max + 1 {
                return Err(Error::Parse(format!(
                    "factor column {col} has gaps in its realization indices"
                )));
            }
            if seen.len() < 2 {
                return Err(Error::ConstantFactor { col });
            }
            cardinalities.push(max + 1);
        }
        Ok(Self {
            codes,
            factors,
            factor_cardinalities: cardinalities,
            factor_names: None,
            feature_names: None,
        })
    }

    pub fn with_names(
        mut self,
        factor_names: Option<Vec<String>>,
        feature_names: Option<Vec<String>>,
    ) -> Self {
        self.factor_names = factor_names;
        self.feature_names = feature_names;
        self
    }

    pub fn n(&self) -> usize {
        self.codes.nrows()
    }

    /// Number of generative factors K.
    pub fn num_factors(&self) -> usize {
        self.factors.ncols()
    }

    /// Number of latent features K'.
    pub fn num_features(&self) -> usize {
        self.codes.ncols()
    }

    pub fn factor_cardinalities(&self) -> &[u32] {
        &self.factor_cardinalities
    }

    pub fn codes(&self) -> &Array2<f64> {
        &self.codes
    }

    pub fn factors(&self) -> &Array2<u32> {
        &self.factors
    }

    pub fn factor_names(&self) -> Option<&[String]> {
        self.factor_names.as_deref()
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn code(&self, row: usize, feature: usize) -> f64 {
        self.codes[(row, feature)]
    }

    pub fn factor(&self, row: usize, factor: usize) -> u32 {
        self.factors[(row, factor)]
    }

    /// Return a copy with the rows reordered by `perm` (a permutation of 0..N).
    pub fn permuted_rows(&self, perm: &[usize]) -> Self {
        let codes = Array2::from_shape_fn(self.codes.raw_dim(), |(r, c)| self.codes[(perm[r], c)]);
        let factors =
            Array2::from_shape_fn(self.factors.raw_dim(), |(r, c)| self.factors[(perm[r], c)]);
        Self {
            codes,
            factors,
            factor_cardinalities: self.factor_cardinalities.clone(),
            factor_names: self.factor_names.clone(),
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Outcome of discretizing one factor column: dense indices plus the
/// recorded (strictly increasing) bin edges for binned strategies.
#[derive(Debug, Clone)]
pub struct ColumnDiscretization {
    pub indices: Vec<u32>,
    pub cardinality: u32,
    pub edges: Vec<f64>,
}

/// Ingest result: the validated dataset and the recorded bin edges per factor.
#[derive(Debug, Clone)]
pub struct IngestOutcome {
    pub dataset: LabeledDataset,
    pub edges: Vec<Vec<f64>>,
}

/// Validate raw inputs and build a `LabeledDataset`, discretizing each
/// factor column according to its strategy. Row order and count are
/// preserved; realization indices are canonicalized to `0..card-1` in
/// ascending value order so outputs are deterministic across runs.
pub fn ingest(
    codes: Array2<f64>,
    raw_factors: &Array2<f64>,
    strategies: &[Strategy],
) -> Result<IngestOutcome> {
    if strategies.len() != raw_factors.ncols() {
        return Err(Error::InvalidPlan(format!(
            "plan covers {} columns but factors have {}",
            strategies.len(),
            raw_factors.ncols()
        )));
    }
    if codes.nrows() != raw_factors.nrows() {
        return Err(Error::RowCountMismatch {
            codes: codes.nrows(),
            factors: raw_factors.nrows(),
        });
    }
    let n = raw_factors.nrows();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    for (col, &strategy) in strategies.iter().enumerate() {
        for (row, &v) in raw_factors.column(col).iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Parse(format!(
                    "non-finite factor value at row {row}, column {col}"
                )));
            }
        }
        let _ = strategy;
    }

    let mut factors = Array2::<u32>::zeros((n, raw_factors.ncols()));
    let mut edges = Vec::with_capacity(strategies.len());
    for (col, &strategy) in strategies.iter().enumerate() {
        let values: Vec<f64> = raw_factors.column(col).to_vec();
        let disc = discretize_column(&values, strategy, col)?;
        for (row, idx) in disc.indices.iter().enumerate() {
            factors[(row, col)] = *idx;
        }
        edges.push(disc.edges);
    }
    let dataset = LabeledDataset::new(codes, factors)?;
    Ok(IngestOutcome { dataset, edges })
}

/// Discretize one column. Boundary values are assigned to the lower bin.
pub fn discretize_column(
    values: &[f64],
    strategy: Strategy,
    col: usize,
) -> Result<ColumnDiscretization> {
    match strategy {
        Strategy::Discrete => {
            let mut distinct: Vec<f64> = values.to_vec();
            distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
            distinct.dedup();
            if distinct.len() < 2 {
                return Err(Error::ConstantFactor { col });
            }
            let indices = values
                .iter()
                .map(|v| distinct.partition_point(|d| d < v) as u32)
                .collect();
            Ok(ColumnDiscretization {
                indices,
                cardinality: distinct.len() as u32,
                edges: Vec::new(),
            })
        }
        Strategy::EqualWidth { bins } => {
            if bins < 2 {
                return Err(Error::InvalidPlan(format!(
                    "factor column {col}: bin count must be at least 2"
                )));
            }
            let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if min == max {
                return Err(Error::ConstantFactor { col });
            }
            let width = (max - min) / bins as f64;
            let edges: Vec<f64> = (1..bins).map(|k| min + k as f64 * width).collect();
            bin_by_edges(values, &edges, col)
        }
        Strategy::Quantile { bins } => {
            if bins < 2 {
                return Err(Error::InvalidPlan(format!(
                    "factor column {col}: bin count must be at least 2"
                )));
            }
            let mut sorted = values.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = sorted.len();
            let mut edges: Vec<f64> = (1..bins)
                .map(|k| {
                    let pos = (k * n).div_ceil(bins).saturating_sub(1);
                    sorted[pos]
                })
                .collect();
            edges.dedup();
            bin_by_edges(values, &edges, col)
        }
    }
}

/// Assign `bin = #{edges strictly below value}` and densify occupied bins.
fn bin_by_edges(values: &[f64], edges: &[f64], col: usize) -> Result<ColumnDiscretization> {
    let raw_bins: Vec<u32> = values
        .iter()
        .map(|v| edges.partition_point(|e| e < v) as u32)
        .collect();
    let mut occupied: Vec<u32> = raw_bins.clone();
    occupied.sort_unstable();
    occupied.dedup();
    if occupied.len() < 2 {
        return Err(Error::ConstantFactor { col });
    }
    let indices = raw_bins
        .iter()
        .map(|b| occupied.partition_point(|o| o < b) as u32)
        .collect();
    // record only edges that separate occupied bins, keeping them strictly increasing
    let kept_edges: Vec<f64> = occupied
        .windows(2)
        .map(|w| edges[(w[1] - 1) as usize])
        .collect();
    Ok(ColumnDiscretization {
        indices,
        cardinality: occupied.len() as u32,
        edges: kept_edges,
    })
}

/// True iff the dataset contains every full combination of factor
/// realizations exactly once (the noise-free crossed benchmark regime).
pub fn is_fully_crossed(d: &LabeledDataset) -> bool {
    let product: u128 = d
        .factor_cardinalities()
        .iter()
        .map(|&c| c as u128)
        .product();
    if product != d.n() as u128 {
        return false;
    }
    let mut seen = HashSet::with_capacity(d.n());
    for row in 0..d.n() {
        let tuple: Vec<u32> = (0..d.num_factors()).map(|i| d.factor(row, i)).collect();
        if !seen.insert(tuple) {
            return false;
        }
    }
    true
}
