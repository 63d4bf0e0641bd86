//! Nested hash partitioning of dataset rows by factor realizations, and the
//! relative-frequency tables the importance weights are built from. Both
//! constructions make a bounded number of passes over the rows.

use std::collections::HashMap;

use serde::Serialize;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

/// The (L, I, J) triple defining one score query: feature indices L,
/// conditioned factor indices I (held fixed by intervention) and nuisance
/// factor indices J (swept by intervention). I and J must be disjoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSpec {
    features: Vec<usize>,
    held: Vec<usize>,
    nuisance: Vec<usize>,
}

impl IndexSpec {
    /// Validate the triple against a dataset's dimensions. `held` may be
    /// empty (the normalizer query); `features` and `nuisance` may not.
    pub fn new(
        features: Vec<usize>,
        held: Vec<usize>,
        nuisance: Vec<usize>,
        d: &LabeledDataset,
    ) -> Result<Self> {
        Self::with_dims(features, held, nuisance, d.num_factors(), d.num_features())
    }

    pub fn with_dims(
        mut features: Vec<usize>,
        mut held: Vec<usize>,
        mut nuisance: Vec<usize>,
        num_factors: usize,
        num_features: usize,
    ) -> Result<Self> {
        features.sort_unstable();
        features.dedup();
        held.sort_unstable();
        held.dedup();
        nuisance.sort_unstable();
        nuisance.dedup();
        if features.is_empty() {
            return Err(Error::EmptyFeatureSet);
        }
        if nuisance.is_empty() {
            return Err(Error::EmptyNuisanceSet);
        }
        for &l in &features {
            if l >= num_features {
                return Err(Error::FeatureIndexOutOfRange {
                    index: l,
                    k_prime: num_features,
                });
            }
        }
        for &i in held.iter().chain(&nuisance) {
            if i >= num_factors {
                return Err(Error::FactorIndexOutOfRange {
                    index: i,
                    k: num_factors,
                });
            }
        }
        if let Some(&i) = held.iter().find(|i| nuisance.contains(i)) {
            return Err(Error::OverlappingIndexSets { index: i });
        }
        Ok(Self {
            features,
            held,
            nuisance,
        })
    }

    pub fn features(&self) -> &[usize] {
        &self.features
    }

    pub fn held(&self) -> &[usize] {
        &self.held
    }

    pub fn nuisance(&self) -> &[usize] {
        &self.nuisance
    }

    /// Factor indices outside I (ascending).
    pub fn complement_of_held(&self, num_factors: usize) -> Vec<usize> {
        (0..num_factors).filter(|i| !self.held.contains(i)).collect()
    }

    /// Factor indices outside I ∪ J (ascending).
    pub fn complement_of_both(&self, num_factors: usize) -> Vec<usize> {
        (0..num_factors)
            .filter(|i| !self.held.contains(i) && !self.nuisance.contains(i))
            .collect()
    }
}

/// One innermost cell: rows sharing a realization of G_J within an outer cell.
#[derive(Debug, Clone, Serialize)]
pub struct InnerCell {
    pub key: Vec<u32>,
    pub rows: Vec<usize>,
}

/// One outer cell: rows sharing a realization of G_I, with its nested
/// partition by realizations of G_J.
#[derive(Debug, Clone, Serialize)]
pub struct OuterCell {
    pub key: Vec<u32>,
    pub rows: Vec<usize>,
    pub inner: Vec<InnerCell>,
}

/// Nested partition of row indices: outer cells keyed by realizations of
/// G_I, inner cells by co-occurring realizations of G_J. Keys iterate in
/// sorted lexicographic order so all reductions are deterministic.
#[derive(Debug, Clone, Serialize)]
pub struct PartitionTable {
    pub outer: Vec<OuterCell>,
}

impl PartitionTable {
    pub fn outer_len(&self) -> usize {
        self.outer.len()
    }

    /// Skeleton (keys and sizes only) for debug output.
    pub fn skeleton(&self) -> serde_json::Value {
        serde_json::json!({
            "outer": self.outer.iter().map(|o| serde_json::json!({
                "key": o.key,
                "size": o.rows.len(),
                "inner": o.inner.iter().map(|c| serde_json::json!({
                    "key": c.key,
                    "size": c.rows.len(),
                })).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })
    }
}

fn project(d: &LabeledDataset, row: usize, cols: &[usize]) -> Vec<u32> {
    cols.iter().map(|&c| d.factor(row, c)).collect()
}

/// Build the nested partition for the given spec. Returns the table and the
/// number of row visits performed (exactly 2N: one pass per nesting level).
pub fn build_partition(d: &LabeledDataset, spec: &IndexSpec) -> (PartitionTable, u64) {
    let mut visits = 0u64;
    let mut outer_map: HashMap<Vec<u32>, Vec<usize>> = HashMap::new();
    for row in 0..d.n() {
        visits += 1;
        outer_map
            .entry(project(d, row, spec.held()))
            .or_default()
            .push(row);
    }
    let mut outer: Vec<OuterCell> = outer_map
        .into_iter()
        .map(|(key, rows)| {
            let mut inner_map: HashMap<Vec<u32>, Vec<usize>> = HashMap::new();
            for &row in &rows {
                visits += 1;
                inner_map
                    .entry(project(d, row, spec.nuisance()))
                    .or_default()
                    .push(row);
            }
            let mut inner: Vec<InnerCell> = inner_map
                .into_iter()
                .map(|(key, rows)| InnerCell { key, rows })
                .collect();
            inner.sort_by(|a, b| a.key.cmp(&b.key));
            OuterCell { key, rows, inner }
        })
        .collect();
    outer.sort_by(|a, b| a.key.cmp(&b.key));
    (PartitionTable { outer }, visits)
}

/// Empirical relative frequencies over full realization tuples and over the
/// two complement marginals the importance weights need: outside I (for the
/// reference mean) and outside I ∪ J (for the nuisance-intervened mean).
#[derive(Debug, Clone)]
pub struct FrequencyTable {
    n: usize,
    full: HashMap<Vec<u32>, usize>,
    comp_held: HashMap<Vec<u32>, usize>,
    comp_both: HashMap<Vec<u32>, usize>,
    comp_held_cols: Vec<usize>,
    comp_both_cols: Vec<usize>,
}

impl FrequencyTable {
    pub fn n(&self) -> usize {
        self.n
    }

    /// p̂ of the row's full realization tuple.
    pub fn p_full(&self, d: &LabeledDataset, row: usize) -> f64 {
        let key = project(d, row, &(0..d.num_factors()).collect::<Vec<_>>());
        self.full[&key] as f64 / self.n as f64
    }

    fn count_full(&self, d: &LabeledDataset, row: usize) -> usize {
        let key = project(d, row, &(0..d.num_factors()).collect::<Vec<_>>());
        self.full[&key]
    }

    /// p̂ of the row's tuple restricted to factors outside I.
    pub fn p_comp_held(&self, d: &LabeledDataset, row: usize) -> f64 {
        self.count_comp_held(d, row) as f64 / self.n as f64
    }

    fn count_comp_held(&self, d: &LabeledDataset, row: usize) -> usize {
        if self.comp_held_cols.is_empty() {
            return self.n;
        }
        self.comp_held[&project(d, row, &self.comp_held_cols)]
    }

    /// p̂ of the row's tuple restricted to factors outside I ∪ J.
    pub fn p_comp_both(&self, d: &LabeledDataset, row: usize) -> f64 {
        self.count_comp_both(d, row) as f64 / self.n as f64
    }

    fn count_comp_both(&self, d: &LabeledDataset, row: usize) -> usize {
        if self.comp_both_cols.is_empty() {
            return self.n;
        }
        self.comp_both[&project(d, row, &self.comp_both_cols)]
    }

    /// Raw importance weight p̂(g outside V) / (N · p̂(g)) for a row, where V
    /// is the intervened factor set: I for the reference mean (`both =
    /// false`), I ∪ J for the nuisance-intervened mean (`both = true`).
    pub fn raw_weight(&self, d: &LabeledDataset, row: usize, both: bool) -> f64 {
        let comp = if both {
            self.count_comp_both(d, row)
        } else {
            self.count_comp_held(d, row)
        };
        comp as f64 / (self.n as f64 * self.count_full(d, row) as f64)
    }
}

/// Count realization tuples in single passes over the rows. Returns the
/// table and the number of row visits (3N).
pub fn build_frequencies(d: &LabeledDataset, spec: &IndexSpec) -> (FrequencyTable, u64) {
    let mut visits = 0u64;
    let all_cols: Vec<usize> = (0..d.num_factors()).collect();
    let comp_held_cols = spec.complement_of_held(d.num_factors());
    let comp_both_cols = spec.complement_of_both(d.num_factors());

    let mut full = HashMap::new();
    for row in 0..d.n() {
        visits += 1;
        *full.entry(project(d, row, &all_cols)).or_insert(0) += 1;
    }
    let mut comp_held = HashMap::new();
    for row in 0..d.n() {
        visits += 1;
        *comp_held.entry(project(d, row, &comp_held_cols)).or_insert(0) += 1;
    }
    let mut comp_both = HashMap::new();
    for row in 0..d.n() {
        visits += 1;
        *comp_both.entry(project(d, row, &comp_both_cols)).or_insert(0) += 1;
    }
    (
        FrequencyTable {
            n: d.n(),
            full,
            comp_held,
            comp_both,
            comp_held_cols,
            comp_both_cols,
        },
        visits,
    )
}
