//! Ground-truth data generation from disentangled causal processes
//! (confounders -> factors -> codes, no factor-to-factor edges), synthetic
//! encoders, and reference oracles for validating the estimators.
//!
//! Sampling uses ChaCha8 seeded explicitly, so generated datasets are
//! bit-identical across runs and platforms for a fixed seed.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::estimator::{Distance, MeanMode, ScoreConfig, WeightNorm};
use crate::partition::IndexSpec;

/// One discrete confounder with its prior.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Confounder {
    pub cardinality: u32,
    pub prior: Vec<f64>,
}

/// One generative factor: its parent confounders and the conditional
/// probability table p(g_i | parents), one row per parent-realization
/// combination in row-major order (last listed parent fastest).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorMechanism {
    pub cardinality: u32,
    #[serde(default)]
    pub parents: Vec<usize>,
    pub table: Vec<Vec<f64>>,
}

/// Synthetic stand-in for an encoder composed with the observation
/// mechanism, mapping a factor realization tuple to a code vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncoderKind {
    /// Each output dimension is a strictly monotone affine image of one
    /// factor: z_l = scale_l * g_{assignment[l]} + offset_l, scale_l > 0.
    Permutation {
        assignment: Vec<usize>,
        #[serde(default)]
        scales: Option<Vec<f64>>,
        #[serde(default)]
        offsets: Option<Vec<f64>>,
    },
    /// z = M g (+ bias), M of shape K' x K.
    Linear {
        matrix: Vec<Vec<f64>>,
        #[serde(default)]
        bias: Option<Vec<f64>>,
    },
    /// Each output dimension is a sum of monomial terms over factor values.
    Polynomial { dims: usize, terms: Vec<PolyTerm> },
    /// Constant output (inactive features).
    Constant { values: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolyTerm {
    /// Output dimension this term contributes to.
    pub dim: usize,
    pub coeff: f64,
    /// Exponent per factor; empty entries mean exponent 0.
    pub exponents: Vec<u32>,
}

/// Encoder plus optional additive zero-mean Gaussian code noise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticEncoder {
    #[serde(flatten)]
    pub kind: EncoderKind,
    /// Standard deviation of additive code noise; 0 for noise-free codes.
    #[serde(default)]
    pub noise: f64,
}

impl SyntheticEncoder {
    pub fn output_dim(&self) -> usize {
        match &self.kind {
            EncoderKind::Permutation { assignment, .. } => assignment.len(),
            EncoderKind::Linear { matrix, .. } => matrix.len(),
            EncoderKind::Polynomial { dims, .. } => *dims,
            EncoderKind::Constant { values } => values.len(),
        }
    }

    /// Deterministic part of the encoding (the mean under code noise).
    pub fn mean_encode(&self, g: &[u32]) -> Vec<f64> {
        match &self.kind {
            EncoderKind::Permutation {
                assignment,
                scales,
                offsets,
            } => assignment
                .iter()
                .enumerate()
                .map(|(l, &i)| {
                    let scale = scales.as_ref().map(|s| s[l]).unwrap_or(1.0);
                    let offset = offsets.as_ref().map(|o| o[l]).unwrap_or(0.0);
                    scale * g[i] as f64 + offset
                })
                .collect(),
            EncoderKind::Linear { matrix, bias } => matrix
                .iter()
                .enumerate()
                .map(|(l, row)| {
                    row.iter()
                        .zip(g)
                        .map(|(m, &v)| m * v as f64)
                        .sum::<f64>()
                        + bias.as_ref().map(|b| b[l]).unwrap_or(0.0)
                })
                .collect(),
            EncoderKind::Polynomial { dims, terms } => {
                let mut out = vec![0.0; *dims];
                for term in terms {
                    let mut value = term.coeff;
                    for (i, &e) in term.exponents.iter().enumerate() {
                        value *= (g[i] as f64).powi(e as i32);
                    }
                    out[term.dim] += value;
                }
                out
            }
            EncoderKind::Constant { values } => values.clone(),
        }
    }

    fn encode(&self, g: &[u32], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut z = self.mean_encode(g);
        if self.noise > 0.0 {
            for v in &mut z {
                *v += self.noise * sample_standard_normal(rng);
            }
        }
        z
    }

    fn validate(&self, num_factors: usize) -> Result<()> {
        match &self.kind {
            EncoderKind::Permutation {
                assignment,
                scales,
                offsets,
            } => {
                for &i in assignment {
                    if i >= num_factors {
                        return Err(Error::InvalidScm(format!(
                            "permutation encoder references factor {i} but there are {num_factors}"
                        )));
                    }
                }
                if let Some(s) = scales {
                    if s.len() != assignment.len() {
                        return Err(Error::InvalidScm("scales length mismatch".into()));
                    }
                    if s.iter().any(|&v| v <= 0.0) {
                        return Err(Error::InvalidScm(
                            "permutation scales must be strictly positive (monotone maps)".into(),
                        ));
                    }
                }
                if let Some(o) = offsets {
                    if o.len() != assignment.len() {
                        return Err(Error::InvalidScm("offsets length mismatch".into()));
                    }
                }
            }
            EncoderKind::Linear { matrix, bias } => {
                for row in matrix {
                    if row.len() != num_factors {
                        return Err(Error::InvalidScm(format!(
                            "linear encoder rows must have {num_factors} entries"
                        )));
                    }
                }
                if let Some(b) = bias {
                    if b.len() != matrix.len() {
                        return Err(Error::InvalidScm("bias length mismatch".into()));
                    }
                }
            }
            EncoderKind::Polynomial { dims, terms } => {
                for term in terms {
                    if term.dim >= *dims {
                        return Err(Error::InvalidScm(format!(
                            "polynomial term targets dim {} but dims = {dims}",
                            term.dim
                        )));
                    }
                    if term.exponents.len() > num_factors {
                        return Err(Error::InvalidScm(
                            "polynomial exponent list longer than the factor count".into(),
                        ));
                    }
                }
            }
            EncoderKind::Constant { .. } => {}
        }
        Ok(())
    }
}

// Box-Muller; depends only on the portable uniform stream of the seeded RNG.
fn sample_standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// A disentangled causal process: confounders with priors, factors with
/// mechanism tables conditioned only on confounders, and a synthetic
/// encoder. Factor-to-factor edges cannot be expressed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScmConfig {
    #[serde(default)]
    pub confounders: Vec<Confounder>,
    pub factors: Vec<FactorMechanism>,
    pub encoder: SyntheticEncoder,
}

impl ScmConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScmConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidScm(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, c) in self.confounders.iter().enumerate() {
            if c.cardinality < 1 || c.prior.len() != c.cardinality as usize {
                return Err(Error::InvalidScm(format!(
                    "confounder {i}: prior must have {} entries",
                    c.cardinality
                )));
            }
            check_probability_row(&c.prior, &format!("confounder {i} prior"))?;
        }
        for (i, f) in self.factors.iter().enumerate() {
            if f.cardinality < 2 {
                return Err(Error::InvalidScm(format!(
                    "factor {i}: cardinality must be at least 2"
                )));
            }
            for &p in &f.parents {
                if p >= self.confounders.len() {
                    return Err(Error::InvalidScm(format!(
                        "factor {i} references confounder {p} but there are {}",
                        self.confounders.len()
                    )));
                }
            }
            let rows: usize = f
                .parents
                .iter()
                .map(|&p| self.confounders[p].cardinality as usize)
                .product();
            if f.table.len() != rows {
                return Err(Error::InvalidScm(format!(
                    "factor {i}: table must have {rows} rows (one per parent combination), got {}",
                    f.table.len()
                )));
            }
            for (r, row) in f.table.iter().enumerate() {
                if row.len() != f.cardinality as usize {
                    return Err(Error::InvalidScm(format!(
                        "factor {i} table row {r}: expected {} entries",
                        f.cardinality
                    )));
                }
                check_probability_row(row, &format!("factor {i} table row {r}"))?;
            }
        }
        self.encoder.validate(self.factors.len())?;
        Ok(())
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn factor_cardinalities(&self) -> Vec<u32> {
        self.factors.iter().map(|f| f.cardinality).collect()
    }

    fn table_row(&self, factor: usize, confounders: &[u32]) -> &[f64] {
        let mech = &self.factors[factor];
        let mut idx = 0usize;
        for &p in &mech.parents {
            idx = idx * self.confounders[p].cardinality as usize + confounders[p] as usize;
        }
        &mech.table[idx]
    }
}

fn check_probability_row(row: &[f64], what: &str) -> Result<()> {
    if row.iter().any(|&p| p < 0.0 || !p.is_finite()) {
        return Err(Error::InvalidScm(format!("{what}: negative or non-finite entry")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidScm(format!("{what}: sums to {sum}, expected 1")));
    }
    Ok(())
}

fn sample_categorical(probs: &[f64], rng: &mut ChaCha8Rng) -> u32 {
    let u: f64 = rng.gen_range(0.0..1.0);
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i as u32;
        }
    }
    (probs.len() - 1) as u32
}

/// Sampling regime for `sample_dataset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    /// Ancestral sampling of n rows (confounders, then factors, then codes).
    Random { n: usize },
    /// Every full factor combination exactly once, noise applied per row;
    /// confounders play no role.
    Crossed,
}

/// Draw a labeled dataset from the process. The returned dataset carries
/// the factor realizations as labels; confounders stay unobserved.
pub fn sample_dataset(cfg: &ScmConfig, mode: SampleMode, seed: u64) -> Result<LabeledDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = cfg.num_factors();
    let (factor_rows, n) = match mode {
        SampleMode::Random { n } => {
            if n == 0 {
                return Err(Error::EmptyDataset);
            }
            let mut rows = Vec::with_capacity(n);
            for _ in 0..n {
                let confounders: Vec<u32> = cfg
                    .confounders
                    .iter()
                    .map(|c| sample_categorical(&c.prior, &mut rng))
                    .collect();
                let g: Vec<u32> = (0..k)
                    .map(|i| sample_categorical(cfg.table_row(i, &confounders), &mut rng))
                    .collect();
                rows.push(g);
            }
            (rows, n)
        }
        SampleMode::Crossed => {
            let rows = enumerate_tuples(&cfg.factor_cardinalities());
            let n = rows.len();
            (rows, n)
        }
    };
    let k_prime = cfg.encoder.output_dim();
    let mut codes = Array2::zeros((n, k_prime));
    let mut factors = Array2::zeros((n, k));
    for (r, g) in factor_rows.iter().enumerate() {
        let z = cfg.encoder.encode(g, &mut rng);
        for (c, v) in z.into_iter().enumerate() {
            codes[(r, c)] = v;
        }
        for (c, &v) in g.iter().enumerate() {
            factors[(r, c)] = v;
        }
    }
    LabeledDataset::new(codes, factors)
}

/// All realization tuples for the given cardinalities, lexicographic order.
pub fn enumerate_tuples(cards: &[u32]) -> Vec<Vec<u32>> {
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
    tuples
}

const ENUMERATION_BUDGET: u128 = 1_000_000;

/// Naive nested-loop EMPIDA over a dataset: no hash tables, realizations
/// found by scanning, frequencies by direct counting. Mirrors the
/// estimator's semantics (weight normalization, mean mode, distance,
/// minimum cell size) so the two must agree to float accumulation order.
pub fn oracle_empida_dataset(
    d: &LabeledDataset,
    spec: &IndexSpec,
    cfg: &ScoreConfig,
) -> Result<f64> {
    let tuple_count: u128 = d
        .factor_cardinalities()
        .iter()
        .map(|&c| c as u128)
        .product();
    if tuple_count > ENUMERATION_BUDGET {
        return Err(Error::EnumerationBudget {
            tuples: tuple_count,
            limit: ENUMERATION_BUDGET,
        });
    }
    let n = d.n();
    let project = |row: usize, cols: &[usize]| -> Vec<u32> {
        cols.iter().map(|&c| d.factor(row, c)).collect()
    };
    let all_cols: Vec<usize> = (0..d.num_factors()).collect();
    let comp_held = spec.complement_of_held(d.num_factors());
    let comp_both = spec.complement_of_both(d.num_factors());

    // direct counting, quadratic on purpose
    let count_matching = |row: usize, cols: &[usize]| -> usize {
        let key = project(row, cols);
        (0..n).filter(|&r| project(r, cols) == key).count()
    };

    let weight = |row: usize, intervened_comp: &[usize]| -> f64 {
        match cfg.mode {
            MeanMode::Conditional => 1.0,
            MeanMode::Weighted => {
                let comp = if intervened_comp.is_empty() {
                    n
                } else {
                    count_matching(row, intervened_comp)
                };
                comp as f64 / (n as f64 * count_matching(row, &all_cols) as f64)
            }
        }
    };

    let mean_over = |rows: &[usize], intervened_comp: &[usize]| -> Vec<f64> {
        let mut acc = vec![0.0; spec.features().len()];
        let mut wsum = 0.0;
        for &row in rows {
            let w = match cfg.mode {
                MeanMode::Conditional => 1.0 / rows.len() as f64,
                MeanMode::Weighted => weight(row, intervened_comp),
            };
            wsum += w;
            for (slot, &l) in acc.iter_mut().zip(spec.features()) {
                *slot += w * d.code(row, l);
            }
        }
        if cfg.mode == MeanMode::Weighted && cfg.weight_norm == WeightNorm::SelfNormalized {
            for slot in &mut acc {
                *slot /= wsum;
            }
        }
        acc
    };

    // distinct held realizations, by scan + sort
    let mut held_keys: Vec<Vec<u32>> = (0..n).map(|r| project(r, spec.held())).collect();
    held_keys.sort();
    held_keys.dedup();

    let mut total = 0.0;
    for held_key in &held_keys {
        let cell_rows: Vec<usize> = (0..n)
            .filter(|&r| &project(r, spec.held()) == held_key)
            .collect();
        let ref_mean = mean_over(&cell_rows, &comp_held);

        let mut nuisance_keys: Vec<Vec<u32>> = cell_rows
            .iter()
            .map(|&r| project(r, spec.nuisance()))
            .collect();
        nuisance_keys.sort();
        nuisance_keys.dedup();

        let mut mpida = 0.0f64;
        for nuisance_key in &nuisance_keys {
            let inner_rows: Vec<usize> = cell_rows
                .iter()
                .copied()
                .filter(|&r| &project(r, spec.nuisance()) == nuisance_key)
                .collect();
            if inner_rows.len() < cfg.min_cell_size {
                continue;
            }
            let int_mean = mean_over(&inner_rows, &comp_both);
            mpida = mpida.max(cfg.distance.eval(&ref_mean, &int_mean)?);
        }
        total += cell_rows.len() as f64 / n as f64 * mpida;
    }
    Ok(total)
}

/// Exact EMPIDA for a finite SCM by adjustment-formula enumeration over the
/// joint table, using the encoder's noise-free means. The sup ranges over
/// nuisance realizations with positive joint probability alongside each
/// held realization.
pub fn oracle_empida_analytic(
    cfg: &ScmConfig,
    features: &[usize],
    held: &[usize],
    nuisance: &[usize],
    distance: Distance,
) -> Result<f64> {
    cfg.validate()?;
    let cards = cfg.factor_cardinalities();
    let conf_cards: Vec<u32> = cfg.confounders.iter().map(|c| c.cardinality).collect();
    let tuple_count: u128 = cards
        .iter()
        .chain(&conf_cards)
        .map(|&c| c as u128)
        .product();
    if tuple_count > ENUMERATION_BUDGET {
        return Err(Error::EnumerationBudget {
            tuples: tuple_count,
            limit: ENUMERATION_BUDGET,
        });
    }

    // joint p(g) by summing over confounder tuples
    let g_tuples = enumerate_tuples(&cards);
    let c_tuples = enumerate_tuples(&conf_cards);
    let mut joint: Vec<f64> = vec![0.0; g_tuples.len()];
    for c in &c_tuples {
        let pc: f64 = c
            .iter()
            .zip(&cfg.confounders)
            .map(|(&v, conf)| conf.prior[v as usize])
            .product();
        for (idx, g) in g_tuples.iter().enumerate() {
            let pg: f64 = (0..cfg.num_factors())
                .map(|i| cfg.table_row(i, c)[g[i] as usize])
                .product();
            joint[idx] += pc * pg;
        }
    }

    let marginal = |cols: &[usize], key: &[u32]| -> f64 {
        g_tuples
            .iter()
            .zip(&joint)
            .filter(|(g, _)| cols.iter().enumerate().all(|(j, &c)| g[c] == key[j]))
            .map(|(_, &p)| p)
            .sum()
    };

    let comp: Vec<usize> = (0..cfg.num_factors())
        .filter(|i| !held.contains(i) && !nuisance.contains(i))
        .collect();

    // E[Z | do(held <- a, nuisance <- b)] via the adjustment formula over
    // the complement marginal
    let int_mean = |held_key: &[u32], nuisance_key: &[u32]| -> Vec<f64> {
        let mut acc = vec![0.0; features.len()];
        let mut mass = 0.0;
        for g in &g_tuples {
            let matches_held = held.iter().zip(held_key).all(|(&c, &v)| g[c] == v);
            let matches_nuis = nuisance.iter().zip(nuisance_key).all(|(&c, &v)| g[c] == v);
            if !matches_held || !matches_nuis {
                continue;
            }
            let rest_key: Vec<u32> = comp.iter().map(|&c| g[c]).collect();
            let p_rest = marginal(&comp, &rest_key);
            if p_rest == 0.0 {
                continue;
            }
            let z = cfg.encoder.mean_encode(g);
            for (slot, &l) in acc.iter_mut().zip(features) {
                *slot += p_rest * z[l];
            }
            mass += p_rest;
        }
        // complement tuples enumerate exactly once per (held, nuisance), so
        // mass is the total complement probability; normalize to guard
        // against unreachable rest combinations
        if mass > 0.0 {
            for slot in &mut acc {
                *slot /= mass;
            }
        }
        acc
    };

    let held_keys = enumerate_tuples(
        &held.iter().map(|&i| cards[i]).collect::<Vec<_>>(),
    );
    let nuisance_keys = enumerate_tuples(
        &nuisance.iter().map(|&i| cards[i]).collect::<Vec<_>>(),
    );

    let mut total = 0.0;
    for hk in &held_keys {
        let p_held = if held.is_empty() {
            1.0
        } else {
            marginal(held, hk)
        };
        if p_held == 0.0 {
            continue;
        }
        // reference mean: nuisance left to its observational distribution
        let ref_mean = {
            let mut acc = vec![0.0; features.len()];
            let mut mass = 0.0;
            for g in &g_tuples {
                if !held.iter().zip(hk).all(|(&c, &v)| g[c] == v) {
                    continue;
                }
                let rest: Vec<usize> = (0..cfg.num_factors())
                    .filter(|i| !held.contains(i))
                    .collect();
                let rest_key: Vec<u32> = rest.iter().map(|&c| g[c]).collect();
                let p_rest = marginal(&rest, &rest_key);
                let z = cfg.encoder.mean_encode(g);
                for (slot, &l) in acc.iter_mut().zip(features) {
                    *slot += p_rest * z[l];
                }
                mass += p_rest;
            }
            if mass > 0.0 {
                for slot in &mut acc {
                    *slot /= mass;
                }
            }
            acc
        };
        let mut mpida = 0.0f64;
        for nk in &nuisance_keys {
            // joint support of (held, nuisance)
            let mut support = 0.0;
            for (g, &p) in g_tuples.iter().zip(&joint) {
                if held.iter().zip(hk).all(|(&c, &v)| g[c] == v)
                    && nuisance.iter().zip(nk).all(|(&c, &v)| g[c] == v)
                {
                    support += p;
                }
            }
            if support == 0.0 {
                continue;
            }
            let m = int_mean(hk, nk);
            mpida = mpida.max(distance.eval(&ref_mean, &m)?);
        }
        total += p_held * mpida;
    }
    Ok(total)
}
