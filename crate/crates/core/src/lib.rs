//! Interventional robustness scoring for learned representations.
//!
//! Given N samples of a code vector Z (dim K') labeled with discrete
//! generative factors G (dim K), this crate estimates how much each latent
//! dimension moves when nuisance factors are intervened on while the factors
//! of interest are held fixed. The worst-case disagreement (EMPIDA) is
//! normalized into the IRS score, aggregated into a K' x K dependency
//! matrix, per-feature disentanglement scores and an overall weighted score.
//!
//! The estimator runs in O(N) via nested hash partitioning, corrects for
//! discrete confounding with importance weights, and has an exact fast path
//! for noise-free fully crossed datasets. A discrete mutual-information
//! baseline, a synthetic causal-process generator with exact oracles, and
//! plot-ready response summaries round out the toolkit.

pub mod dataset;
pub mod error;
pub mod estimator;
pub mod io;
pub mod mi;
pub mod partition;
pub mod scores;
pub mod synth;
pub mod viz;

pub use dataset::{
    ingest, is_fully_crossed, DiscretizationPlan, IngestOutcome, LabeledDataset, Strategy,
    DEFAULT_BINS,
};
pub use error::{Error, Result};
pub use estimator::{
    empida, interventional_mean, pida, Distance, EmpidaOutcome, InterventionalMean, MeanMode,
    ScoreConfig, WeightNorm,
};
pub use mi::{mi_disentanglement, mi_matrix, mi_report, MiReport, DEFAULT_MI_BUCKETS};
pub use partition::{build_frequencies, build_partition, FrequencyTable, IndexSpec, PartitionTable};
pub use scores::{
    dependency_matrix, disentanglement_score, domain_shift_score, irs, FastPath, FeatureScore,
    IrsOutcome, IrsReport,
};
pub use synth::{
    enumerate_tuples, oracle_empida_analytic, oracle_empida_dataset, sample_dataset, SampleMode,
    ScmConfig, SyntheticEncoder,
};
pub use viz::{viz_report, VizReport};
