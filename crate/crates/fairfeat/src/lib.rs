//! Model-agnostic feature importance for fairness and accuracy.
//!
//! Most feature importance tooling answers "how much does feature j help
//! the model predict?". This crate also answers "how much does feature j
//! help or harm the *fairness* of the model's predictions?" — with the
//! same machinery working for any learner behind the [`learners`]
//! contract and any bias metric in [`metrics`].
//!
//! Three estimators:
//!
//! * **Permutation** ([`importance::perm_importance`]): retrain after
//!   shuffling one feature's column and compare bias before and after.
//! * **Direct occlusion** ([`importance::occl_importance_direct`]):
//!   retrain without the feature and compare.
//! * **Minipatch occlusion** ([`importance::fit_minipatch_ensemble`]):
//!   train many models on small random row/feature submatrices once, then
//!   read every feature's occlusion score out of the stored per-patch
//!   values with no additional fits.
//!
//! ```
//! use fairfeat::dataset::{generate_synthetic, split, TaskKind};
//! use fairfeat::importance::{fit_minipatch_ensemble, mp_occlusion_scores, MinipatchConfig};
//! use fairfeat::learners::ModelSpec;
//! use fairfeat::metrics::{BiasMetricKind, LossMetricKind};
//!
//! let (ds, _truth) = generate_synthetic(TaskKind::Classification, 300, 8, 7)?;
//! let config = MinipatchConfig::from_fractions(ds.n_samples(), ds.n_features(), 0.2, 0.2, 50, 7);
//! let ensemble = fit_minipatch_ensemble(
//!     &ds,
//!     &ModelSpec::random_forest(7),
//!     &config,
//!     BiasMetricKind::DpComplementRatio,
//!     LossMetricKind::ClassificationError,
//! )?;
//! let report = mp_occlusion_scores(&ensemble)?;
//! assert_eq!(report.scores.len(), 8);
//! # Ok::<(), fairfeat::Error>(())
//! ```
//!
//! The `fairfeat` binary exposes the same pipeline as `simulate`,
//! `importance`, and `report` subcommands; the book under `book/` walks
//! through the concepts chapter by chapter.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod importance;
pub mod learners;
pub mod metrics;
pub mod report;
pub mod rng;

pub use error::{Error, Result};

// Book chapters double as doctests so the guide can never drift from the
// API. Each chapter compiles and runs under `cargo test --doc`.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/datasets.md")]
    mod datasets {}
    #[doc = include_str!("../../../book/src/learners.md")]
    mod learners {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/permutation.md")]
    mod permutation {}
    #[doc = include_str!("../../../book/src/minipatches.md")]
    mod minipatches {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
