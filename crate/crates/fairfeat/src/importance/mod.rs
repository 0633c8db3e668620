//! Feature importance scores for fairness and accuracy.
//!
//! Three estimators share one report shape:
//!
//! * permutation — refit after decoupling one feature by a random shuffle
//!   of its column, compare bias before and after;
//! * direct occlusion — refit without the feature, compare;
//! * minipatch occlusion — fit many small row/feature submatrices once,
//!   then read every feature's occlusion score out of the stored
//!   per-patch values with no further training.
//!
//! Scores are differences `metric(without feature) - metric(with
//! feature)` of bias-oriented and loss-oriented metrics, so a negative
//! fairness score marks a feature that harms fairness and a positive
//! accuracy score marks a feature that carries predictive signal.

mod minipatch;
mod occlusion;
mod permutation;

pub use minipatch::{
    fit_minipatch_ensemble, mp_bias_excluding, mp_loss_excluding, mp_occlusion_scores, Minipatch,
    MinipatchConfig, MinipatchEnsemble,
};
pub use occlusion::{occl_importance_all, occl_importance_direct};
pub use permutation::{perm_importance, perm_importance_all, PermOptions, PermutationStrategy};

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, TaskKind};
use crate::error::Result;
use crate::learners::{ModelSpec, TrainedModel};
use crate::metrics::{self, BiasMetricKind, LossMetricKind, MetricKind};

/// Which estimator produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceMethod {
    Permutation,
    OcclusionDirect,
    OcclusionMinipatch,
}

impl std::fmt::Display for ImportanceMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ImportanceMethod::Permutation => write!(f, "permutation"),
            ImportanceMethod::OcclusionDirect => write!(f, "occlusion_direct"),
            ImportanceMethod::OcclusionMinipatch => write!(f, "occlusion_minipatch"),
        }
    }
}

/// Scores for one feature. `None` plus `flagged` means the estimator had
/// no information for this feature (e.g. no patch excluded it).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureScore {
    pub feature: String,
    pub fairness: Option<f64>,
    pub accuracy: Option<f64>,
    pub flagged: bool,
    /// Standard deviation of the fairness score across repetitions
    /// (permutation method only).
    pub stddev: Option<f64>,
}

/// Sampling geometry and outcome of a fitted minipatch ensemble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinipatchSummary {
    pub rows_per_patch: usize,
    pub features_per_patch: usize,
    pub patch_count: usize,
    pub retained: usize,
    pub skipped: usize,
}

/// Per-feature fairness and accuracy scores with full provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub method: ImportanceMethod,
    pub bias_metric: BiasMetricKind,
    pub loss_metric: LossMetricKind,
    pub model: ModelSpec,
    pub seed: u64,
    pub repetitions: usize,
    /// Bias level the scores are measured against: `h` of the baseline
    /// model for permutation/direct occlusion, the ensemble mean for
    /// minipatches.
    pub baseline_bias: f64,
    /// Loss analog of `baseline_bias`.
    pub baseline_loss: f64,
    /// Held-out accuracy of the model fitted on the train split
    /// (classification only).
    pub model_accuracy: Option<f64>,
    /// Held-out disparate-impact ratio of the same model (classification
    /// only; 1 = perfectly fair).
    pub model_fairness_dp_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minipatch: Option<MinipatchSummary>,
    pub scores: Vec<FeatureScore>,
    pub warnings: Vec<String>,
}

impl ImportanceReport {
    /// Feature entry by name.
    pub fn score_for(&self, feature: &str) -> Option<&FeatureScore> {
        self.scores.iter().find(|s| s.feature == feature)
    }
}

/// Baseline model with its metric values on the evaluation data.
pub(crate) struct Baseline {
    pub model: TrainedModel,
    pub bias: f64,
    pub loss: f64,
    pub accuracy: Option<f64>,
    pub dp_ratio: Option<f64>,
}

pub(crate) fn fit_baseline(
    train: &Dataset,
    eval: &Dataset,
    spec: &ModelSpec,
    h: BiasMetricKind,
    loss: LossMetricKind,
) -> Result<Baseline> {
    let model = crate::learners::fit(spec, train.features(), train.target())?;
    let preds = model.predict(eval.features())?;
    let bias = metrics::evaluate(MetricKind::Bias(h), eval.target(), &preds, eval.groups())?.value;
    let loss_value =
        metrics::evaluate(MetricKind::Loss(loss), eval.target(), &preds, eval.groups())?.value;
    let (accuracy, dp_ratio) = match eval.task() {
        TaskKind::Classification => {
            let err = metrics::classification_error(eval.target().values(), &preds)?;
            let ratio = metrics::dp_ratio(&preds, eval.groups())?;
            (Some(1.0 - err), Some(ratio))
        }
        TaskKind::Regression => (None, None),
    };
    Ok(Baseline {
        model,
        bias,
        loss: loss_value,
        accuracy,
        dp_ratio,
    })
}

/// Mean and population standard deviation.
pub(crate) fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
