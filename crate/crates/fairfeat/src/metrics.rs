//! Bias and loss metrics.
//!
//! All bias metrics share one orientation: 0 is perfectly fair and larger
//! is more biased. Losses likewise: 0 is perfect, larger is worse. Every
//! importance score in this crate is a difference of two such values, so
//! the orientation here decides the sign convention of the whole toolkit.

use serde::{Deserialize, Serialize};

use crate::dataset::{GroupLabels, Target, TaskKind};
use crate::error::{Error, Result};

/// Bias metrics (0 = perfectly fair, larger = more biased).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasMetricKind {
    /// Max minus min group positive-prediction rate.
    DpDifference,
    /// One minus the disparate-impact ratio (min/max group rate).
    DpComplementRatio,
    /// Largest absolute gap between group mean predictions.
    RegressionDp,
}

impl BiasMetricKind {
    /// Default bias metric for a task.
    pub fn default_for(task: TaskKind) -> Self {
        match task {
            TaskKind::Classification => BiasMetricKind::DpComplementRatio,
            TaskKind::Regression => BiasMetricKind::RegressionDp,
        }
    }

    /// The task this metric applies to.
    pub fn task(&self) -> TaskKind {
        match self {
            BiasMetricKind::DpDifference | BiasMetricKind::DpComplementRatio => {
                TaskKind::Classification
            }
            BiasMetricKind::RegressionDp => TaskKind::Regression,
        }
    }

    /// CLI name.
    pub fn name(&self) -> &'static str {
        match self {
            BiasMetricKind::DpDifference => "dp_diff",
            BiasMetricKind::DpComplementRatio => "dp_comp",
            BiasMetricKind::RegressionDp => "reg_dp",
        }
    }

    /// Parse a CLI name.
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "dp_diff" => Ok(BiasMetricKind::DpDifference),
            "dp_comp" => Ok(BiasMetricKind::DpComplementRatio),
            "reg_dp" => Ok(BiasMetricKind::RegressionDp),
            "dp_ratio" => Err(Error::Incompatible(
                "dp_ratio is fairness-oriented (1 = fair); use dp_comp as the bias metric"
                    .into(),
            )),
            other => Err(Error::InvalidParameter(format!(
                "unknown bias metric {other:?} (expected dp_diff, dp_comp, or reg_dp)"
            ))),
        }
    }
}

/// Performance losses (0 = perfect, larger = worse).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMetricKind {
    ClassificationError,
    Mse,
}

impl LossMetricKind {
    pub fn default_for(task: TaskKind) -> Self {
        match task {
            TaskKind::Classification => LossMetricKind::ClassificationError,
            TaskKind::Regression => LossMetricKind::Mse,
        }
    }

    pub fn task(&self) -> TaskKind {
        match self {
            LossMetricKind::ClassificationError => TaskKind::Classification,
            LossMetricKind::Mse => TaskKind::Regression,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossMetricKind::ClassificationError => "error",
            LossMetricKind::Mse => "mse",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "error" => Ok(LossMetricKind::ClassificationError),
            "mse" => Ok(LossMetricKind::Mse),
            other => Err(Error::InvalidParameter(format!(
                "unknown loss metric {other:?} (expected error or mse)"
            ))),
        }
    }
}

/// Either kind of metric, for the shared evaluation surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Bias(BiasMetricKind),
    Loss(LossMetricKind),
}

/// One metric evaluation with its provenance.
#[derive(Debug, Clone, Serialize)]
pub struct MetricValue {
    pub value: f64,
    pub metric: MetricKind,
    pub n_evaluated: usize,
    pub groups_present: usize,
}

/// Positive-prediction rate per group present among the evaluated rows.
/// Absent groups are ignored; fewer than 2 present groups is an error.
fn group_rates(y_hat: &[f64], z: &GroupLabels) -> Result<Vec<f64>> {
    if y_hat.len() != z.len() {
        return Err(Error::LengthMismatch {
            left: y_hat.len(),
            right: z.len(),
        });
    }
    let g = z.group_count() as usize;
    let mut sums = vec![0.0f64; g + 1];
    let mut counts = vec![0usize; g + 1];
    for (value, &group) in y_hat.iter().zip(z.values()) {
        sums[group as usize] += value;
        counts[group as usize] += 1;
    }
    let rates: Vec<f64> = (1..=g)
        .filter(|&i| counts[i] > 0)
        .map(|i| sums[i] / counts[i] as f64)
        .collect();
    if rates.len() < 2 {
        return Err(Error::GroupCount {
            present: rates.len(),
        });
    }
    Ok(rates)
}

/// Demographic-parity difference: max group rate minus min group rate.
pub fn dp_difference(y_hat: &[f64], z: &GroupLabels) -> Result<f64> {
    let rates = group_rates(y_hat, z)?;
    let max = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(max - min)
}

/// Disparate-impact ratio: min group rate over max group rate.
///
/// When every rate is 0 (no positive predictions anywhere) the outcome is
/// group-symmetric and the ratio is defined as 1.
pub fn dp_ratio(y_hat: &[f64], z: &GroupLabels) -> Result<f64> {
    let rates = group_rates(y_hat, z)?;
    let max = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        return Ok(1.0);
    }
    Ok(min / max)
}

/// Bias-oriented form of the disparate-impact ratio: `1 - dp_ratio`.
pub fn dp_complement_ratio(y_hat: &[f64], z: &GroupLabels) -> Result<f64> {
    Ok(1.0 - dp_ratio(y_hat, z)?)
}

/// Demographic parity for real-valued predictions: the largest absolute
/// difference between group mean predictions.
pub fn regression_dp(y_hat: &[f64], z: &GroupLabels) -> Result<f64> {
    let means = group_rates(y_hat, z)?;
    let max = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = means.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(max - min)
}

/// Fraction of mismatched labels.
pub fn classification_error(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: y_hat.len(),
        });
    }
    let wrong = y.iter().zip(y_hat).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / y.len() as f64)
}

/// Mean squared residual.
pub fn mse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: y_hat.len(),
        });
    }
    let total: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(total / y.len() as f64)
}

/// Evaluate a metric through the shared `(y, y_hat, z)` surface.
///
/// Bias metrics ignore `y`; losses ignore `z`. The metric must match the
/// target's task.
pub fn evaluate(
    metric: MetricKind,
    y: &Target,
    y_hat: &[f64],
    z: &GroupLabels,
) -> Result<MetricValue> {
    if y.len() != y_hat.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: y_hat.len(),
        });
    }
    let metric_task = match metric {
        MetricKind::Bias(b) => b.task(),
        MetricKind::Loss(l) => l.task(),
    };
    if metric_task != y.kind() {
        return Err(Error::Incompatible(format!(
            "metric {metric:?} applies to {metric_task} targets, got {}",
            y.kind()
        )));
    }
    let value = match metric {
        MetricKind::Bias(BiasMetricKind::DpDifference) => dp_difference(y_hat, z)?,
        MetricKind::Bias(BiasMetricKind::DpComplementRatio) => dp_complement_ratio(y_hat, z)?,
        MetricKind::Bias(BiasMetricKind::RegressionDp) => regression_dp(y_hat, z)?,
        MetricKind::Loss(LossMetricKind::ClassificationError) => {
            classification_error(y.values(), y_hat)?
        }
        MetricKind::Loss(LossMetricKind::Mse) => mse(y.values(), y_hat)?,
    };
    Ok(MetricValue {
        value,
        metric,
        n_evaluated: y_hat.len(),
        groups_present: z.present_groups(),
    })
}
