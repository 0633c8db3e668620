//! Permutation-based importance.
//!
//! The score for feature `j` is `h(y, f_perm(X_perm), z) - h(y, f(X), z)`
//! where `f_perm` is retrained on the training matrix with column `j`
//! shuffled, and the evaluation matrix gets its own independent shuffle of
//! column `j`. Averaged over seeded repetitions.

use rayon::prelude::*;

use crate::dataset::{apply_column_permutation, permute_feature, Dataset};
use crate::error::{Error, Result};
use crate::learners::ModelSpec;
use crate::metrics::{self, BiasMetricKind, LossMetricKind, MetricKind};
use crate::rng::derive_seed;

use super::{fit_baseline, mean_and_std, Baseline, FeatureScore, ImportanceMethod, ImportanceReport};

/// How the column reorderings are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermutationStrategy {
    /// Uniformly random permutations from derived seeds.
    Seeded,
    /// The identity permutation; a test hook that must score exactly 0
    /// with any deterministic learner.
    Identity,
}

/// Repetition and refit policy for the permutation method.
#[derive(Debug, Clone, Copy)]
pub struct PermOptions {
    /// Repetitions averaged per feature (at least 1).
    pub repetitions: usize,
    /// Retrain on the permuted training matrix. Disabling this gives the
    /// classic evaluate-only variant, which answers a different question
    /// about the already-fitted model.
    pub refit: bool,
    pub strategy: PermutationStrategy,
}

impl Default for PermOptions {
    fn default() -> Self {
        PermOptions {
            repetitions: 10,
            refit: true,
            strategy: PermutationStrategy::Seeded,
        }
    }
}

impl PermOptions {
    fn validate(&self) -> Result<()> {
        if self.repetitions < 1 {
            return Err(Error::InvalidParameter(
                "permutation repetitions must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

struct FeatureOutcome {
    fairness: f64,
    fairness_std: f64,
    accuracy: f64,
}

/// Per-repetition bias/loss differences for one feature against a fitted
/// baseline. Train and eval permutations use seeds derived from the
/// feature stream `derive_seed(seed, j)`: repetition `r` draws the train
/// permutation from stream `2r` and the eval permutation from `2r + 1`.
fn feature_scores(
    train: &Dataset,
    eval: &Dataset,
    spec: &ModelSpec,
    h: BiasMetricKind,
    loss: LossMetricKind,
    feature: usize,
    opts: &PermOptions,
    seed: u64,
    baseline: &Baseline,
) -> Result<FeatureOutcome> {
    let feature_seed = derive_seed(seed, feature as u64);
    let mut bias_diffs = Vec::with_capacity(opts.repetitions);
    let mut loss_diffs = Vec::with_capacity(opts.repetitions);

    for rep in 0..opts.repetitions {
        let train_seed = derive_seed(feature_seed, 2 * rep as u64);
        let eval_seed = derive_seed(feature_seed, 2 * rep as u64 + 1);

        let permuted_model;
        let model = if opts.refit {
            let train_x = match opts.strategy {
                PermutationStrategy::Seeded => {
                    permute_feature(train.features(), feature, train_seed)?
                }
                PermutationStrategy::Identity => {
                    let identity: Vec<usize> = (0..train.n_samples()).collect();
                    apply_column_permutation(train.features(), feature, &identity)
                }
            };
            permuted_model = crate::learners::fit(spec, &train_x, train.target())?;
            &permuted_model
        } else {
            &baseline.model
        };

        let eval_x = match opts.strategy {
            PermutationStrategy::Seeded => permute_feature(eval.features(), feature, eval_seed)?,
            PermutationStrategy::Identity => {
                let identity: Vec<usize> = (0..eval.n_samples()).collect();
                apply_column_permutation(eval.features(), feature, &identity)
            }
        };
        let preds = model.predict(&eval_x)?;
        let bias =
            metrics::evaluate(MetricKind::Bias(h), eval.target(), &preds, eval.groups())?.value;
        let loss_value =
            metrics::evaluate(MetricKind::Loss(loss), eval.target(), &preds, eval.groups())?.value;
        bias_diffs.push(bias - baseline.bias);
        loss_diffs.push(loss_value - baseline.loss);
    }

    let (fairness, fairness_std) = mean_and_std(&bias_diffs);
    let (accuracy, _) = mean_and_std(&loss_diffs);
    Ok(FeatureOutcome {
        fairness,
        fairness_std,
        accuracy,
    })
}

/// Permutation importance of a single feature for the bias metric `h`.
///
/// Fits the baseline once, then refits on the permuted training matrix
/// for each repetition and returns the mean bias difference.
pub fn perm_importance(
    train: &Dataset,
    eval: &Dataset,
    spec: &ModelSpec,
    h: BiasMetricKind,
    feature: usize,
    repetitions: usize,
    seed: u64,
) -> Result<f64> {
    let opts = PermOptions {
        repetitions,
        ..PermOptions::default()
    };
    perm_importance_with(train, eval, spec, h, feature, &opts, seed)
}

/// [`perm_importance`] with explicit options (refit policy, strategy).
pub fn perm_importance_with(
    train: &Dataset,
    eval: &Dataset,
    spec: &ModelSpec,
    h: BiasMetricKind,
    feature: usize,
    opts: &PermOptions,
    seed: u64,
) -> Result<f64> {
    opts.validate()?;
    check_feature(train, feature)?;
    let loss = LossMetricKind::default_for(train.task());
    let baseline = fit_baseline(train, eval, spec, h, loss)?;
    let outcome = feature_scores(train, eval, spec, h, loss, feature, opts, seed, &baseline)?;
    Ok(outcome.fairness)
}

/// Permutation sweep over every feature, producing fairness scores under
/// `h` and accuracy scores under `loss` from the same refits.
pub fn perm_importance_all(
    train: &Dataset,
    eval: &Dataset,
    spec: &ModelSpec,
    h: BiasMetricKind,
    loss: LossMetricKind,
    opts: &PermOptions,
    seed: u64,
) -> Result<ImportanceReport> {
    opts.validate()?;
    let baseline = fit_baseline(train, eval, spec, h, loss)?;

    let outcomes: Vec<Result<FeatureOutcome>> = (0..train.n_features())
        .into_par_iter()
        .map(|j| feature_scores(train, eval, spec, h, loss, j, opts, seed, &baseline))
        .collect();

    let mut scores = Vec::with_capacity(outcomes.len());
    for (j, outcome) in outcomes.into_iter().enumerate() {
        let outcome = outcome?;
        scores.push(FeatureScore {
            feature: train.feature_names()[j].clone(),
            fairness: Some(outcome.fairness),
            accuracy: Some(outcome.accuracy),
            flagged: false,
            stddev: Some(outcome.fairness_std),
        });
    }

    Ok(ImportanceReport {
        method: ImportanceMethod::Permutation,
        bias_metric: h,
        loss_metric: loss,
        model: spec.clone(),
        seed,
        repetitions: opts.repetitions,
        baseline_bias: baseline.bias,
        baseline_loss: baseline.loss,
        model_accuracy: baseline.accuracy,
        model_fairness_dp_ratio: baseline.dp_ratio,
        minipatch: None,
        scores,
        warnings: Vec::new(),
    })
}

fn check_feature(ds: &Dataset, feature: usize) -> Result<()> {
    if feature >= ds.n_features() {
        return Err(Error::FeatureIndex {
            index: feature,
            n_features: ds.n_features(),
        });
    }
    Ok(())
}
