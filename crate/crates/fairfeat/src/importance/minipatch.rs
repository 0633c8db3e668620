//! Minipatch occlusion: many small random submatrices stand in for the
//! leave-one-feature-out refits.
//!
//! Each patch trains one model on `n` sampled rows and `m` sampled
//! features and records its bias and loss on the out-of-patch rows. The
//! ensemble bias is the mean of the per-patch values; the occlusion score
//! of feature `j` is the mean over patches whose feature set excludes `j`
//! minus the overall mean. Extracting every feature's score is indicator
//! arithmetic over the stored values: no further model fits.

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rayon::prelude::*;

use ndarray::Axis;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::learners::ModelSpec;
use crate::metrics::{self, BiasMetricKind, LossMetricKind, MetricKind};
use crate::rng::{self, derive_seed};

use super::{FeatureScore, ImportanceMethod, ImportanceReport, MinipatchSummary};

/// Sampling geometry of a minipatch ensemble.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct MinipatchConfig {
    /// Rows sampled into each patch (`n < N`).
    pub rows_per_patch: usize,
    /// Features sampled into each patch (`m < M`).
    pub features_per_patch: usize,
    /// Number of patches (`K`).
    pub patch_count: usize,
    pub seed: u64,
}

impl MinipatchConfig {
    /// Geometry from dataset fractions: `n = ceil(n_frac * N)`,
    /// `m = ceil(m_frac * M)`. The benchmark runs use 0.2/0.2 and
    /// `K = 2000`.
    pub fn from_fractions(
        n_samples: usize,
        n_features: usize,
        n_frac: f64,
        m_frac: f64,
        patch_count: usize,
        seed: u64,
    ) -> Self {
        MinipatchConfig {
            rows_per_patch: (n_samples as f64 * n_frac).ceil() as usize,
            features_per_patch: (n_features as f64 * m_frac).ceil() as usize,
            patch_count,
            seed,
        }
    }

    fn validate(&self, n_samples: usize, n_features: usize) -> Result<()> {
        if self.rows_per_patch < 2 || self.rows_per_patch >= n_samples {
            return Err(Error::InvalidParameter(format!(
                "rows_per_patch must be in 2..{n_samples}, got {}",
                self.rows_per_patch
            )));
        }
        if self.features_per_patch < 1 || self.features_per_patch >= n_features {
            return Err(Error::InvalidParameter(format!(
                "features_per_patch must be in 1..{n_features}, got {}",
                self.features_per_patch
            )));
        }
        if self.patch_count < 1 {
            return Err(Error::InvalidParameter(
                "patch_count must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One fitted and evaluated patch: its sampled row and feature index
/// sets plus the out-of-patch bias and loss of its model. The model
/// itself is consumed during evaluation and not stored; the scores need
/// only what is kept here.
#[derive(Debug, Clone)]
pub struct Minipatch {
    /// Sampled row indices (size `n`).
    pub rows: Vec<u32>,
    /// Sampled feature indices, ascending (size `m`).
    pub features: Vec<u32>,
    /// Bias metric on rows outside the patch, columns of the patch.
    pub bias_oop: f64,
    /// Loss metric on the same out-of-patch rows.
    pub loss_oop: f64,
}

impl Minipatch {
    /// Whether feature `j` was sampled into this patch.
    pub fn contains_feature(&self, feature: usize) -> bool {
        self.features.binary_search(&(feature as u32)).is_ok()
    }
}

/// A fitted minipatch ensemble: retained patches plus their aggregate
/// bias and loss.
#[derive(Debug)]
pub struct MinipatchEnsemble {
    patches: Vec<Minipatch>,
    skipped: usize,
    n_features: usize,
    feature_names: Vec<String>,
    ensemble_bias: f64,
    ensemble_loss: f64,
    config: MinipatchConfig,
    bias_metric: BiasMetricKind,
    loss_metric: LossMetricKind,
    spec: ModelSpec,
}

impl MinipatchEnsemble {
    /// Assemble an ensemble from already-evaluated patches, recomputing
    /// the aggregate means. Used for analysis of stored patch values and
    /// for oracle tests of the score formulas.
    pub fn from_parts(
        patches: Vec<Minipatch>,
        feature_names: Vec<String>,
        config: MinipatchConfig,
        bias_metric: BiasMetricKind,
        loss_metric: LossMetricKind,
        spec: ModelSpec,
    ) -> Result<Self> {
        if patches.is_empty() {
            return Err(Error::EnsembleDegenerate("no patches supplied".into()));
        }
        let n_features = feature_names.len();
        for (k, patch) in patches.iter().enumerate() {
            if patch.features.iter().any(|&f| f as usize >= n_features) {
                return Err(Error::InvalidParameter(format!(
                    "patch {k} references a feature outside 0..{n_features}"
                )));
            }
        }
        let ensemble_bias = mean(patches.iter().map(|p| p.bias_oop));
        let ensemble_loss = mean(patches.iter().map(|p| p.loss_oop));
        Ok(MinipatchEnsemble {
            patches,
            skipped: 0,
            n_features,
            feature_names,
            ensemble_bias,
            ensemble_loss,
            config,
            bias_metric,
            loss_metric,
            spec,
        })
    }

    /// Retained patches in sampling order.
    pub fn patches(&self) -> &[Minipatch] {
        &self.patches
    }

    /// Patches skipped for lacking two groups out-of-patch.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    /// Mean out-of-patch bias over retained patches.
    pub fn ensemble_bias(&self) -> f64 {
        self.ensemble_bias
    }

    /// Mean out-of-patch loss over retained patches.
    pub fn ensemble_loss(&self) -> f64 {
        self.ensemble_loss
    }

    pub fn config(&self) -> &MinipatchConfig {
        &self.config
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for v in values {
        total += v;
        count += 1;
    }
    total / count as f64
}

/// Fit and evaluate `K` minipatches.
///
/// Patch `k` draws its rows and features without replacement from the
/// stream `derive_seed(config.seed, k)` and fits `spec` (reseeded per
/// patch from the same stream) on the submatrix. Its bias and loss are
/// evaluated on all rows outside the patch, restricted to the patch
/// features. Patches whose out-of-patch rows contain fewer than two
/// groups are skipped and counted. Aggregation order is patch order, so
/// results are identical for any worker count.
pub fn fit_minipatch_ensemble(
    dataset: &Dataset,
    spec: &ModelSpec,
    config: &MinipatchConfig,
    bias_metric: BiasMetricKind,
    loss_metric: LossMetricKind,
) -> Result<MinipatchEnsemble> {
    let n = dataset.n_samples();
    let m = dataset.n_features();
    config.validate(n, m)?;
    spec.validate()?;

    let evaluated: Vec<Result<Option<Minipatch>>> = (0..config.patch_count)
        .into_par_iter()
        .map(|k| fit_one_patch(dataset, spec, config, bias_metric, loss_metric, k))
        .collect();

    let mut patches = Vec::with_capacity(config.patch_count);
    let mut skipped = 0usize;
    for outcome in evaluated {
        match outcome? {
            Some(patch) => patches.push(patch),
            None => skipped += 1,
        }
    }
    if patches.is_empty() {
        return Err(Error::EnsembleDegenerate(format!(
            "all {} patches were skipped (out-of-patch rows never held 2 groups)",
            config.patch_count
        )));
    }

    let ensemble_bias = mean(patches.iter().map(|p| p.bias_oop));
    let ensemble_loss = mean(patches.iter().map(|p| p.loss_oop));
    Ok(MinipatchEnsemble {
        patches,
        skipped,
        n_features: m,
        feature_names: dataset.feature_names().to_vec(),
        ensemble_bias,
        ensemble_loss,
        config: *config,
        bias_metric,
        loss_metric,
        spec: spec.clone(),
    })
}

fn fit_one_patch(
    dataset: &Dataset,
    spec: &ModelSpec,
    config: &MinipatchConfig,
    bias_metric: BiasMetricKind,
    loss_metric: LossMetricKind,
    k: usize,
) -> Result<Option<Minipatch>> {
    let n = dataset.n_samples();
    let m = dataset.n_features();
    let patch_seed = derive_seed(config.seed, k as u64);
    let mut patch_rng = ChaCha8Rng::seed_from_u64(patch_seed);

    let rows = rng::sample_distinct(&mut patch_rng, n, config.rows_per_patch);
    let mut features = rng::sample_distinct(&mut patch_rng, m, config.features_per_patch);
    features.sort_unstable();

    let mut in_patch = vec![false; n];
    for &r in &rows {
        in_patch[r] = true;
    }
    let oop_rows: Vec<usize> = (0..n).filter(|&r| !in_patch[r]).collect();
    let oop_groups = dataset.groups().select(&oop_rows);
    if oop_groups.present_groups() < 2 {
        return Ok(None);
    }

    let x_patch = dataset
        .features()
        .select(Axis(0), &rows)
        .select(Axis(1), &features);
    let y_patch = dataset.target().select(&rows);
    let patch_spec = spec.clone().with_seed(derive_seed(patch_seed, 1));
    let model = crate::learners::fit(&patch_spec, &x_patch, &y_patch)?;

    let x_oop = dataset
        .features()
        .select(Axis(0), &oop_rows)
        .select(Axis(1), &features);
    let y_oop = dataset.target().select(&oop_rows);
    let preds = model.predict(&x_oop)?;
    let bias_oop =
        metrics::evaluate(MetricKind::Bias(bias_metric), &y_oop, &preds, &oop_groups)?.value;
    let loss_oop =
        metrics::evaluate(MetricKind::Loss(loss_metric), &y_oop, &preds, &oop_groups)?.value;

    Ok(Some(Minipatch {
        rows: rows.into_iter().map(|r| r as u32).collect(),
        features: features.into_iter().map(|f| f as u32).collect(),
        bias_oop,
        loss_oop,
    }))
}

/// Mean out-of-patch bias over retained patches whose feature set
/// excludes `feature`: the indicator-weighted mean.
pub fn mp_bias_excluding(ensemble: &MinipatchEnsemble, feature: usize) -> Result<f64> {
    excluding_mean(ensemble, feature, |p| p.bias_oop)
}

/// Loss analog of [`mp_bias_excluding`].
pub fn mp_loss_excluding(ensemble: &MinipatchEnsemble, feature: usize) -> Result<f64> {
    excluding_mean(ensemble, feature, |p| p.loss_oop)
}

fn excluding_mean(
    ensemble: &MinipatchEnsemble,
    feature: usize,
    value: impl Fn(&Minipatch) -> f64,
) -> Result<f64> {
    if feature >= ensemble.n_features {
        return Err(Error::FeatureIndex {
            index: feature,
            n_features: ensemble.n_features,
        });
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for patch in &ensemble.patches {
        if !patch.contains_feature(feature) {
            total += value(patch);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::ScoreUndefined {
            feature: ensemble.feature_names[feature].clone(),
            reason: "every retained patch contains this feature; raise the patch count".into(),
        });
    }
    Ok(total / count as f64)
}

/// Read every feature's occlusion scores out of a fitted ensemble.
///
/// Pure indicator arithmetic over the stored per-patch values; performs
/// no model fitting. Features contained in every retained patch are
/// flagged instead of scored.
pub fn mp_occlusion_scores(ensemble: &MinipatchEnsemble) -> Result<ImportanceReport> {
    let mut scores = Vec::with_capacity(ensemble.n_features);
    let mut flagged_count = 0usize;
    for j in 0..ensemble.n_features {
        match (
            mp_bias_excluding(ensemble, j),
            mp_loss_excluding(ensemble, j),
        ) {
            (Ok(bias_excl), Ok(loss_excl)) => scores.push(FeatureScore {
                feature: ensemble.feature_names[j].clone(),
                fairness: Some(bias_excl - ensemble.ensemble_bias),
                accuracy: Some(loss_excl - ensemble.ensemble_loss),
                flagged: false,
                stddev: None,
            }),
            (Err(Error::ScoreUndefined { .. }), _) | (_, Err(Error::ScoreUndefined { .. })) => {
                flagged_count += 1;
                scores.push(FeatureScore {
                    feature: ensemble.feature_names[j].clone(),
                    fairness: None,
                    accuracy: None,
                    flagged: true,
                    stddev: None,
                });
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }

    let mut warnings = Vec::new();
    if ensemble.skipped > 0 {
        warnings.push(format!(
            "{} of {} patches skipped: out-of-patch rows held fewer than 2 groups",
            ensemble.skipped, ensemble.config.patch_count
        ));
    }
    if flagged_count > 0 {
        warnings.push(format!(
            "{flagged_count} feature(s) undefined: contained in every retained patch; raise the patch count"
        ));
    }

    Ok(ImportanceReport {
        method: ImportanceMethod::OcclusionMinipatch,
        bias_metric: ensemble.bias_metric,
        loss_metric: ensemble.loss_metric,
        model: ensemble.spec.clone(),
        seed: ensemble.config.seed,
        repetitions: 1,
        baseline_bias: ensemble.ensemble_bias,
        baseline_loss: ensemble.ensemble_loss,
        model_accuracy: None,
        model_fairness_dp_ratio: None,
        minipatch: Some(MinipatchSummary {
            rows_per_patch: ensemble.config.rows_per_patch,
            features_per_patch: ensemble.config.features_per_patch,
            patch_count: ensemble.config.patch_count,
            retained: ensemble.patches.len(),
            skipped: ensemble.skipped,
        }),
        scores,
        warnings,
    })
}
