//! Direct occlusion importance: refit without one feature and compare.

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::learners::ModelSpec;
use crate::metrics::{self, BiasMetricKind, LossMetricKind, MetricKind};

use super::{fit_baseline, Baseline, FeatureScore, ImportanceMethod, ImportanceReport};

/// Bias and loss differences for dropping one feature.
fn drop_scores(
    train: &Dataset,
    eval: &Dataset,
    spec: &ModelSpec,
    h: BiasMetricKind,
    loss: LossMetricKind,
    feature: usize,
    baseline: &Baseline,
) -> Result<(f64, f64)> {
    let reduced_train = train.without_feature(feature)?;
    let reduced_eval = eval.without_feature(feature)?;
    let model = crate::learners::fit(spec, reduced_train.features(), reduced_train.target())?;
    let preds = model.predict(reduced_eval.features())?;
    let bias = metrics::evaluate(MetricKind::Bias(h), eval.target(), &preds, eval.groups())?.value;
    let loss_value =
        metrics::evaluate(MetricKind::Loss(loss), eval.target(), &preds, eval.groups())?.value;
    Ok((bias - baseline.bias, loss_value - baseline.loss))
}

/// Occlusion importance of one feature for the bias metric `h`:
/// `h(y, f_without(X_without), z) - h(y, f(X), z)`.
pub fn occl_importance_direct(
    train: &Dataset,
    eval: &Dataset,
    spec: &ModelSpec,
    h: BiasMetricKind,
    feature: usize,
) -> Result<f64> {
    if feature >= train.n_features() {
        return Err(Error::FeatureIndex {
            index: feature,
            n_features: train.n_features(),
        });
    }
    let loss = LossMetricKind::default_for(train.task());
    let baseline = fit_baseline(train, eval, spec, h, loss)?;
    let (bias_diff, _) = drop_scores(train, eval, spec, h, loss, feature, &baseline)?;
    Ok(bias_diff)
}

/// Occlusion sweep over every feature: one baseline fit plus one reduced
/// fit per feature.
pub fn occl_importance_all(
    train: &Dataset,
    eval: &Dataset,
    spec: &ModelSpec,
    h: BiasMetricKind,
    loss: LossMetricKind,
    seed: u64,
) -> Result<ImportanceReport> {
    let baseline = fit_baseline(train, eval, spec, h, loss)?;
    let outcomes: Vec<Result<(f64, f64)>> = (0..train.n_features())
        .into_par_iter()
        .map(|j| drop_scores(train, eval, spec, h, loss, j, &baseline))
        .collect();

    let mut scores = Vec::with_capacity(outcomes.len());
    for (j, outcome) in outcomes.into_iter().enumerate() {
        let (fairness, accuracy) = outcome?;
        scores.push(FeatureScore {
            feature: train.feature_names()[j].clone(),
            fairness: Some(fairness),
            accuracy: Some(accuracy),
            flagged: false,
            stddev: None,
        });
    }

    Ok(ImportanceReport {
        method: ImportanceMethod::OcclusionDirect,
        bias_metric: h,
        loss_metric: loss,
        model: spec.clone(),
        seed,
        repetitions: 1,
        baseline_bias: baseline.bias,
        baseline_loss: baseline.loss,
        model_accuracy: baseline.accuracy,
        model_fairness_dp_ratio: baseline.dp_ratio,
        minipatch: None,
        scores,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, split, Dataset, GroupLabels, Target, TaskKind};
    use ndarray::Array2;

    /// Features 0 and 1 are identical; a deterministic tree falls back to
    /// the surviving copy, so dropping one of them changes nothing.
    #[test]
    fn duplicate_column_scores_zero_with_tree() {
        let n = 60;
        let mut x = Array2::zeros((n, 3));
        let mut y = Vec::with_capacity(n);
        let mut g = Vec::with_capacity(n);
        for i in 0..n {
            let v = i as f64;
            x[[i, 0]] = v;
            x[[i, 1]] = v;
            x[[i, 2]] = (i % 7) as f64;
            y.push(f64::from(u8::from(i >= n / 2)));
            g.push((i % 2) as u32 + 1);
        }
        let ds = Dataset::new(
            x,
            vec!["dup_a".into(), "dup_b".into(), "noise".into()],
            Target::classification(y).unwrap(),
            GroupLabels::new(g, 2).unwrap(),
            "test",
        )
        .unwrap();
        let spec = ModelSpec::decision_tree(0);
        let score = occl_importance_direct(
            &ds,
            &ds,
            &spec,
            BiasMetricKind::DpComplementRatio,
            0,
        )
        .unwrap();
        assert_eq!(score, 0.0);
    }

    #[test]
    fn sweep_covers_every_feature_once() {
        let (ds, _) = generate_synthetic(TaskKind::Classification, 100, 5, 2).unwrap();
        let pair = split(&ds, 0.3, 4).unwrap();
        let spec = ModelSpec::RandomForest {
            trees: 10,
            max_depth: None,
            min_leaf: None,
            max_features: None,
            bootstrap: true,
            seed: Some(1),
        };
        let report = occl_importance_all(
            &pair.train,
            &pair.test,
            &spec,
            BiasMetricKind::DpComplementRatio,
            LossMetricKind::ClassificationError,
            0,
        )
        .unwrap();
        assert_eq!(report.scores.len(), 5);
        let names: Vec<&str> = report.scores.iter().map(|s| s.feature.as_str()).collect();
        assert_eq!(names, ds.feature_names().iter().map(String::as_str).collect::<Vec<_>>());
        assert!(report.model_accuracy.is_some());
        assert!(report.model_fairness_dp_ratio.is_some());
    }
}
