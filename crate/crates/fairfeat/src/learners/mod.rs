//! Built-in learners behind one model-agnostic contract.
//!
//! Four learner kinds cover the benchmark tasks with zero external ML
//! dependencies: CART decision trees, random forests, logistic regression,
//! and ridge-jittered linear regression. Fitting is deterministic given
//! `(spec, X, y)` no matter how many worker threads are active.

mod forest;
mod linear;
mod tree;

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::{Target, TaskKind};
use crate::error::{Error, Result};

pub(crate) use tree::TreeConfig;

/// Process-wide count of completed model fits.
///
/// Instrumentation for cost accounting: score extraction from an already
/// fitted ensemble must not move this counter.
static FIT_COUNT: AtomicU64 = AtomicU64::new(0);

/// Current value of the fit counter.
pub fn fit_count() -> u64 {
    FIT_COUNT.load(Ordering::Relaxed)
}

fn record_fit() {
    FIT_COUNT.fetch_add(1, Ordering::Relaxed);
}

fn default_trees() -> usize {
    100
}

fn default_bootstrap() -> bool {
    true
}

fn default_learning_rate() -> f64 {
    0.1
}

fn default_max_iter() -> usize {
    1000
}

fn default_tolerance() -> f64 {
    1e-6
}

fn default_ridge() -> f64 {
    1e-8
}

/// Declarative learner configuration.
///
/// The JSON form is tagged by `kind`, e.g.
/// `{"kind": "random_forest", "trees": 100, "seed": 7}`. Omitted
/// hyperparameters take task-dependent defaults resolved at fit time:
/// forests use `min_leaf` 1 (classification) / 5 (regression) and a
/// per-split feature subsample of ceil(sqrt(M)) / ceil(M/3).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    DecisionTree {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_depth: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min_leaf: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_features: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    RandomForest {
        #[serde(default = "default_trees")]
        trees: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_depth: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min_leaf: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_features: Option<usize>,
        #[serde(default = "default_bootstrap")]
        bootstrap: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    LogisticRegression {
        #[serde(default = "default_learning_rate")]
        learning_rate: f64,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
    LinearRegression {
        #[serde(default = "default_ridge")]
        ridge: f64,
    },
}

impl ModelSpec {
    /// Random forest with all defaults.
    pub fn random_forest(seed: u64) -> Self {
        ModelSpec::RandomForest {
            trees: default_trees(),
            max_depth: None,
            min_leaf: None,
            max_features: None,
            bootstrap: default_bootstrap(),
            seed: Some(seed),
        }
    }

    /// Single unrestricted decision tree.
    pub fn decision_tree(seed: u64) -> Self {
        ModelSpec::DecisionTree {
            max_depth: None,
            min_leaf: None,
            max_features: None,
            seed: Some(seed),
        }
    }

    /// Parse a spec from JSON, validating hyperparameters.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ModelSpec = serde_json::from_str(text).map_err(|e| Error::Document {
            kind: "model",
            reason: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    /// Check hyperparameter ranges.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self {
            ModelSpec::DecisionTree {
                max_depth,
                min_leaf,
                max_features,
                ..
            } => {
                if matches!(max_depth, Some(0)) {
                    return bad("tree max_depth must be at least 1".into());
                }
                if matches!(min_leaf, Some(0)) {
                    return bad("tree min_leaf must be at least 1".into());
                }
                if matches!(max_features, Some(0)) {
                    return bad("tree max_features must be at least 1".into());
                }
            }
            ModelSpec::RandomForest {
                trees,
                max_depth,
                min_leaf,
                max_features,
                ..
            } => {
                if *trees == 0 {
                    return bad("forest needs at least 1 tree".into());
                }
                if matches!(max_depth, Some(0)) {
                    return bad("forest max_depth must be at least 1".into());
                }
                if matches!(min_leaf, Some(0)) {
                    return bad("forest min_leaf must be at least 1".into());
                }
                if matches!(max_features, Some(0)) {
                    return bad("forest max_features must be at least 1".into());
                }
            }
            ModelSpec::LogisticRegression {
                learning_rate,
                max_iter,
                tolerance,
            } => {
                if !(*learning_rate > 0.0) {
                    return bad(format!("learning_rate must be positive, got {learning_rate}"));
                }
                if *max_iter == 0 {
                    return bad("max_iter must be at least 1".into());
                }
                if !(*tolerance > 0.0) {
                    return bad(format!("tolerance must be positive, got {tolerance}"));
                }
            }
            ModelSpec::LinearRegression { ridge } => {
                if !(*ridge >= 0.0) {
                    return bad(format!("ridge must be non-negative, got {ridge}"));
                }
            }
        }
        Ok(())
    }

    /// Seed used by the seeded kinds, if set.
    pub fn seed(&self) -> Option<u64> {
        match self {
            ModelSpec::DecisionTree { seed, .. } | ModelSpec::RandomForest { seed, .. } => *seed,
            _ => None,
        }
    }

    /// Inject a seed where the spec left it unset.
    pub fn with_default_seed(mut self, default: u64) -> Self {
        match &mut self {
            ModelSpec::DecisionTree { seed, .. } | ModelSpec::RandomForest { seed, .. } => {
                if seed.is_none() {
                    *seed = Some(default);
                }
            }
            _ => {}
        }
        self
    }

    /// Replace the seed of the seeded kinds (no-op for deterministic
    /// kinds). Minipatch fitting reseeds each patch model this way.
    pub fn with_seed(mut self, new_seed: u64) -> Self {
        match &mut self {
            ModelSpec::DecisionTree { seed, .. } | ModelSpec::RandomForest { seed, .. } => {
                *seed = Some(new_seed);
            }
            _ => {}
        }
        self
    }

    fn check_task(&self, task: TaskKind) -> Result<()> {
        match (self, task) {
            (ModelSpec::LogisticRegression { .. }, TaskKind::Regression) => {
                Err(Error::Incompatible(
                    "logistic regression requires a classification target".into(),
                ))
            }
            (ModelSpec::LinearRegression { .. }, TaskKind::Classification) => {
                Err(Error::Incompatible(
                    "linear regression requires a regression target".into(),
                ))
            }
            _ => Ok(()),
        }
    }
}

/// Per-split feature subsample width when the spec leaves it unset.
fn default_subsample(task: TaskKind, n_features: usize) -> usize {
    let m = n_features as f64;
    let width = match task {
        TaskKind::Classification => m.sqrt().ceil(),
        TaskKind::Regression => (m / 3.0).ceil(),
    };
    (width as usize).clamp(1, n_features)
}

/// Default minimum leaf size when the spec leaves it unset.
fn default_min_leaf(task: TaskKind) -> usize {
    match task {
        TaskKind::Classification => 1,
        TaskKind::Regression => 5,
    }
}

#[derive(Debug)]
enum FittedInner {
    Tree(tree::Tree),
    Forest(forest::Forest),
    Logistic(linear::LogisticModel),
    Linear(linear::LinearModel),
}

/// An immutable fitted model.
#[derive(Debug)]
pub struct TrainedModel {
    spec: ModelSpec,
    task: TaskKind,
    feature_count: usize,
    inner: FittedInner,
}

impl TrainedModel {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    fn check_shape(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.feature_count {
            return Err(Error::ShapeMismatch {
                expected: self.feature_count,
                got: x.ncols(),
            });
        }
        Ok(())
    }

    /// Predict hard labels (classification) or real values (regression).
    ///
    /// Forest classification is a majority vote with exact ties going to
    /// label 1; forest regression is the mean over trees.
    pub fn predict(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        self.check_shape(x)?;
        let out = match &self.inner {
            FittedInner::Tree(t) => match self.task {
                TaskKind::Classification => x
                    .rows()
                    .into_iter()
                    .map(|row| threshold(t.predict_score(row)))
                    .collect(),
                TaskKind::Regression => {
                    x.rows().into_iter().map(|row| t.predict_value(row)).collect()
                }
            },
            FittedInner::Forest(f) => match self.task {
                TaskKind::Classification => x
                    .rows()
                    .into_iter()
                    .map(|row| threshold(f.vote_fraction(row)))
                    .collect(),
                TaskKind::Regression => {
                    x.rows().into_iter().map(|row| f.mean_value(row)).collect()
                }
            },
            FittedInner::Logistic(m) => x
                .rows()
                .into_iter()
                .map(|row| threshold(m.score(row)))
                .collect(),
            FittedInner::Linear(m) => x.rows().into_iter().map(|row| m.value(row)).collect(),
        };
        Ok(out)
    }

    /// Class-1 scores in `[0, 1]` for classification models.
    ///
    /// Thresholding at 0.5 (ties up) reproduces [`TrainedModel::predict`]
    /// exactly: trees report the positive fraction of the leaf, forests
    /// the fraction of trees voting 1, logistic models the sigmoid.
    pub fn predict_score(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        if self.task != TaskKind::Classification {
            return Err(Error::Incompatible(
                "predict_score requires a classification model".into(),
            ));
        }
        self.check_shape(x)?;
        let out = match &self.inner {
            FittedInner::Tree(t) => x
                .rows()
                .into_iter()
                .map(|row| t.predict_score(row))
                .collect(),
            FittedInner::Forest(f) => x
                .rows()
                .into_iter()
                .map(|row| f.vote_fraction(row))
                .collect(),
            FittedInner::Logistic(m) => x.rows().into_iter().map(|row| m.score(row)).collect(),
            FittedInner::Linear(_) => unreachable!("linear models are regression-only"),
        };
        Ok(out)
    }
}

fn threshold(score: f64) -> f64 {
    if score >= 0.5 {
        1.0
    } else {
        0.0
    }
}

/// Fit a spec on `(x, y)`.
///
/// Deterministic given `(spec, x, y)` regardless of thread count; forest
/// trees train concurrently on derived per-tree seeds.
pub fn fit(spec: &ModelSpec, x: &Array2<f64>, y: &Target) -> Result<TrainedModel> {
    spec.validate()?;
    let task = y.kind();
    spec.check_task(task)?;
    let (n, m) = x.dim();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 training rows, got {n}"
        )));
    }
    if y.len() != n {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: n,
        });
    }
    if m == 0 {
        return Err(Error::InvalidParameter("empty feature matrix".into()));
    }

    let inner = match spec {
        ModelSpec::DecisionTree {
            max_depth,
            min_leaf,
            max_features,
            seed,
        } => {
            if let Some(k) = max_features {
                if *k > m {
                    return Err(Error::InvalidParameter(format!(
                        "max_features {k} exceeds {m} features"
                    )));
                }
            }
            let cfg = TreeConfig {
                task,
                max_depth: *max_depth,
                min_leaf: min_leaf.unwrap_or(default_min_leaf(task)),
                max_features: *max_features,
            };
            FittedInner::Tree(tree::Tree::fit_all_rows(
                x,
                y.values(),
                &cfg,
                seed.unwrap_or(0),
            ))
        }
        ModelSpec::RandomForest {
            trees,
            max_depth,
            min_leaf,
            max_features,
            bootstrap,
            seed,
        } => {
            if let Some(k) = max_features {
                if *k > m {
                    return Err(Error::InvalidParameter(format!(
                        "max_features {k} exceeds {m} features"
                    )));
                }
            }
            let cfg = TreeConfig {
                task,
                max_depth: *max_depth,
                min_leaf: min_leaf.unwrap_or(default_min_leaf(task)),
                max_features: Some(max_features.unwrap_or(default_subsample(task, m))),
            };
            FittedInner::Forest(forest::Forest::fit(
                x,
                y.values(),
                &cfg,
                *trees,
                *bootstrap,
                seed.unwrap_or(0),
            ))
        }
        ModelSpec::LogisticRegression {
            learning_rate,
            max_iter,
            tolerance,
        } => FittedInner::Logistic(linear::LogisticModel::fit(
            x,
            y.values(),
            *learning_rate,
            *max_iter,
            *tolerance,
        )),
        ModelSpec::LinearRegression { ridge } => {
            FittedInner::Linear(linear::LinearModel::fit(x, y.values(), *ridge)?)
        }
    };

    record_fit();
    Ok(TrainedModel {
        spec: spec.clone(),
        task,
        feature_count: m,
        inner,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, TaskKind};
    use crate::rng::derive_seed;
    use ndarray::Array2;

    fn line_data(n: usize) -> (Array2<f64>, Target) {
        // y = 2 x + 1, noise-free
        let mut x = Array2::zeros((n, 1));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let v = i as f64 / 10.0;
            x[[i, 0]] = v;
            y.push(2.0 * v + 1.0);
        }
        (x, Target::regression(y).unwrap())
    }

    fn separable(n: usize) -> (Array2<f64>, Target) {
        let mut x = Array2::zeros((n, 2));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            x[[i, 0]] = i as f64;
            x[[i, 1]] = (i % 5) as f64;
            y.push(f64::from(u8::from(i >= n / 2)));
        }
        (x, Target::classification(y).unwrap())
    }

    #[test]
    fn linear_regression_recovers_exact_line() {
        let (x, y) = line_data(50);
        let model = fit(&ModelSpec::LinearRegression { ridge: 1e-8 }, &x, &y).unwrap();
        let probe = ndarray::array![[0.0], [1.0]];
        let out = model.predict(&probe).unwrap();
        let intercept = out[0];
        let slope = out[1] - out[0];
        assert!((intercept - 1.0).abs() < 1e-8, "intercept {intercept}");
        assert!((slope - 2.0).abs() < 1e-8, "slope {slope}");
    }

    #[test]
    fn tree_reaches_zero_training_error_on_separable_data() {
        let (x, y) = separable(40);
        let model = fit(&ModelSpec::decision_tree(0), &x, &y).unwrap();
        let preds = model.predict(&x).unwrap();
        assert_eq!(preds, y.values());
    }

    #[test]
    fn constant_fit_predicts_the_single_class() {
        let x = ndarray::array![[1.0, 0.0], [2.0, 1.0], [3.0, 0.5]];
        let y = Target::classification(vec![1.0, 1.0, 1.0]).unwrap();
        let model = fit(&ModelSpec::random_forest(3), &x, &y).unwrap();
        let preds = model.predict(&x).unwrap();
        assert_eq!(preds, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn incompatible_pairs_error() {
        let (x, y) = line_data(20);
        let err = fit(
            &ModelSpec::LogisticRegression {
                learning_rate: 0.1,
                max_iter: 10,
                tolerance: 1e-6,
            },
            &x,
            &y,
        );
        assert!(matches!(err, Err(Error::Incompatible(_))));
        let (x, y) = separable(20);
        let err = fit(&ModelSpec::LinearRegression { ridge: 0.0 }, &x, &y);
        assert!(matches!(err, Err(Error::Incompatible(_))));
    }

    #[test]
    fn predict_rejects_wrong_width() {
        let (x, y) = separable(20);
        let model = fit(&ModelSpec::decision_tree(0), &x, &y).unwrap();
        let narrow = ndarray::array![[1.0]];
        assert!(matches!(
            model.predict(&narrow),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn fit_is_deterministic() {
        let (ds, _) = generate_synthetic(TaskKind::Classification, 200, 8, 5).unwrap();
        let spec = ModelSpec::random_forest(11);
        let a = fit(&spec, ds.features(), ds.target()).unwrap();
        let b = fit(&spec, ds.features(), ds.target()).unwrap();
        assert_eq!(
            a.predict(ds.features()).unwrap(),
            b.predict(ds.features()).unwrap()
        );
    }

    #[test]
    fn forest_of_one_tree_without_bootstrap_equals_tree() {
        let (ds, _) = generate_synthetic(TaskKind::Classification, 150, 6, 2).unwrap();
        let forest_seed = 31;
        let forest = fit(
            &ModelSpec::RandomForest {
                trees: 1,
                max_depth: None,
                min_leaf: Some(1),
                max_features: Some(2),
                bootstrap: false,
                seed: Some(forest_seed),
            },
            ds.features(),
            ds.target(),
        )
        .unwrap();
        let tree = fit(
            &ModelSpec::DecisionTree {
                max_depth: None,
                min_leaf: Some(1),
                max_features: Some(2),
                seed: Some(derive_seed(forest_seed, 0)),
            },
            ds.features(),
            ds.target(),
        )
        .unwrap();
        assert_eq!(
            forest.predict(ds.features()).unwrap(),
            tree.predict(ds.features()).unwrap()
        );
    }

    #[test]
    fn row_shuffle_invariance_for_smooth_learners() {
        let (x, y) = line_data(40);
        let model_a = fit(&ModelSpec::LinearRegression { ridge: 1e-8 }, &x, &y).unwrap();
        // reverse rows
        let rows: Vec<usize> = (0..40).rev().collect();
        let xr = x.select(ndarray::Axis(0), &rows);
        let yr = Target::regression(rows.iter().map(|&r| y.values()[r]).collect()).unwrap();
        let model_b = fit(&ModelSpec::LinearRegression { ridge: 1e-8 }, &xr, &yr).unwrap();
        let probe = ndarray::array![[0.3], [2.9], [-1.0]];
        let pa = model_a.predict(&probe).unwrap();
        let pb = model_b.predict(&probe).unwrap();
        for (a, b) in pa.iter().zip(&pb) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn logistic_zero_weights_give_half_scores() {
        let (x, y) = separable(20);
        let model = fit(
            &ModelSpec::LogisticRegression {
                learning_rate: 0.1,
                max_iter: 1,
                tolerance: 1e300, // converges immediately, weights stay 0
            },
            &x,
            &y,
        )
        .unwrap();
        let scores = model.predict_score(&x).unwrap();
        assert!(scores.iter().all(|s| *s == 0.5));
        // ties threshold up
        let preds = model.predict(&x).unwrap();
        assert!(preds.iter().all(|p| *p == 1.0));
    }

    #[test]
    fn score_thresholds_to_predict() {
        let (ds, _) = generate_synthetic(TaskKind::Classification, 300, 7, 8).unwrap();
        let model = fit(&ModelSpec::random_forest(9), ds.features(), ds.target()).unwrap();
        let scores = model.predict_score(ds.features()).unwrap();
        let preds = model.predict(ds.features()).unwrap();
        for (s, p) in scores.iter().zip(&preds) {
            let expect = if *s >= 0.5 { 1.0 } else { 0.0 };
            assert_eq!(expect, *p);
        }
    }

    #[test]
    fn predict_score_rejects_regression_models() {
        let (x, y) = line_data(20);
        let model = fit(&ModelSpec::LinearRegression { ridge: 0.0 }, &x, &y).unwrap();
        assert!(model.predict_score(&x).is_err());
    }

    #[test]
    fn spec_json_round_trip_with_defaults() {
        let spec = ModelSpec::from_json(r#"{"kind": "random_forest", "trees": 10, "seed": 7}"#)
            .unwrap();
        match &spec {
            ModelSpec::RandomForest {
                trees,
                bootstrap,
                seed,
                ..
            } => {
                assert_eq!(*trees, 10);
                assert!(*bootstrap);
                assert_eq!(*seed, Some(7));
            }
            other => panic!("unexpected spec {other:?}"),
        }
        assert!(ModelSpec::from_json(r#"{"kind": "random_forest", "trees": 0}"#).is_err());
        assert!(ModelSpec::from_json(r#"{"kind": "nonsense"}"#).is_err());
    }

    #[test]
    fn fit_counter_moves_on_fit() {
        let (x, y) = separable(20);
        let before = fit_count();
        let _ = fit(&ModelSpec::decision_tree(0), &x, &y).unwrap();
        assert_eq!(fit_count(), before + 1);
    }
}
