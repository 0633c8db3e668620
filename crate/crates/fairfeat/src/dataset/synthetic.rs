//! Synthetic benchmark generator.
//!
//! Draws a binary protected attribute, mean-shifts the first two features
//! with it, and builds the response from the first five features, so every
//! generated dataset has known signal and known bias by construction.

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

use crate::error::{Error, Result};
use crate::rng;

use super::{Dataset, GroupLabels, Target, TaskKind};

/// Number of leading features carrying response signal.
pub const SIGNAL_WIDTH: usize = 5;
/// Number of leading features mean-shifted with the protected attribute.
pub const BIASED_WIDTH: usize = 2;

/// Probability that a sample belongs to the minority group.
const GROUP_PROBABILITY: f64 = 0.2;
/// Mean of the signal coefficients.
const SIGNAL_COEF_MEAN: f64 = 5.0;
/// Variance of every coefficient around its mean.
const COEF_VARIANCE: f64 = 0.1;

/// Ground truth of one synthetic draw: the coefficient vector and which
/// feature indices (0-based) carry signal and bias.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SyntheticTruth {
    pub signal_features: Vec<usize>,
    pub biased_features: Vec<usize>,
    pub beta: Vec<f64>,
}

/// Generate a seeded synthetic dataset.
///
/// Per sample `i`: group indicator `z_i ~ Bernoulli(0.2)`; feature
/// `x_ij ~ Normal((1 + z_i) * [j < 2], 1)`. Coefficients
/// `beta_j ~ Normal(5 * [j < 5], 0.1)` (variance 0.1). Classification
/// labels are `Bernoulli(sigmoid(x_i . beta))`; regression targets are
/// `x_i . beta + Normal(0, 1)` noise. Groups map `z = 0 -> 1`,
/// `z = 1 -> 2`.
///
/// Draw order is fixed (z, beta, X row-major, response) so equal seeds
/// are bit-reproducible.
pub fn generate_synthetic(
    task: TaskKind,
    n_samples: usize,
    n_features: usize,
    seed: u64,
) -> Result<(Dataset, SyntheticTruth)> {
    if n_samples < 10 {
        return Err(Error::InvalidParameter(format!(
            "n_samples must be at least 10, got {n_samples}"
        )));
    }
    if n_features < SIGNAL_WIDTH {
        return Err(Error::InvalidParameter(format!(
            "n_features must be at least {SIGNAL_WIDTH} (signal set width), got {n_features}"
        )));
    }

    let mut gen = ChaCha8Rng::seed_from_u64(seed);

    let z: Vec<u8> = (0..n_samples)
        .map(|_| u8::from(rng::bernoulli(&mut gen, GROUP_PROBABILITY)))
        .collect();

    let coef_sd = COEF_VARIANCE.sqrt();
    let beta: Vec<f64> = (0..n_features)
        .map(|j| {
            let mean = if j < SIGNAL_WIDTH { SIGNAL_COEF_MEAN } else { 0.0 };
            mean + coef_sd * rng::standard_normal(&mut gen)
        })
        .collect();

    let mut features = Array2::zeros((n_samples, n_features));
    for i in 0..n_samples {
        for j in 0..n_features {
            let mean = if j < BIASED_WIDTH {
                1.0 + f64::from(z[i])
            } else {
                0.0
            };
            features[[i, j]] = mean + rng::standard_normal(&mut gen);
        }
    }

    let linear: Vec<f64> = (0..n_samples)
        .map(|i| features.row(i).iter().zip(&beta).map(|(x, b)| x * b).sum())
        .collect();

    let target = match task {
        TaskKind::Classification => {
            let labels = linear
                .iter()
                .map(|&eta| f64::from(rng::bernoulli(&mut gen, sigmoid(eta))))
                .collect();
            Target::Classification(labels)
        }
        TaskKind::Regression => {
            let values = linear
                .iter()
                .map(|&eta| eta + rng::standard_normal(&mut gen))
                .collect();
            Target::Regression(values)
        }
    };

    let group_values: Vec<u32> = z.iter().map(|&zi| u32::from(zi) + 1).collect();
    let groups = GroupLabels::new(group_values, 2)?;

    let feature_names = (1..=n_features).map(|j| format!("x{j}")).collect();
    let dataset = Dataset::new(
        features,
        feature_names,
        target,
        groups,
        format!("synthetic:{task}:seed={seed}"),
    )?;

    let truth = SyntheticTruth {
        signal_features: (0..SIGNAL_WIDTH).collect(),
        biased_features: (0..BIASED_WIDTH).collect(),
        beta,
    };
    Ok((dataset, truth))
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_too_few_features() {
        let err = generate_synthetic(TaskKind::Classification, 100, 4, 0);
        assert!(err.is_err());
    }

    #[test]
    fn rejects_too_few_samples() {
        assert!(generate_synthetic(TaskKind::Regression, 9, 10, 0).is_err());
    }

    #[test]
    fn group_fraction_near_one_fifth() {
        for seed in [1, 2, 3] {
            let (ds, _) = generate_synthetic(TaskKind::Classification, 1000, 10, seed).unwrap();
            let minority = ds.groups().values().iter().filter(|&&g| g == 2).count();
            let frac = minority as f64 / 1000.0;
            assert!((0.16..=0.24).contains(&frac), "seed {seed}: {frac}");
        }
    }

    #[test]
    fn biased_feature_mean_shift() {
        let (ds, _) = generate_synthetic(TaskKind::Classification, 1000, 10, 42).unwrap();
        let groups = ds.groups().values();
        let mean_of = |group: u32| {
            let mut total = 0.0;
            let mut count = 0usize;
            for (i, &g) in groups.iter().enumerate() {
                if g == group {
                    total += ds.features()[[i, 0]];
                    count += 1;
                }
            }
            total / count as f64
        };
        let minority = mean_of(2);
        let majority = mean_of(1);
        assert!((1.8..=2.2).contains(&minority), "minority mean {minority}");
        assert!((0.9..=1.1).contains(&majority), "majority mean {majority}");
    }

    #[test]
    fn noise_feature_uncorrelated_with_regression_target() {
        // Feature 8 (index 7) has coefficient ~ Normal(0, 0.1); over 20
        // seeds its sample correlation with y stays inside |r| < 0.1.
        for seed in 0..20 {
            let (ds, _) = generate_synthetic(TaskKind::Regression, 1000, 10, seed).unwrap();
            let xs: Vec<f64> = ds.features().column(7).to_vec();
            let ys = ds.target().values();
            let r = correlation(&xs, ys);
            assert!(r.abs() < 0.1, "seed {seed}: r = {r}");
        }
    }

    #[test]
    fn same_seed_is_bit_reproducible() {
        let (a, ta) = generate_synthetic(TaskKind::Regression, 200, 10, 9).unwrap();
        let (b, tb) = generate_synthetic(TaskKind::Regression, 200, 10, 9).unwrap();
        assert_eq!(a.features(), b.features());
        assert_eq!(a.target().values(), b.target().values());
        assert_eq!(ta.beta, tb.beta);
    }

    #[test]
    fn truth_index_sets_nest() {
        let (_, truth) = generate_synthetic(TaskKind::Classification, 50, 8, 1).unwrap();
        assert_eq!(truth.beta.len(), 8);
        assert!(truth
            .biased_features
            .iter()
            .all(|j| truth.signal_features.contains(j)));
    }

    fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let mut cov = 0.0;
        let mut vx = 0.0;
        let mut vy = 0.0;
        for (x, y) in xs.iter().zip(ys) {
            cov += (x - mx) * (y - my);
            vx += (x - mx) * (x - mx);
            vy += (y - my) * (y - my);
        }
        cov / (vx.sqrt() * vy.sqrt())
    }
}
