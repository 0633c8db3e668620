//! Linear and logistic regression.

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// Least squares via the normal equations with a small ridge jitter on
/// the Gram diagonal, so collinear one-hot blocks stay solvable.
#[derive(Debug)]
pub(crate) struct LinearModel {
    weights: Vec<f64>,
    intercept: f64,
}

impl LinearModel {
    pub fn fit(x: &Array2<f64>, y: &[f64], ridge: f64) -> Result<LinearModel> {
        let (n, m) = x.dim();
        let d = m + 1; // trailing intercept column
        let mut gram = vec![0.0f64; d * d];
        let mut rhs = vec![0.0f64; d];

        let augmented = |row: usize, col: usize| -> f64 {
            if col < m {
                x[[row, col]]
            } else {
                1.0
            }
        };
        for i in 0..n {
            for a in 0..d {
                let xa = augmented(i, a);
                rhs[a] += xa * y[i];
                for b in a..d {
                    gram[a * d + b] += xa * augmented(i, b);
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                gram[a * d + b] = gram[b * d + a];
            }
            gram[a * d + a] += ridge;
        }

        let solution = cholesky_solve(&mut gram, &rhs, d)?;
        let intercept = solution[m];
        let mut weights = solution;
        weights.truncate(m);
        Ok(LinearModel { weights, intercept })
    }

    pub fn value(&self, row: ArrayView1<f64>) -> f64 {
        self.intercept
            + row
                .iter()
                .zip(&self.weights)
                .map(|(x, w)| x * w)
                .sum::<f64>()
    }
}

/// In-place Cholesky factorization and solve of a symmetric positive
/// definite system stored row-major.
fn cholesky_solve(matrix: &mut [f64], rhs: &[f64], d: usize) -> Result<Vec<f64>> {
    // factor: matrix = L L^T, L stored in the lower triangle
    for j in 0..d {
        let mut diag = matrix[j * d + j];
        for k in 0..j {
            diag -= matrix[j * d + k] * matrix[j * d + k];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return Err(Error::InvalidParameter(
                "normal equations are not positive definite; increase the ridge jitter".into(),
            ));
        }
        let root = diag.sqrt();
        matrix[j * d + j] = root;
        for i in (j + 1)..d {
            let mut v = matrix[i * d + j];
            for k in 0..j {
                v -= matrix[i * d + k] * matrix[j * d + k];
            }
            matrix[i * d + j] = v / root;
        }
    }
    // forward substitution: L z = rhs
    let mut z = vec![0.0f64; d];
    for i in 0..d {
        let mut v = rhs[i];
        for k in 0..i {
            v -= matrix[i * d + k] * z[k];
        }
        z[i] = v / matrix[i * d + i];
    }
    // back substitution: L^T w = z
    let mut w = vec![0.0f64; d];
    for i in (0..d).rev() {
        let mut v = z[i];
        for k in (i + 1)..d {
            v -= matrix[k * d + i] * w[k];
        }
        w[i] = v / matrix[i * d + i];
    }
    Ok(w)
}

/// Full-batch gradient descent on the mean logistic loss. Weights start
/// at zero; iteration stops at `max_iter` or when the gradient norm drops
/// below `tolerance`. Features are used as-is.
#[derive(Debug)]
pub(crate) struct LogisticModel {
    weights: Vec<f64>,
    intercept: f64,
}

impl LogisticModel {
    pub fn fit(
        x: &Array2<f64>,
        y: &[f64],
        learning_rate: f64,
        max_iter: usize,
        tolerance: f64,
    ) -> LogisticModel {
        let (n, m) = x.dim();
        let scale = 1.0 / n as f64;
        let mut weights = vec![0.0f64; m];
        let mut intercept = 0.0f64;
        let mut residual = vec![0.0f64; n];

        for _ in 0..max_iter {
            for i in 0..n {
                let eta = intercept
                    + x.row(i)
                        .iter()
                        .zip(&weights)
                        .map(|(v, w)| v * w)
                        .sum::<f64>();
                residual[i] = sigmoid(eta) - y[i];
            }
            let mut grad_sq = 0.0f64;
            let grad_b: f64 = residual.iter().sum::<f64>() * scale;
            grad_sq += grad_b * grad_b;
            let mut grads = vec![0.0f64; m];
            for i in 0..n {
                let r = residual[i];
                for (g, v) in grads.iter_mut().zip(x.row(i)) {
                    *g += r * v;
                }
            }
            for g in &mut grads {
                *g *= scale;
                grad_sq += *g * *g;
            }
            if grad_sq.sqrt() < tolerance {
                break;
            }
            intercept -= learning_rate * grad_b;
            for (w, g) in weights.iter_mut().zip(&grads) {
                *w -= learning_rate * g;
            }
        }
        LogisticModel { weights, intercept }
    }

    pub fn score(&self, row: ArrayView1<f64>) -> f64 {
        let eta = self.intercept
            + row
                .iter()
                .zip(&self.weights)
                .map(|(x, w)| x * w)
                .sum::<f64>();
        sigmoid(eta)
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
