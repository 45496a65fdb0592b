//! Linear soft-margin SVM in the dual:
//!
//! ```text
//! max_α  1ᵀα − ½ αᵀ Y X Xᵀ Y α   s.t.  yᵀα = 0,  0 ≤ α ≤ C
//! ```
//!
//! solved by two-variable (SMO) updates with second-order working-set
//! selection. Pair updates keep `yᵀα = 0` by construction.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::data::LabeledDataset;
use crate::error::{invalid, Error, Result};
use crate::matrix::FeatureMatrix;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub c: f64,
    /// Stop once the maximal KKT violating pair gap is below this.
    pub kkt_tol: f64,
    /// Epochs of n pair updates; `None` caps the total at `max(10⁷, 100·n)`
    /// updates, as LIBSVM does.
    pub max_passes: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            kkt_tol: 1e-4,
            max_passes: None,
        }
    }
}

impl SolverConfig {
    pub fn with_c(c: f64) -> Self {
        Self {
            c,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SvmModel {
    pub alpha: Vec<f64>,
    pub w: Vec<f64>,
    pub b: f64,
    pub support_indices: Vec<usize>,
    /// `1/‖w‖₂`; infinite when `w = 0`.
    pub margin: f64,
    pub c: f64,
    /// Dual objective `1ᵀα − ½‖w‖²`.
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Dual objective at the end of each epoch of n updates.
    pub objective_history: Vec<f64>,
    /// Largest per-point KKT residual at the returned iterate.
    pub max_kkt_residual: f64,
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn w_norm_sq(&self) -> f64 {
        self.w.iter().map(|v| v * v).sum()
    }

    pub fn alpha_sum(&self) -> f64 {
        self.alpha.iter().sum()
    }

    /// Whether some αᵢ sits at the upper bound C.
    pub fn has_bounded_alpha(&self) -> bool {
        self.alpha
            .iter()
            .any(|&a| a >= self.c * (1.0 - SV_RELATIVE))
    }
}

const DEFAULT_MAX_UPDATES: usize = 10_000_000;

const SV_RELATIVE: f64 = 1e-6;

/// αᵢ above this count as support vectors. Relative to the largest α rather
/// than to C, since on separable data with large C every α is far below C.
pub fn sv_threshold(alpha: &[f64]) -> f64 {
    SV_RELATIVE * alpha.iter().copied().fold(0.0, f64::max)
}

/// Solves the dual on a dataset with both labels.
pub fn solve_dual(data: &LabeledDataset, config: &SolverConfig) -> Result<SvmModel> {
    solve_dense(&data.x().to_dense(), data.y(), config)
}

pub fn solve_dense(x: &DMatrix<f64>, y: &[f64], config: &SolverConfig) -> Result<SvmModel> {
    let n = y.len();
    if x.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "labels vs rows",
            expected: x.nrows(),
            found: n,
        });
    }
    if n < 2 {
        return Err(invalid("the dual needs at least two points"));
    }
    let has_pos = y.contains(&1.0);
    let has_neg = y.contains(&-1.0);
    if !(has_pos && has_neg) {
        return Err(Error::SingleClass(if has_pos { 1 } else { -1 }));
    }
    if !(config.c > 0.0) || !config.c.is_finite() {
        return Err(invalid(format!("C must be positive, got {}", config.c)));
    }
    if !(config.kkt_tol > 0.0) {
        return Err(invalid("kkt_tol must be positive"));
    }

    let kernel = x * x.transpose();
    let c = config.c;
    let max_iter = match config.max_passes {
        Some(passes) => passes.saturating_mul(n).max(1),
        None => n.saturating_mul(100).max(DEFAULT_MAX_UPDATES),
    };

    let q = |i: usize, j: usize| y[i] * y[j] * kernel[(i, j)];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let objective = |alpha: &[f64], grad: &[f64]| -> f64 {
        -0.5 * alpha
            .iter()
            .zip(grad)
            .map(|(a, g)| a * (g - 1.0))
            .sum::<f64>()
    };

    let in_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        // Maximal violating index from the "up" set.
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if in_up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = t;
                }
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut best_gain = f64::INFINITY;
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            if i_sel == usize::MAX {
                continue;
            }
            let b = gmax - v;
            if b > 0.0 {
                let a = kernel[(i_sel, i_sel)] + kernel[(t, t)] - 2.0 * kernel[(i_sel, t)];
                let a = if a > 0.0 { a } else { TAU };
                let gain = -(b * b) / a;
                if gain < best_gain {
                    best_gain = gain;
                    j_sel = t;
                }
            }
        }
        if i_sel == usize::MAX || j_sel == usize::MAX || gmax - gmin < config.kkt_tol {
            converged = true;
            break;
        }

        let (i, j) = (i_sel, j_sel);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = positive(kernel[(i, i)] + kernel[(j, j)] - 2.0 * kernel[(i, j)]);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = positive(kernel[(i, i)] + kernel[(j, j)] - 2.0 * kernel[(i, j)]);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(t, i) * di + q(t, j) * dj;
        }
        iterations += 1;
        if iterations % n == 0 {
            history.push(objective(&alpha, &grad));
        }
    }
    history.push(objective(&alpha, &grad));

    let b = bias(&alpha, &grad, y, c);
    let max_kkt_residual = (0..n)
        .map(|t| {
            let slack = grad[t] + y[t] * b; // y f(x) − 1
            if alpha[t] <= 0.0 {
                (-slack).max(0.0)
            } else if alpha[t] >= c {
                slack.max(0.0)
            } else {
                slack.abs()
            }
        })
        .fold(0.0, f64::max);

    let coeffs = DVector::from_iterator(n, (0..n).map(|t| alpha[t] * y[t]));
    let w = x.transpose() * coeffs;
    let w_norm = w.norm();
    let thr = sv_threshold(&alpha);
    Ok(SvmModel {
        support_indices: (0..n).filter(|&t| alpha[t] > thr).collect(),
        objective: objective(&alpha, &grad),
        alpha,
        w: w.iter().copied().collect(),
        b,
        margin: if w_norm > 0.0 {
            1.0 / w_norm
        } else {
            f64::INFINITY
        },
        c,
        converged,
        iterations,
        objective_history: history,
        max_kkt_residual,
    })
}

fn positive(quad: f64) -> f64 {
    if quad > 0.0 {
        quad
    } else {
        TAU
    }
}

/// Average over free support vectors, else the midpoint of the feasible interval.
fn bias(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut free_sum = 0.0;
    let mut free = 0usize;
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    for t in 0..alpha.len() {
        let candidate = -y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            free_sum += candidate;
            free += 1;
        } else if (alpha[t] <= 0.0) == (y[t] > 0.0) {
            lower = lower.max(candidate);
        } else {
            upper = upper.min(candidate);
        }
    }
    if free > 0 {
        free_sum / free as f64
    } else if lower.is_finite() && upper.is_finite() {
        0.5 * (lower + upper)
    } else if lower.is_finite() {
        lower
    } else if upper.is_finite() {
        upper
    } else {
        0.0
    }
}

/// Geometric margin `1/‖w‖₂`.
pub fn margin(model: &SvmModel) -> Result<f64> {
    if model.w_norm_sq() == 0.0 {
        return Err(Error::DegenerateModel);
    }
    Ok(model.margin)
}

pub fn support_vectors(model: &SvmModel) -> &[usize] {
    &model.support_indices
}

/// `sign(X·w + b)` with zero mapped to +1.
pub fn predict(model: &SvmModel, x: &FeatureMatrix) -> Result<Vec<f64>> {
    let w = DVector::from_column_slice(&model.w);
    let scores = x.mul_vec(&w)?;
    Ok(scores
        .iter()
        .map(|s| if s + model.b >= 0.0 { 1.0 } else { -1.0 })
        .collect())
}

/// Fraction of misclassified points.
pub fn error_rate(model: &SvmModel, data: &LabeledDataset) -> Result<f64> {
    if data.n() == 0 {
        return Ok(0.0);
    }
    let labels = predict(model, data.x())?;
    let wrong = labels.iter().zip(data.y()).filter(|(p, y)| p != y).count();
    Ok(wrong as f64 / data.n() as f64)
}
