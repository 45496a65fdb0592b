//! Minimum enclosing ball of the data and the radius-preservation check for
//! a sampling operator.
//!
//! The ball is found by core-set iteration on the simplex-constrained dual
//! `max_u Σ uᵢ‖xᵢ‖² − ‖Σ uᵢxᵢ‖²`: each step moves the center toward the
//! farthest point (or away from the nearest core point) with an exact line
//! search. Any feasible `u` gives the lower bound `B² ≥ Σ uᵢ‖xᵢ − c‖²`, so
//! iteration stops with a certified `(1 + δ)` approximation.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::matrix::{thin_svd_dense, FeatureMatrix, DEFAULT_RANK_THRESHOLD};
use crate::sampling::SamplingOperator;

pub const DEFAULT_MEB_DELTA: f64 = 1e-3;

const MAX_ITERS: usize = 1_000_000;

#[derive(Debug, Clone, Serialize)]
pub struct EnclosingBall {
    pub center: Vec<f64>,
    /// Largest distance from the center to a data point.
    pub radius: f64,
    /// Certified lower bound on the minimum radius.
    pub lower_bound: f64,
    pub delta: f64,
    pub iterations: usize,
}

pub fn meb_radius(x: &FeatureMatrix, delta: f64) -> Result<EnclosingBall> {
    meb_dense(&x.to_dense(), delta)
}

pub fn meb_dense(x: &DMatrix<f64>, delta: f64) -> Result<EnclosingBall> {
    let n = x.nrows();
    if n == 0 {
        return Err(invalid("enclosing ball of an empty point set"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("δ must lie in (0, 1), got {delta}")));
    }

    // Work relative to the centroid to limit cancellation in the Gram entries.
    let mean = x.row_mean();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let gram = &centered * centered.transpose();
    let diag: Vec<f64> = (0..n).map(|i| gram[(i, i)]).collect();

    let far_from = |i: usize| -> (usize, f64) {
        (0..n)
            .map(|j| (j, diag[i] + diag[j] - 2.0 * gram[(i, j)]))
            .fold((i, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc })
    };
    let (a, _) = far_from(0);
    let (b, spread) = far_from(a);
    if spread <= 0.0 {
        return Ok(EnclosingBall {
            center: x.row(0).iter().copied().collect(),
            radius: 0.0,
            lower_bound: 0.0,
            delta,
            iterations: 0,
        });
    }

    let mut u = vec![0.0; n];
    u[a] += 0.5;
    u[b] += 0.5;
    let mut ku = DVector::from_fn(n, |i, _| 0.5 * (gram[(i, a)] + gram[(i, b)]));
    let target = (1.0 + delta) * (1.0 + delta);
    let mut iterations = 0;
    loop {
        let uku: f64 = u.iter().zip(ku.iter()).map(|(ui, k)| ui * k).sum();
        let dist2 = |i: usize| (diag[i] - 2.0 * ku[i] + uku).max(0.0);
        let phi: f64 = (0..n)
            .filter(|&i| u[i] > 0.0)
            .map(|i| u[i] * dist2(i))
            .sum();
        let (far, far_d2) = (0..n)
            .map(|i| (i, dist2(i)))
            .fold(
                (0, f64::MIN),
                |acc, cur| if cur.1 > acc.1 { cur } else { acc },
            );
        if far_d2 <= target * phi || iterations >= MAX_ITERS {
            break;
        }
        let (near, near_d2) = (0..n).filter(|&i| u[i] > 0.0).map(|i| (i, dist2(i))).fold(
            (0, f64::MAX),
            |acc, cur| if cur.1 < acc.1 { cur } else { acc },
        );
        let eps_plus = far_d2 / phi - 1.0;
        let eps_minus = 1.0 - near_d2 / phi;
        if eps_plus >= eps_minus || u[near] >= 1.0 {
            let lambda = eps_plus / (2.0 * (1.0 + eps_plus));
            for ui in u.iter_mut() {
                *ui *= 1.0 - lambda;
            }
            u[far] += lambda;
            ku = ku * (1.0 - lambda) + gram.column(far) * lambda;
        } else {
            let cap = u[near] / (1.0 - u[near]);
            let lambda = (eps_minus / (2.0 * (1.0 - eps_minus))).min(cap);
            for ui in u.iter_mut() {
                *ui *= 1.0 + lambda;
            }
            u[near] -= lambda;
            if lambda == cap {
                u[near] = 0.0;
            }
            ku = ku * (1.0 + lambda) - gram.column(near) * lambda;
        }
        iterations += 1;
    }

    let weights = DVector::from_column_slice(&u);
    let center = centered.transpose() * &weights;
    let uku: f64 = u.iter().zip(ku.iter()).map(|(ui, k)| ui * k).sum();
    let phi: f64 = (0..n)
        .map(|i| u[i] * (diag[i] - 2.0 * ku[i] + uku).max(0.0))
        .sum();
    let radius = centered
        .row_iter()
        .map(|row| (row.transpose() - &center).norm())
        .fold(0.0, f64::max);
    let center_abs = center + mean.transpose();
    if iterations >= MAX_ITERS && radius * radius > (1.0 + delta).powi(2) * phi {
        return Err(Error::Numerical(format!(
            "enclosing ball did not reach (1 + {delta}) accuracy in {MAX_ITERS} steps"
        )));
    }
    Ok(EnclosingBall {
        center: center_abs.iter().copied().collect(),
        radius,
        lower_bound: phi.sqrt(),
        delta,
        iterations,
    })
}

/// Measured quantities of the radius-preservation inequality.
#[derive(Debug, Clone, Serialize)]
pub struct RadiusCheck {
    /// Radius of the enclosing ball of X.
    pub radius_full: f64,
    /// Radius of the enclosing ball of X·R, computed independently.
    pub radius_sampled: f64,
    /// Largest distance from the sampled image of X's center to a sampled point.
    pub projected_radius: f64,
    /// `‖V_BᵀV_B − V_BᵀRRᵀV_B‖₂` for the basis of X stacked with its center.
    pub spectral_error: f64,
    pub delta: f64,
    /// `projected² ≤ (1 + ‖E_B‖)·B²`.
    pub projected_pass: bool,
    /// `B̃² ≤ (1 + δ)²(1 + ‖E_B‖)·B²`, accounting for the approximate balls.
    pub pass: bool,
}

/// Relative slack for floating-point comparisons in the bound checks.
pub const CHECK_SLACK: f64 = 1e-9;

/// `X` with the row `center` appended.
pub fn augment_with_center(x: &DMatrix<f64>, center: &[f64]) -> DMatrix<f64> {
    let mut xb = x.clone().insert_row(x.nrows(), 0.0);
    for (j, c) in center.iter().enumerate() {
        xb[(x.nrows(), j)] = *c;
    }
    xb
}

/// Right singular basis of `X` stacked with the given center row.
pub fn augmented_basis(x: &DMatrix<f64>, center: &[f64]) -> Result<DMatrix<f64>> {
    Ok(thin_svd_dense(&augment_with_center(x, center), DEFAULT_RANK_THRESHOLD)?.v)
}

pub fn radius_bound_check(
    x: &FeatureMatrix,
    r: &SamplingOperator,
    delta: f64,
) -> Result<RadiusCheck> {
    if x.ncols() != r.source_dim() {
        return Err(Error::DimensionMismatch {
            context: "radius check operator",
            expected: x.ncols(),
            found: r.source_dim(),
        });
    }
    let dense = x.to_dense();
    let ball = meb_dense(&dense, delta)?;
    let basis = augmented_basis(&dense, &ball.center)?;
    let spectral_error = r.spectral_error(&basis)?;

    let sampled = r.apply_dense(&dense)?;
    let sampled_ball = meb_dense(&sampled, delta)?;
    let center = DMatrix::from_row_slice(1, dense.ncols(), &ball.center);
    let center_img = r.apply_dense(&center)?;
    let projected_radius = sampled
        .row_iter()
        .map(|row| (row - center_img.row(0)).norm())
        .fold(0.0, f64::max);

    let b2 = ball.radius * ball.radius;
    let bound = (1.0 + spectral_error) * b2;
    let projected_pass = projected_radius * projected_radius <= bound * (1.0 + CHECK_SLACK);
    let approx_pass = sampled_ball.radius * sampled_ball.radius
        <= (1.0 + delta).powi(2) * bound * (1.0 + CHECK_SLACK);
    Ok(RadiusCheck {
        radius_full: ball.radius,
        radius_sampled: sampled_ball.radius,
        projected_radius,
        spectral_error,
        delta,
        projected_pass,
        pass: projected_pass && approx_pass,
    })
}
