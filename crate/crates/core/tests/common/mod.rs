//! Independent oracles shared by the integration tests. Nothing here calls the
//! library code it is used to check.
#![allow(dead_code)]

use margin_sparse::{FeatureMatrix, LabeledDataset, SamplingOperator};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Random d×ℓ matrix with orthonormal columns, from Gram-Schmidt on a gaussian.
pub fn orthonormal(d: usize, ell: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng(seed);
    let mut v = gaussian(d, ell, &mut rng);
    for j in 0..ell {
        // Two passes keep the columns orthogonal to working precision.
        for _ in 0..2 {
            for k in 0..j {
                let proj = v.column(k).dot(&v.column(j));
                let qk = v.column(k).clone_owned();
                v.column_mut(j).axpy(-proj, &qk, 1.0);
            }
        }
        let norm = v.column(j).norm();
        v.column_mut(j).scale_mut(1.0 / norm);
    }
    v
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = (m + m.transpose()) * 0.5;
    let scale = a.norm().max(f64::MIN_POSITIVE);
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// Singular values of M from the Jacobi eigenvalues of MᵀM, ascending.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    jacobi_eigenvalues(&(m.transpose() * m))
        .into_iter()
        .map(|l| l.max(0.0).sqrt())
        .collect()
}

pub fn symmetric_norm(m: &DMatrix<f64>) -> f64 {
    jacobi_eigenvalues(m)
        .into_iter()
        .fold(0.0, |acc, l| acc.max(l.abs()))
}

/// `RᵀV` built row by row from the operator's selections.
pub fn sampled_rows(op: &SamplingOperator, v: &DMatrix<f64>) -> DMatrix<f64> {
    let sel = op.selections();
    DMatrix::from_fn(sel.len(), v.ncols(), |k, j| {
        sel[k].weight * v[(sel[k].column, j)]
    })
}

/// `‖VᵀV − VᵀRRᵀV‖₂`.
pub fn spectral_error(op: &SamplingOperator, v: &DMatrix<f64>) -> f64 {
    let rv = sampled_rows(op, v);
    symmetric_norm(&(v.transpose() * v - rv.transpose() * rv))
}

/// Dual objective `Σα − ½‖Σ αᵢyᵢxᵢ‖²`.
pub fn dual_objective(x: &DMatrix<f64>, y: &[f64], alpha: &[f64]) -> f64 {
    let mut w = DVector::zeros(x.ncols());
    for (i, (&a, &yi)) in alpha.iter().zip(y).enumerate() {
        w += x.row(i).transpose() * (a * yi);
    }
    alpha.iter().sum::<f64>() - 0.5 * w.norm_squared()
}

/// Euclidean projection onto `{0 ≤ α ≤ C, yᵀα = 0}` by bisection on the multiplier.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |lambda: f64| -> Vec<f64> {
        v.iter()
            .zip(y)
            .map(|(&vi, &yi)| (vi - lambda * yi).clamp(0.0, c))
            .collect()
    };
    let balance = |a: &[f64]| -> f64 { a.iter().zip(y).map(|(ai, yi)| ai * yi).sum() };
    let bound = v.iter().fold(0.0_f64, |m, x| m.max(x.abs())) + c;
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if balance(&at(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Projected-gradient ascent on the box- and equality-constrained dual.
pub fn qp_oracle(x: &DMatrix<f64>, y: &[f64], c: f64, iters: usize) -> (Vec<f64>, f64) {
    let n = y.len();
    let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * x.row(i).dot(&x.row(j)));
    let lipschitz = jacobi_eigenvalues(&q)
        .last()
        .copied()
        .unwrap_or(1.0)
        .max(1e-12);
    let step = 1.0 / lipschitz;
    let mut alpha = vec![0.0; n];
    for _ in 0..iters {
        let qa = &q * DVector::from_column_slice(&alpha);
        let moved: Vec<f64> = (0..n).map(|i| alpha[i] + step * (1.0 - qa[i])).collect();
        alpha = project(&moved, y, c);
    }
    let obj = dual_objective(x, y, &alpha);
    (alpha, obj)
}

/// Smallest circle through two or three planar points, as (center, radius²).
fn circle_through(p: &[[f64; 2]]) -> Option<([f64; 2], f64)> {
    match p {
        [a, b] => {
            let c = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            Some((c, dist2(&c, a)))
        }
        [a, b, c] => {
            let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
            if d.abs() < 1e-12 {
                return None;
            }
            let sa = a[0] * a[0] + a[1] * a[1];
            let sb = b[0] * b[0] + b[1] * b[1];
            let sc = c[0] * c[0] + c[1] * c[1];
            let ux = (sa * (b[1] - c[1]) + sb * (c[1] - a[1]) + sc * (a[1] - b[1])) / d;
            let uy = (sa * (c[0] - b[0]) + sb * (a[0] - c[0]) + sc * (b[0] - a[0])) / d;
            let center = [ux, uy];
            Some((center, dist2(&center, a)))
        }
        _ => None,
    }
}

fn dist2(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Exact planar enclosing-ball radius: the smallest of all two- and
/// three-point circles that contain every point.
pub fn planar_meb_oracle(points: &[[f64; 2]]) -> f64 {
    let n = points.len();
    if n == 1 {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    let mut consider = |sub: &[[f64; 2]]| {
        if let Some((c, r2)) = circle_through(sub) {
            if points
                .iter()
                .all(|p| dist2(&c, p) <= r2 * (1.0 + 1e-12) + 1e-300)
            {
                best = best.min(r2);
            }
        }
    };
    for i in 0..n {
        for j in i + 1..n {
            consider(&[points[i], points[j]]);
            for k in j + 1..n {
                consider(&[points[i], points[j], points[k]]);
            }
        }
    }
    best.sqrt()
}

/// n×d data of exact rank `rank`, labelled by a random hyperplane through the
/// latent coordinates.
pub fn low_rank_dataset(n: usize, d: usize, rank: usize, seed: u64) -> LabeledDataset {
    let mut rng = rng(seed);
    let a = gaussian(n, rank, &mut rng);
    let b = gaussian(rank, d, &mut rng);
    let w = gaussian(rank, 1, &mut rng);
    let score = &a * w;
    let y = score
        .iter()
        .map(|s| if *s >= 0.0 { 1.0 } else { -1.0 })
        .collect();
    LabeledDataset::new(FeatureMatrix::Dense(a * b), y).expect("finite data")
}

/// Random labels with both classes present.
pub fn both_labels(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut y: Vec<f64> = (0..n)
        .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
        .collect();
    y[0] = 1.0;
    y[n - 1] = -1.0;
    y
}
