//! Dense and sparse feature matrices plus the decompositions the selectors
//! build on: thin SVD, spectral norm and squared row norms.

use std::borrow::Cow;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};

/// Relative cutoff below which singular values count as zero.
pub const DEFAULT_RANK_THRESHOLD: f64 = 1e-10;

/// Widest sparse matrix that will be densified for an exact SVD.
pub const MAX_DENSE_COLS: usize = 100_000;

/// Largest accepted `‖UΣVᵀ − M‖_F / ‖M‖_F` from the dense factorization.
const SVD_RESIDUAL_TOL: f64 = 1e-9;
/// Multiples of machine epsilon tried as the SVD convergence tolerance.
const SVD_EPS_LADDER: [f64; 5] = [5.0, 1.0, 25.0, 100.0, 1000.0];

/// Row-compressed sparse matrix with strictly increasing column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from per-row `(column, value)` lists.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for (i, row) in rows.into_iter().enumerate() {
            let mut prev: Option<usize> = None;
            for (j, v) in row {
                if j >= n_cols {
                    return Err(Error::DimensionMismatch {
                        context: "sparse column index",
                        expected: n_cols,
                        found: j + 1,
                    });
                }
                if prev.is_some_and(|p| j <= p) {
                    return Err(invalid(format!(
                        "row {i}: column indices must be strictly increasing ({} then {j})",
                        prev.unwrap()
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
                prev = Some(j);
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn nrows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn ncols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored entries of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[a..b]
            .iter()
            .copied()
            .zip(self.values[a..b].iter().copied())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows(), self.n_cols);
        for i in 0..self.nrows() {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }
}

/// An n×d data matrix: rows are points, columns are features.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMatrix {
    Dense(DMatrix<f64>),
    Sparse(SparseMatrix),
}

impl FeatureMatrix {
    /// Wraps a dense matrix after checking every entry is finite.
    pub fn dense(m: DMatrix<f64>) -> Result<Self> {
        check_finite(&m)?;
        Ok(FeatureMatrix::Dense(m))
    }

    /// Dense matrix from row slices; all rows must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                context: "dense row length",
                expected: d,
                found: bad.len(),
            });
        }
        Self::dense(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
    }

    pub fn nrows(&self) -> usize {
        match self {
            FeatureMatrix::Dense(m) => m.nrows(),
            FeatureMatrix::Sparse(s) => s.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            FeatureMatrix::Dense(m) => m.ncols(),
            FeatureMatrix::Sparse(s) => s.ncols(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, FeatureMatrix::Sparse(_))
    }

    /// Dense view, materializing sparse storage when needed.
    pub fn to_dense(&self) -> Cow<'_, DMatrix<f64>> {
        match self {
            FeatureMatrix::Dense(m) => Cow::Borrowed(m),
            FeatureMatrix::Sparse(s) => Cow::Owned(s.to_dense()),
        }
    }

    /// Nonzero entries of row `i` as `(column, value)` pairs.
    pub fn row_entries(&self, i: usize) -> Vec<(usize, f64)> {
        match self {
            FeatureMatrix::Dense(m) => m
                .row(i)
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, v)| (j, *v))
                .collect(),
            FeatureMatrix::Sparse(s) => s.row(i).collect(),
        }
    }

    /// Submatrix of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        match self {
            FeatureMatrix::Dense(m) => FeatureMatrix::Dense(m.select_rows(rows)),
            FeatureMatrix::Sparse(s) => {
                let picked = rows.iter().map(|&i| s.row(i).collect()).collect();
                FeatureMatrix::Sparse(
                    SparseMatrix::from_rows(s.ncols(), picked).expect("rows of a valid matrix"),
                )
            }
        }
    }

    /// Unweighted column subset, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> DMatrix<f64> {
        self.to_dense().select_columns(cols)
    }

    /// `M · w` for a length-d vector.
    pub fn mul_vec(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        if w.len() != self.ncols() {
            return Err(Error::DimensionMismatch {
                context: "matrix-vector product",
                expected: self.ncols(),
                found: w.len(),
            });
        }
        Ok(match self {
            FeatureMatrix::Dense(m) => m * w,
            FeatureMatrix::Sparse(s) => DVector::from_iterator(
                s.nrows(),
                (0..s.nrows()).map(|i| s.row(i).map(|(j, v)| v * w[j]).sum()),
            ),
        })
    }

    /// Entry i is the squared Euclidean norm of row i.
    pub fn row_norms_sq(&self) -> Vec<f64> {
        match self {
            FeatureMatrix::Dense(m) => row_norms_sq(m),
            FeatureMatrix::Sparse(s) => (0..s.nrows())
                .map(|i| s.row(i).map(|(_, v)| v * v).sum())
                .collect(),
        }
    }

    /// Indices of columns holding at least one nonzero.
    pub fn nonzero_columns(&self) -> Vec<usize> {
        let mut seen = vec![false; self.ncols()];
        for i in 0..self.nrows() {
            for (j, _) in self.row_entries(i) {
                seen[j] = true;
            }
        }
        (0..self.ncols()).filter(|&j| seen[j]).collect()
    }
}

impl From<SparseMatrix> for FeatureMatrix {
    fn from(s: SparseMatrix) -> Self {
        FeatureMatrix::Sparse(s)
    }
}

pub fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
    }
    Ok(())
}

pub fn row_norms_sq(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = vec![0.0; m.nrows()];
    for j in 0..m.ncols() {
        for (i, v) in m.column(j).iter().enumerate() {
            out[i] += v * v;
        }
    }
    out
}

/// Thin singular value decomposition `M = U · diag(σ) · Vᵀ` of numerical rank ρ.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    /// n×ρ, orthonormal columns.
    pub u: DMatrix<f64>,
    /// Length ρ, strictly positive and non-increasing.
    pub singular_values: DVector<f64>,
    /// d×ρ, orthonormal columns.
    pub v: DMatrix<f64>,
}

impl ThinSvd {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (k, s) in self.singular_values.iter().enumerate() {
            us.column_mut(k).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

/// Thin SVD, truncating singular values `≤ rank_threshold · σ₁`.
pub fn thin_svd(m: &FeatureMatrix, rank_threshold: f64) -> Result<ThinSvd> {
    if m.is_sparse() && m.ncols() > MAX_DENSE_COLS {
        return Err(Error::TooLargeForDense { cols: m.ncols() });
    }
    thin_svd_dense(&m.to_dense(), rank_threshold)
}

pub fn thin_svd_dense(m: &DMatrix<f64>, rank_threshold: f64) -> Result<ThinSvd> {
    if !(rank_threshold > 0.0) {
        return Err(invalid("rank_threshold must be positive"));
    }
    check_finite(m)?;
    let (n, d) = m.shape();
    if n == 0 || d == 0 || m.iter().all(|v| *v == 0.0) {
        return Ok(ThinSvd {
            u: DMatrix::zeros(n, 0),
            singular_values: DVector::zeros(0),
            v: DMatrix::zeros(d, 0),
        });
    }

    // nalgebra's bidiagonal iteration occasionally returns factors that do not
    // reconstruct rank-deficient input, and which tolerance trips it varies
    // with the matrix. Try a short ladder in both orientations and keep the
    // first factorization that verifies.
    let scale = m.norm();
    let (left, right, values) = [n < d, n >= d]
        .into_iter()
        .flat_map(|transpose| SVD_EPS_LADDER.iter().map(move |&k| (transpose, k)))
        .find_map(|(transpose, k)| {
            let work = if transpose { m.transpose() } else { m.clone() };
            let svd = work.clone().try_svd(true, true, k * f64::EPSILON, 0)?;
            let residual = (svd.clone().recompose().ok()? - &work).norm();
            let u = svd.u?;
            let v = svd.v_t?.transpose();
            let ok = residual <= SVD_RESIDUAL_TOL * scale
                && orthonormality_deviation(&u) <= SVD_RESIDUAL_TOL
                && orthonormality_deviation(&v) <= SVD_RESIDUAL_TOL;
            let factors = if transpose {
                (v, u, svd.singular_values)
            } else {
                (u, v, svd.singular_values)
            };
            ok.then_some(factors)
        })
        .ok_or(Error::SvdFailed)?;

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let top = values[order[0]];
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&k| values[k] > rank_threshold * top)
        .collect();

    Ok(ThinSvd {
        u: left.select_columns(&keep),
        singular_values: DVector::from_iterator(keep.len(), keep.iter().map(|&k| values[k])),
        v: right.select_columns(&keep),
    })
}

/// Seeded d×ℓ matrix with orthonormal columns: the Q factor of a gaussian matrix.
pub fn random_orthonormal(d: usize, ell: usize, seed: u64) -> Result<DMatrix<f64>> {
    if ell == 0 || ell > d {
        return Err(invalid(format!("need 1 ≤ ℓ ≤ d, got ℓ = {ell}, d = {d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(d, ell, |_, _| StandardNormal.sample(&mut rng));
    Ok(g.qr().q())
}

/// Numerical rank with the default relative threshold.
pub fn numerical_rank(m: &DMatrix<f64>) -> Result<usize> {
    Ok(thin_svd_dense(m, DEFAULT_RANK_THRESHOLD)?.rank())
}

/// Largest singular value by power iteration on `MᵀM`, to relative tolerance `tol`.
pub fn spectral_norm(m: &FeatureMatrix, tol: f64) -> f64 {
    spectral_norm_dense(&m.to_dense(), tol)
}

pub fn spectral_norm_dense(m: &DMatrix<f64>, tol: f64) -> f64 {
    const MAX_ITERS: usize = 100_000;
    let d = m.ncols();
    if d == 0 || m.nrows() == 0 {
        return 0.0;
    }
    // Fixed seed keeps the function pure.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x = DVector::from_fn(d, |_, _| rng.random::<f64>() - 0.5);
    let nx = x.norm();
    if nx == 0.0 {
        return 0.0;
    }
    x /= nx;
    let mut sigma = 0.0_f64;
    for _ in 0..MAX_ITERS {
        let y = m * &x;
        let z = m.transpose() * &y;
        let next = y.norm();
        let nz = z.norm();
        if nz == 0.0 {
            // x landed in the null space; the matrix may still be nonzero.
            if next == 0.0 && sigma == 0.0 {
                let restart = m.column_iter().position(|c| c.norm() > 0.0);
                match restart {
                    Some(j) => {
                        x.fill(0.0);
                        x[j] = 1.0;
                        continue;
                    }
                    None => return 0.0,
                }
            }
            return next;
        }
        x = z / nz;
        if (next - sigma).abs() <= tol * next {
            return next.max(sigma);
        }
        sigma = next;
    }
    sigma
}

/// Spectral norm of a symmetric matrix from its eigenvalues.
pub fn symmetric_spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, l| acc.max(l.abs()))
}

/// `‖VᵀV − I‖₂`.
pub fn orthonormality_deviation(v: &DMatrix<f64>) -> f64 {
    let gram = v.transpose() * v;
    symmetric_spectral_norm(&(gram - DMatrix::identity(v.ncols(), v.ncols())))
}
