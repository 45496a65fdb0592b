use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::{symmetric_spectral_norm, FeatureMatrix};

/// One sampled column with its rescaling weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub column: usize,
    pub weight: f64,
}

/// Sampling-and-rescaling operator `R = S·D ∈ ℝ^{d×r}`.
///
/// Selection `j` places `weight_j` at row `column_j` of column `j` of `R`, so
/// column `j` of `X·R` is `weight_j` times column `column_j` of `X`. The same
/// source column may appear more than once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingOperator {
    source_dim: usize,
    selections: Vec<Selection>,
}

impl SamplingOperator {
    pub fn new(source_dim: usize, selections: Vec<Selection>) -> Result<Self> {
        for s in &selections {
            if s.column >= source_dim {
                return Err(Error::DimensionMismatch {
                    context: "sampled column index",
                    expected: source_dim,
                    found: s.column + 1,
                });
            }
            if !(s.weight > 0.0) || !s.weight.is_finite() {
                return Err(invalid(format!(
                    "sampling weight for column {} must be positive and finite, got {}",
                    s.column, s.weight
                )));
            }
        }
        Ok(Self {
            source_dim,
            selections,
        })
    }

    /// Unit-weight operator picking `columns` in order.
    pub fn unweighted(source_dim: usize, columns: &[usize]) -> Result<Self> {
        Self::new(
            source_dim,
            columns
                .iter()
                .map(|&column| Selection {
                    column,
                    weight: 1.0,
                })
                .collect(),
        )
    }

    /// `r = d` identity sampling.
    pub fn identity(d: usize) -> Self {
        Self::unweighted(d, &(0..d).collect::<Vec<_>>()).expect("identity is valid")
    }

    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    pub fn target_dim(&self) -> usize {
        self.selections.len()
    }

    pub fn selections(&self) -> &[Selection] {
        &self.selections
    }

    pub fn columns(&self) -> Vec<usize> {
        self.selections.iter().map(|s| s.column).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.selections.iter().map(|s| s.weight).collect()
    }

    /// Distinct selected columns in ascending order.
    pub fn distinct_columns(&self) -> Vec<usize> {
        let mut c = self.columns();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// Explicit d×r matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut r = DMatrix::zeros(self.source_dim, self.target_dim());
        for (j, s) in self.selections.iter().enumerate() {
            r[(s.column, j)] = s.weight;
        }
        r
    }

    /// `X·R` for a dense X with d columns.
    pub fn apply_dense(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.source_dim {
            return Err(Error::DimensionMismatch {
                context: "sampling operator input columns",
                expected: self.source_dim,
                found: x.ncols(),
            });
        }
        let mut out = DMatrix::zeros(x.nrows(), self.target_dim());
        for (j, s) in self.selections.iter().enumerate() {
            out.set_column(j, &(x.column(s.column) * s.weight));
        }
        Ok(out)
    }

    pub fn apply(&self, x: &FeatureMatrix) -> Result<DMatrix<f64>> {
        self.apply_dense(&x.to_dense())
    }

    /// `VᵀR Rᵀ V` for V with d rows.
    pub fn sandwich(&self, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let rv = self.apply_dense(&v.transpose())?;
        Ok(&rv * rv.transpose())
    }

    /// Spectral norm of `E = VᵀV − VᵀRRᵀV`.
    pub fn spectral_error(&self, v: &DMatrix<f64>) -> Result<f64> {
        let e = v.transpose() * v - self.sandwich(v)?;
        Ok(symmetric_spectral_norm(&e))
    }
}
